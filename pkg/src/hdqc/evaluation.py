"""Train/test scoring and leave-one-out cross-validation on labeled data."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .discriminant import DISPLAY_NAMES, FULL_COV_VARIANTS, FitOptions, decide, fit, fit_summaries, normalize_variant
from .errors import DataError, HDQCError, InsufficientSamplesError
from .summaries import ClassSummary, Dataset, fit_class_summary, global_scale_factor, standardize_global

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ClassifierResult:
    """Outcome for one classifier; ``predictions`` is -1 where a fit failed."""

    classifier: str
    labels: tuple[str, ...]
    truth: np.ndarray
    predictions: np.ndarray
    ties: np.ndarray
    selected_counts: np.ndarray | None = None
    failures: int = 0
    failure_message: str | None = None

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(int(np.sum(self.truth == i)) for i in range(len(self.labels)))

    @property
    def errors(self) -> tuple[int, ...]:
        """Misclassified (or unscored) samples per class."""
        wrong = self.predictions != self.truth
        return tuple(int(np.sum(wrong & (self.truth == i))) for i in range(len(self.labels)))

    @property
    def total_errors(self) -> int:
        return sum(self.errors)

    @property
    def total(self) -> int:
        return int(self.truth.size)

    def fractions(self) -> list[str]:
        return [f"{e}/{n}" for e, n in zip(self.errors, self.sizes)] + [f"{self.total_errors}/{self.total}"]


@dataclass(frozen=True, eq=False)
class EvaluationReport:
    protocol: str
    labels: tuple[str, ...]
    results: tuple[ClassifierResult, ...]
    gamma: float | None = None

    def result(self, classifier: str) -> ClassifierResult:
        key = normalize_variant(classifier)
        for r in self.results:
            if r.classifier == key:
                return r
        raise KeyError(classifier)

    def table(self) -> str:
        """Error counts as ``k/N`` fractions, one row per classifier."""
        head = ["classifier"] + [f"{l}" for l in self.labels] + ["total"]
        rows = [head]
        for r in self.results:
            name = DISPLAY_NAMES.get(r.classifier, r.classifier)
            cells = [name] + r.fractions()
            if r.selected_counts is not None and r.selected_counts.size:
                cells[0] += f" (p*={int(np.median(r.selected_counts))})"
            if r.failures:
                cells[0] += f" [{r.failures} failed]"
            rows.append(cells)
        widths = [max(len(row[c]) for row in rows) for c in range(len(head))]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
        return f"{self.protocol}\n" + "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        lines = ["classifier,class,errors,n,fraction,failures,selected_median"]
        for r in self.results:
            sel = "" if r.selected_counts is None or not r.selected_counts.size else repr(float(np.median(r.selected_counts)))
            for lab, e, n in zip(self.labels, r.errors, r.sizes):
                lines.append(f"{r.classifier},{lab},{e},{n},{e}/{n},{r.failures},{sel}")
            lines.append(f"{r.classifier},total,{r.total_errors},{r.total},{r.total_errors}/{r.total},{r.failures},{sel}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        out = {
            "protocol": self.protocol,
            "labels": list(self.labels),
            "gamma": self.gamma,
            "results": [
                {
                    "classifier": r.classifier,
                    "errors": list(r.errors),
                    "sizes": list(r.sizes),
                    "fractions": r.fractions(),
                    "predictions": r.predictions.tolist(),
                    "ties": r.ties.astype(int).tolist(),
                    "selected_counts": None if r.selected_counts is None else r.selected_counts.tolist(),
                    "failures": r.failures,
                }
                for r in self.results
            ],
        }
        return json.dumps(out, indent=1) + "\n"


# -- train / test ----------------------------------------------------------


def evaluate_split(train: Dataset, test: Dataset, classifiers: Sequence[str], options: FitOptions = FitOptions(standardize=True)) -> EvaluationReport:
    """Fit on ``train`` and count misclassified ``test`` samples.

    With ``options.standardize`` the training factor is applied to the test
    observations too. A classifier that fails to fit is reported as failed
    and the others proceed.
    """
    if test.p != train.p:
        raise DataError(f"train has p={train.p}, test has p={test.p}")
    index = {lab: i for i, lab in enumerate(train.labels)}
    missing = [lab for lab in test.labels if lab not in index]
    if missing:
        raise DataError(f"test labels {missing} do not occur in the training data")
    X = np.vstack(test.classes)
    truth = np.concatenate([np.full(x.shape[0], index[lab]) for lab, x in zip(test.labels, test.classes)])
    results = []
    for name in classifiers:
        name = normalize_variant(name)
        try:
            model = fit(train, name, options)
        except HDQCError as exc:
            log.warning("%s failed to fit: %s", name, exc)
            results.append(ClassifierResult(name, train.labels, truth, np.full(truth.size, -1), np.zeros(truth.size, bool), None, truth.size, str(exc)))
            continue
        pred, ties = model.predict(X)
        sel = None if model.selected is None else np.array([model.selected.size])
        results.append(ClassifierResult(name, train.labels, truth, pred, ties, sel))
    return EvaluationReport("train/test", train.labels, tuple(results), options.gamma)


# -- leave-one-out ---------------------------------------------------------


@dataclass(frozen=True)
class LoocvOptions:
    fit: FitOptions = field(default_factory=lambda: FitOptions(standardize=True))
    cohort_standardization: bool = False
    workers: int = 1


class _ClassMoments:
    """Mean and centered sum of squares for O(p) leave-one-out downdates."""

    def __init__(self, X: np.ndarray):
        self.X = X
        self.n = X.shape[0]
        self.mean = X.mean(axis=0)
        Xc = X - self.mean
        self.ss = np.einsum("ij,ij->j", Xc, Xc)
        self.summary = fit_class_summary(X)

    def without(self, row: int) -> ClassSummary:
        x = self.X[row]
        m = self.n - 1
        mean = (self.n * self.mean - x) / m
        ss = np.maximum(self.ss - (x - self.mean) * (x - mean), 0.0)
        diag = ss / (m - 1)
        return ClassSummary(mean=mean, cov_diag=diag, trace=float(diag.sum()), n=m)


def _fold_models(data: Dataset, moments, c: int, row: int, variants, opts: FitOptions):
    """Fit every variant with sample ``row`` of class ``c`` held out."""
    summaries = [m.summary if i != c else m.without(row) for i, m in enumerate(moments)]
    scale = 1.0
    if opts.standardize:
        scale = global_scale_factor([s.trace for s in summaries], data.p)
        summaries = [s.scaled(scale) for s in summaries]
    out = {}
    fold_data = None
    for v in variants:
        try:
            if v in FULL_COV_VARIANTS:
                if fold_data is None:
                    fold_data = data.without(c, row)
                out[v] = fit(fold_data, v, opts)
            else:
                out[v] = fit_summaries(summaries, v, opts, data.labels, scale)
        except HDQCError as exc:
            out[v] = exc
    return out


def _run_folds(data: Dataset, folds: Sequence[tuple[int, int]], variants, opts: FitOptions):
    moments = [_ClassMoments(x) for x in data.classes]
    rows = []
    for c, row in folds:
        x0 = data.classes[c][row][None, :]
        models = _fold_models(data, moments, c, row, variants, opts)
        res = []
        for v in variants:
            m = models[v]
            if isinstance(m, Exception):
                res.append((-1, False, -1))
                continue
            idx, tie = decide(m.scores(x0), opts.strict_ties)
            res.append((int(idx[0]), bool(tie[0]), -1 if m.selected is None else int(m.selected.size)))
        rows.append(res)
    return rows


def _run_chunk(args):
    return _run_folds(*args)


def loocv(dataset: Dataset, classifiers: Sequence[str], options: LoocvOptions = LoocvOptions()) -> EvaluationReport:
    """Leave-one-out error counts.

    Every fold refits means, variances, the feature selection and (by
    default) the global standardization factor on the N - 1 retained
    samples. ``cohort_standardization`` instead standardizes once on the full
    cohort before the folds. Diagonal-based variants downdate the class
    moments in O(p) per fold; full-covariance variants refit from scratch.
    """
    if min(dataset.sizes) < 3:
        raise InsufficientSamplesError("LOOCV needs n_i >= 3 in every class")
    variants = tuple(normalize_variant(v) for v in classifiers)
    opts = options.fit
    data = dataset
    protocol = "LOOCV"
    if options.cohort_standardization:
        data, _ = standardize_global(dataset)
        opts = replace(opts, standardize=False)
        protocol = "LOOCV (cohort standardization)"
    folds = [(c, r) for c, x in enumerate(data.classes) for r in range(x.shape[0])]
    if options.workers > 1:
        size = -(-len(folds) // options.workers)
        chunks = [folds[a : a + size] for a in range(0, len(folds), size)]
        with ProcessPoolExecutor(max_workers=options.workers) as ex:
            rows = [r for part in ex.map(_run_chunk, [(data, ch, variants, opts) for ch in chunks]) for r in part]
    else:
        rows = _run_folds(data, folds, variants, opts)
    truth = np.array([c for c, _ in folds])
    results = []
    for j, v in enumerate(variants):
        pred = np.array([r[j][0] for r in rows])
        ties = np.array([r[j][1] for r in rows])
        sel = np.array([r[j][2] for r in rows if r[j][2] >= 0]) if v == "fs_dqda" else None
        results.append(ClassifierResult(v, data.labels, truth, pred, ties, sel, int(np.sum(pred < 0))))
    return EvaluationReport(protocol, data.labels, tuple(results), opts.gamma)


@dataclass(frozen=True)
class GammaSweepPoint:
    gamma: float
    errors: int
    total: int
    selected_median: float


def gamma_sweep(dataset: Dataset, gammas: Sequence[float], options: LoocvOptions = LoocvOptions()) -> list[GammaSweepPoint]:
    """FS-DQDA LOOCV error count for each gamma."""
    out = []
    for g in gammas:
        opts = replace(options, fit=replace(options.fit, gamma=float(g)))
        r = loocv(dataset, ["fs_dqda"], opts).results[0]
        med = float(np.median(r.selected_counts)) if r.selected_counts.size else float("nan")
        out.append(GammaSweepPoint(float(g), r.total_errors, r.total, med))
    return out
