"""Bias-corrected quadratic discriminant scores and the classifiers built on them.

A class is scored by

    W(A) = (x0 - xbar)^T A (x0 - xbar) - tr(S A) / n - log|A|

and an observation goes to the class with the smallest score.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError, DegenerateFeatureError, DimensionError, SingularPrecisionError
from .estimators import ThresholdConfig, threshold_operator
from .feature_selection import select_features
from .precision import Diagonal, FeatureRestricted, Full, Identity, PrecisionSpec, ScaledIdentity, spec_from_dict
from .summaries import ClassSummary, Dataset, fit_class_summary, global_scale_factor, pooled_diagonal
from .theory import PopulationModel, population_specs

log = logging.getLogger(__name__)

VARIANTS = ("dbda", "gqda", "dlda_bc", "dqda_bc", "fs_dqda", "sample_precision", "thresholded")
ORACLE_VARIANTS = ("I", "II", "III", "IV")
FULL_COV_VARIANTS = frozenset({"sample_precision", "thresholded"})

DISPLAY_NAMES = {
    "dbda": "DBDA",
    "gqda": "GQDA",
    "dlda_bc": "DLDA-bc",
    "dqda_bc": "DQDA-bc",
    "fs_dqda": "FS-DQDA",
    "sample_precision": "sample-precision",
    "thresholded": "thresholded",
}


def normalize_variant(name: str) -> str:
    key = name.strip().replace("-", "_").lower()
    if key in VARIANTS:
        return key
    upper = name.strip().upper()
    if upper in ORACLE_VARIANTS:
        return upper
    raise ConfigError(f"unknown classifier {name!r}; expected one of {VARIANTS + ORACLE_VARIANTS}")


@dataclass(frozen=True)
class FitOptions:
    gamma: float = 0.5
    threshold: ThresholdConfig = field(default_factory=ThresholdConfig)
    standardize: bool = False
    strict_ties: bool = False


@dataclass(frozen=True, eq=False)
class ClassModel:
    """What one class contributes to the score: centre, A, bias term and log|A|."""

    label: str
    mean: np.ndarray
    n: int
    precision: PrecisionSpec
    bias: float
    logdet: float

    def score(self, X0: np.ndarray) -> np.ndarray:
        return self.precision.quad(X0 - self.mean) - self.bias - self.logdet


@dataclass(frozen=True, eq=False)
class TrainedClassifier:
    variant: str
    classes: tuple[ClassModel, ...]
    selected: np.ndarray | None = None
    scale: float = 1.0
    strict_ties: bool = False

    def __post_init__(self):
        dims = {c.mean.shape[0] for c in self.classes} | {c.precision.dim for c in self.classes}
        if len(dims) != 1:
            raise DimensionError("class models disagree on dimension")
        if len(self.classes) < 2:
            raise DataError("a classifier needs at least two classes")

    @property
    def p(self) -> int:
        return self.classes[0].mean.shape[0]

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(c.label for c in self.classes)

    def scores(self, X0) -> np.ndarray:
        """Score matrix of shape ``(m, k)`` for ``m`` observations."""
        X0 = np.atleast_2d(np.asarray(X0, dtype=float))
        if X0.shape[-1] != self.p:
            raise DimensionError(f"observation has dimension {X0.shape[-1]}, model expects {self.p}")
        if not np.all(np.isfinite(X0)):
            raise DataError("observation contains non-finite values")
        if self.scale != 1.0:
            X0 = X0 / self.scale
        return np.stack([c.score(X0) for c in self.classes], axis=-1)

    def predict(self, X0) -> tuple[np.ndarray, np.ndarray]:
        """Class indices and tie flags for every row of ``X0``."""
        return decide(self.scores(X0), self.strict_ties)

    def to_dict(self) -> dict:
        return {
            "format": "hdqc-model",
            "version": 1,
            "variant": self.variant,
            "p": self.p,
            "scale": self.scale,
            "strict_ties": self.strict_ties,
            "selected": None if self.selected is None else self.selected.tolist(),
            "classes": [
                {
                    "label": c.label,
                    "n": c.n,
                    "mean": c.mean.tolist(),
                    "bias": c.bias,
                    "logdet": c.logdet,
                    "precision": c.precision.to_dict(),
                }
                for c in self.classes
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedClassifier":
        if d.get("format") != "hdqc-model":
            raise DataError("not an hdqc model file")
        classes = tuple(
            ClassModel(
                label=c["label"],
                mean=np.array(c["mean"], dtype=float),
                n=int(c["n"]),
                precision=spec_from_dict(c["precision"]),
                bias=float(c["bias"]),
                logdet=float(c["logdet"]),
            )
            for c in d["classes"]
        )
        sel = d.get("selected")
        return cls(
            variant=d["variant"],
            classes=classes,
            selected=None if sel is None else np.array(sel, dtype=np.int64),
            scale=float(d.get("scale", 1.0)),
            strict_ties=bool(d.get("strict_ties", False)),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "TrainedClassifier":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def decide(scores: np.ndarray, strict_ties: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise argmin with an exact-tie flag.

    Ties go to the lowest tied index, or to the highest one with
    ``strict_ties`` (for two classes: "into the second class otherwise").
    """
    scores = np.atleast_2d(scores)
    best = scores.min(axis=-1, keepdims=True)
    tied = scores == best
    tie = tied.sum(axis=-1) > 1
    if strict_ties:
        k = scores.shape[-1]
        idx = k - 1 - np.argmax(tied[..., ::-1], axis=-1)
    else:
        idx = np.argmax(tied, axis=-1)
    return idx, tie


def discriminant_score(x0, summary: ClassSummary, A: PrecisionSpec) -> float:
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (summary.p,) or A.dim != summary.p:
        raise DimensionError("observation, summary and precision must share dimension p")
    if not np.all(np.isfinite(x0)):
        raise DataError("observation contains non-finite values")
    return float(A.quad(x0 - summary.mean) - A.trace_with(summary) / summary.n - A.logdet)


def classify(x0, model: TrainedClassifier) -> tuple[int, bool]:
    idx, tie = model.predict(np.asarray(x0, dtype=float)[None, :])
    return int(idx[0]), bool(tie[0])


# -- fitting ---------------------------------------------------------------


def _require_positive_diagonal(values: np.ndarray):
    bad = np.flatnonzero(~(values > 0))
    if bad.size:
        raise DegenerateFeatureError(bad[0])


def _bias(spec: PrecisionSpec, summary: ClassSummary, centered: np.ndarray | None) -> float:
    if isinstance(spec, Full) and centered is not None:
        return spec.trace_with_centered(centered) / ((summary.n - 1) * summary.n)
    return spec.trace_with(summary) / summary.n


def fit_summaries(
    summaries: Sequence[ClassSummary],
    variant: str,
    options: FitOptions = FitOptions(),
    labels: Sequence[str] | None = None,
    scale: float = 1.0,
) -> TrainedClassifier:
    """Build a classifier from per-class summaries.

    ``sample_precision`` and ``thresholded`` need summaries carrying the full
    sample covariance.
    """
    variant = normalize_variant(variant)
    if variant in ORACLE_VARIANTS:
        raise DataError("oracle classifiers need the population; use oracle_classifier")
    k = len(summaries)
    if k < 2:
        raise DataError("need at least two classes")
    p = summaries[0].p
    if any(s.p != p for s in summaries):
        raise DimensionError("summaries disagree on dimension")
    labels = tuple(labels) if labels is not None else tuple(str(i + 1) for i in range(k))
    selected = None
    models = []

    if variant == "dbda":
        for lab, s in zip(labels, summaries):
            models.append(ClassModel(lab, s.mean, s.n, Identity(p), s.trace / s.n, 0.0))
    elif variant == "gqda":
        for lab, s in zip(labels, summaries):
            if not s.trace > 0:
                raise DegenerateFeatureError(int(np.argmin(s.cov_diag)), f"class {lab!r} has zero trace")
            spec = ScaledIdentity(p / s.trace, p)
            models.append(ClassModel(lab, s.mean, s.n, spec, p / s.n, spec.logdet))
    elif variant == "dlda_bc":
        pooled = pooled_diagonal(summaries).values
        _require_positive_diagonal(pooled)
        spec = Diagonal(1.0 / pooled)
        for lab, s in zip(labels, summaries):
            # the common log|A| cancels from every score difference
            models.append(ClassModel(lab, s.mean, s.n, spec, spec.trace_with(s) / s.n, 0.0))
    elif variant == "dqda_bc":
        for lab, s in zip(labels, summaries):
            _require_positive_diagonal(s.cov_diag)
            spec = Diagonal(1.0 / s.cov_diag)
            models.append(ClassModel(lab, s.mean, s.n, spec, p / s.n, spec.logdet))
    elif variant == "fs_dqda":
        for s in summaries:
            _require_positive_diagonal(s.cov_diag)
        sel = select_features(summaries, options.gamma, p)
        selected = sel.selected
        if selected.size == 0:
            log.warning("feature selection kept no coordinate; falling back to DBDA")
            fallback = fit_summaries(summaries, "dbda", options, labels, scale)
            return replace(fallback, variant="fs_dqda", selected=selected)
        for lab, s in zip(labels, summaries):
            inner = Diagonal(1.0 / s.cov_diag[selected])
            spec = FeatureRestricted(selected, inner, p)
            models.append(ClassModel(lab, s.mean, s.n, spec, selected.size / s.n, spec.logdet))
    elif variant == "sample_precision":
        for lab, s in zip(labels, summaries):
            if s.n <= p + 1:
                raise SingularPrecisionError(f"class {lab!r}: sample precision needs n > p + 1 (n={s.n}, p={p})")
            if s.cov is None:
                raise DataError("sample_precision needs full covariance summaries")
            spec = Full.from_covariance(s.cov)
            models.append(ClassModel(lab, s.mean, s.n, spec, p / s.n, spec.logdet))
    elif variant == "thresholded":
        for lab, s in zip(labels, summaries):
            if s.cov is None:
                raise DataError("thresholded needs full covariance summaries")
            tau = options.threshold.tau(s.n, p)
            T = threshold_operator(s.cov, tau, options.threshold.keep_diagonal)
            try:
                spec = Full.from_covariance(T)
            except SingularPrecisionError:
                raise SingularPrecisionError(f"class {lab!r}: thresholded covariance (tau={tau:.4g}) is not positive definite") from None
            models.append(ClassModel(lab, s.mean, s.n, spec, spec.trace_with(s) / s.n, spec.logdet))

    return TrainedClassifier(variant, tuple(models), selected, scale, options.strict_ties)


def fit(dataset: Dataset, variant: str, options: FitOptions = FitOptions()) -> TrainedClassifier:
    """Fit one classifier variant on a labeled dataset.

    With ``options.standardize`` the data are divided by the global trace
    factor first, and the same factor is applied to every observation scored
    later.
    """
    variant = normalize_variant(variant)
    summaries = [fit_class_summary(x, full_cov=variant in FULL_COV_VARIANTS) for x in dataset.classes]
    scale = 1.0
    if options.standardize:
        scale = global_scale_factor([s.trace for s in summaries], dataset.p)
        summaries = [s.scaled(scale) for s in summaries]
    return fit_summaries(summaries, variant, options, dataset.labels, scale)


def oracle_models(
    specs: Sequence[PrecisionSpec],
    summaries: Sequence[ClassSummary],
    labels: Sequence[str],
    centered: Sequence[np.ndarray] | None = None,
) -> tuple[ClassModel, ...]:
    out = []
    for i, (spec, s) in enumerate(zip(specs, summaries)):
        c = None if centered is None else centered[i]
        out.append(ClassModel(labels[i], s.mean, s.n, spec, _bias(spec, s, c), spec.logdet))
    return tuple(out)


def oracle_classifier(pop: PopulationModel, choice: str, dataset: Dataset, strict_ties: bool = False) -> TrainedClassifier:
    """Classifier whose A_i come from the true covariances (choices I-IV).

    Means and bias terms still come from the training samples.
    """
    choice = choice.upper()
    specs = population_specs(pop, choice)
    if dataset.p != pop.p or len(dataset.classes) != pop.k:
        raise DimensionError("dataset does not match the population model")
    summaries = [fit_class_summary(x) for x in dataset.classes]
    centered = [x - s.mean for x, s in zip(dataset.classes, summaries)]
    return TrainedClassifier(choice, oracle_models(specs, summaries, dataset.labels, centered), strict_ties=strict_ties)


def bayes_rule_known_params(x0, pop: PopulationModel) -> tuple[int, bool]:
    """Gaussian Bayes rule for two classes with known parameters.

    Class 0 iff (x0-mu_0)^T S_0^{-1} (x0-mu_0) - log|S_1 S_0^{-1}| < (x0-mu_1)^T S_1^{-1} (x0-mu_1);
    exact equality is reported as a tie and resolved to class 0.
    """
    x0 = np.asarray(x0, dtype=float)
    if pop.k != 2:
        raise DataError("the Bayes rule here is two-class")
    specs = population_specs(pop, "IV")
    q0 = float(specs[0].quad(x0 - pop.mu[0]))
    q1 = float(specs[1].quad(x0 - pop.mu[1]))
    lhs = q0 - (pop.logdets[1] - pop.logdets[0])
    if lhs == q1:
        return 0, True
    return (0 if lhs < q1 else 1), False
