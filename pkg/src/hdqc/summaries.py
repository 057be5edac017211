"""Labeled samples, per-class sufficient statistics and global standardization."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, DegenerateDataError, DimensionError, InsufficientSamplesError


@dataclass(frozen=True)
class Dataset:
    """Per-class sample matrices sharing a common dimension ``p``.

    ``classes[i]`` is an ``n_i x p`` array; ``labels[i]`` names that class.
    """

    classes: tuple[np.ndarray, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.classes) != len(self.labels):
            raise DataError("one label per class is required")
        if len(self.classes) == 0:
            raise DataError("dataset has no classes")
        arrays = []
        for label, x in zip(self.labels, self.classes):
            x = np.atleast_2d(np.asarray(x, dtype=float))
            if x.ndim != 2:
                raise DimensionError(f"class {label!r}: samples must be a 2-d array")
            if x.shape[0] < 2:
                raise InsufficientSamplesError(f"class {label!r} has {x.shape[0]} sample(s); need at least 2")
            if not np.all(np.isfinite(x)):
                raise DataError(f"class {label!r} contains non-finite values")
            arrays.append(x)
        dims = {x.shape[1] for x in arrays}
        if len(dims) != 1:
            raise DimensionError(f"classes disagree on dimension: {sorted(dims)}")
        object.__setattr__(self, "classes", tuple(arrays))
        object.__setattr__(self, "labels", tuple(str(l) for l in self.labels))

    @property
    def p(self) -> int:
        return self.classes[0].shape[1]

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(x.shape[0] for x in self.classes)

    @property
    def n_min(self) -> int:
        return min(self.sizes)

    @property
    def n_total(self) -> int:
        return sum(self.sizes)

    def scaled(self, factor: float) -> "Dataset":
        """Divide every sample by ``factor``."""
        return Dataset(tuple(x / factor for x in self.classes), self.labels)

    def without(self, cls: int, row: int) -> "Dataset":
        classes = list(self.classes)
        classes[cls] = np.delete(classes[cls], row, axis=0)
        return Dataset(tuple(classes), self.labels)

    def stacked(self) -> tuple[np.ndarray, np.ndarray]:
        """All samples as one matrix plus the class index of every row."""
        X = np.vstack(self.classes)
        y = np.concatenate([np.full(x.shape[0], i) for i, x in enumerate(self.classes)])
        return X, y


@dataclass(frozen=True)
class ClassSummary:
    """Sample mean, covariance (optionally materialized), diagonal and trace.

    ``cov`` is ``None`` unless requested: the diagonal classifiers only need
    ``cov_diag`` and ``trace``, and a p x p matrix at p ~ 10^4 is avoidable.
    """

    mean: np.ndarray
    cov_diag: np.ndarray
    trace: float
    n: int
    cov: np.ndarray | None = field(default=None, repr=False)

    @property
    def p(self) -> int:
        return self.mean.shape[0]

    def scaled(self, factor: float) -> "ClassSummary":
        """Summary of the samples divided by ``factor``."""
        f2 = factor * factor
        return ClassSummary(
            mean=self.mean / factor,
            cov_diag=self.cov_diag / f2,
            trace=self.trace / f2,
            n=self.n,
            cov=None if self.cov is None else self.cov / f2,
        )


def fit_class_summary(samples, full_cov: bool = False) -> ClassSummary:
    """Sufficient statistics of one class, with divisor ``n - 1``.

    Two-pass: the mean is removed before any products are accumulated.
    """
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    if X.ndim != 2:
        raise DimensionError("samples must be an n x p matrix")
    n, p = X.shape
    if n < 2:
        raise InsufficientSamplesError(f"need at least 2 samples, got {n}")
    if p < 1:
        raise DimensionError("need at least one feature")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov_diag = np.einsum("ij,ij->j", Xc, Xc) / (n - 1)
    cov = None
    if full_cov:
        cov = Xc.T @ Xc / (n - 1)
        cov = 0.5 * (cov + cov.T)
        cov_diag = np.diag(cov).copy()
    return ClassSummary(mean=mean, cov_diag=cov_diag, trace=float(cov_diag.sum()), n=n, cov=cov)


def summarize(dataset: Dataset, full_cov: bool = False) -> list[ClassSummary]:
    return [fit_class_summary(x, full_cov=full_cov) for x in dataset.classes]


@dataclass(frozen=True)
class PooledDiagonal:
    values: np.ndarray
    weights: tuple[int, ...]


def pooled_diagonal(summaries: Sequence[ClassSummary]) -> PooledDiagonal:
    """Pooled diagonal sum_i (n_i - 1) s_i / sum_i (n_i - 1).

    With two classes the divisor is ``n_1 + n_2 - 2``.
    """
    if len(summaries) < 2:
        raise DataError("pooling needs at least two classes")
    dims = {s.p for s in summaries}
    if len(dims) != 1:
        raise DimensionError(f"summaries disagree on dimension: {sorted(dims)}")
    weights = tuple(s.n - 1 for s in summaries)
    acc = np.zeros(summaries[0].p)
    for w, s in zip(weights, summaries):
        acc += w * s.cov_diag
    return PooledDiagonal(values=acc / sum(weights), weights=weights)


def global_scale_factor(traces: Sequence[float], p: int) -> float:
    """Divisor {sum_l tr(S_l) / (l p)}^{1/2} making the mean class trace equal p."""
    traces = np.asarray(traces, dtype=float)
    total = float(traces.sum())
    if not total > 0:
        raise DegenerateDataError("every class has zero trace; cannot standardize")
    return math.sqrt(total / (len(traces) * p))


def standardize_global(dataset: Dataset) -> tuple[Dataset, float]:
    traces = [fit_class_summary(x).trace for x in dataset.classes]
    factor = global_scale_factor(traces, dataset.p)
    return dataset.scaled(factor), factor


# -- CSV ingestion ---------------------------------------------------------


def _parse_rows(rows) -> Dataset:
    grouped: dict[str, list[list[float]]] = {}
    width = None
    for lineno, row in rows:
        if not row or all(not c.strip() for c in row):
            continue
        label, values = row[0].strip(), row[1:]
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise DimensionError(f"line {lineno}: expected {width} values, found {len(values)}")
        try:
            grouped.setdefault(label, []).append([float(v) for v in values])
        except ValueError as exc:
            raise DataError(f"line {lineno}: {exc}") from None
    if not grouped:
        raise DataError("no samples found")
    if width == 0:
        raise DimensionError("rows carry a label but no feature values")
    labels = tuple(grouped)
    return Dataset(tuple(np.array(grouped[l]) for l in labels), labels)


def parse_dataset_csv(text: str) -> Dataset:
    """Parse ``label,x_1,...,x_p`` rows; an optional header starts with ``label``.

    Classes are ordered by first appearance.
    """
    reader = csv.reader(io.StringIO(text))
    rows = []
    for lineno, row in enumerate(reader, start=1):
        if lineno == 1 and row and row[0].strip().lower().startswith("label"):
            continue
        if row and row[0].lstrip().startswith("#"):
            continue
        rows.append((lineno, row))
    return _parse_rows(rows)


def read_dataset_csv(path) -> Dataset:
    return parse_dataset_csv(Path(path).read_text(encoding="utf-8"))


def write_dataset_csv(dataset: Dataset, path, header: bool = True) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header:
            w.writerow(["label"] + [f"x{j}" for j in range(dataset.p)])
        for label, X in zip(dataset.labels, dataset.classes):
            for row in X:
                w.writerow([label] + [repr(float(v)) for v in row])
