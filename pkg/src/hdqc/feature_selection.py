"""Coordinate screening by combined mean and variance heterogeneity."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, DegenerateFeatureError, DimensionError
from .summaries import ClassSummary


@dataclass(frozen=True, eq=False)
class FeatureSelectionResult:
    theta_hat: np.ndarray
    threshold: float
    gamma: float
    selected: np.ndarray

    @property
    def p_star_hat(self) -> int:
        return int(self.selected.size)

    def to_csv(self) -> str:
        lines = [f"# threshold={self.threshold!r},gamma={self.gamma!r}", "j,theta_hat,selected"]
        mask = np.zeros(self.theta_hat.size, dtype=int)
        mask[self.selected] = 1
        lines += [f"{j},{t!r},{m}" for j, (t, m) in enumerate(zip(self.theta_hat.tolist(), mask))]
        return "\n".join(lines) + "\n"


def _check_variances(summaries: Sequence[ClassSummary], j=None):
    for s in summaries:
        v = s.cov_diag if j is None else s.cov_diag[[j]]
        bad = np.flatnonzero(~(v > 0))
        if bad.size:
            raise DegenerateFeatureError(j if j is not None else bad[0])


def theta_hat(summary1: ClassSummary, summary2: ClassSummary, j: int | None = None):
    """Estimated heterogeneity of coordinate ``j`` (all coordinates if ``None``)."""
    _check_variances((summary1, summary2), j)
    sl = slice(None) if j is None else j
    d2 = (summary1.mean[sl] - summary2.mean[sl]) ** 2
    s1, s2 = summary1.cov_diag[sl], summary2.cov_diag[sl]
    return (d2 + s1) / (2 * s2) + (d2 + s2) / (2 * s1) - 1


def theta_hat_multiclass(summaries: Sequence[ClassSummary], j: int | None = None):
    """Average over ordered class pairs; equals ``theta_hat`` when k = 2."""
    k = len(summaries)
    if k < 2:
        raise ConfigError("need at least two classes")
    _check_variances(summaries, j)
    sl = slice(None) if j is None else j
    acc = 0.0
    for a in range(k):
        for b in range(k):
            if a == b:
                continue
            d2 = (summaries[a].mean[sl] - summaries[b].mean[sl]) ** 2
            acc = acc + (d2 + summaries[a].cov_diag[sl]) / (k * (k - 1) * summaries[b].cov_diag[sl])
    return acc - 1


def theta_population(mu1, mu2, var1, var2) -> np.ndarray:
    d2 = (np.asarray(mu1) - np.asarray(mu2)) ** 2
    var1, var2 = np.asarray(var1, dtype=float), np.asarray(var2, dtype=float)
    return (d2 + var1) / (2 * var2) + (d2 + var2) / (2 * var1) - 1


def selection_threshold(p: int, n_min: int, gamma: float) -> float:
    """xi^gamma with xi = (log p / n_min)^{1/2}, natural log."""
    if not 0 < gamma < 1:
        raise ConfigError(f"gamma must lie in (0, 1), got {gamma}")
    if n_min < 2:
        raise ConfigError("n_min must be at least 2")
    if p < 1:
        raise ConfigError("p must be positive")
    return (math.log(p) / n_min) ** (gamma / 2)


def select_features(summaries: Sequence[ClassSummary], gamma: float = 0.5, p: int | None = None) -> FeatureSelectionResult:
    if p is None:
        p = summaries[0].p
    if any(s.p != p for s in summaries):
        raise DimensionError("summaries must all have dimension p")
    n_min = min(s.n for s in summaries)
    threshold = selection_threshold(p, n_min, gamma)
    if len(summaries) == 2:
        th = theta_hat(summaries[0], summaries[1])
    else:
        th = theta_hat_multiclass(summaries)
    selected = np.flatnonzero(th > threshold)
    return FeatureSelectionResult(theta_hat=np.asarray(th, dtype=float), threshold=threshold, gamma=gamma, selected=selected)


def deviation_statistic(theta_hat, theta_true, n_min: int, p: int) -> float:
    """max_j |theta_hat_j - theta_j| in units of (log p / n_min)^{1/2}."""
    a, b = np.asarray(theta_hat, dtype=float), np.asarray(theta_true, dtype=float)
    if a.shape != b.shape:
        raise DimensionError("theta vectors differ in length")
    rate = math.sqrt(math.log(p) / n_min)
    if rate == 0:
        raise ConfigError("the rate (log p / n_min)^{1/2} vanishes at p = 1")
    return float(np.max(np.abs(a - b))) / rate
