"""Heterogeneity, sparsity and eigenvalue diagnostics computed from samples."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, DegenerateDataError, InsufficientSamplesError
from .summaries import ClassSummary, fit_class_summary


def delta_I_hat(summary1: ClassSummary, summary2: ClassSummary) -> float:
    """Unbiased estimate of ||mu_1 - mu_2||^2."""
    d = summary1.mean - summary2.mean
    return float(d @ d - summary1.trace / summary1.n - summary2.trace / summary2.n)


def delta_II_hat(summary_i: ClassSummary, summary_j: ClassSummary) -> float:
    ti, tj = summary_i.trace, summary_j.trace
    if not (ti > 0 and tj > 0):
        raise DegenerateDataError("both sample traces must be positive")
    p = summary_i.p
    dI = delta_I_hat(summary_i, summary_j)
    return p / tj * (dI + ti - tj + tj * math.log(tj / ti))


def gqda_preference_ratio(summary_i: ClassSummary, summary_j: ClassSummary) -> float:
    """(Delta_II_hat * tr(S_j) / p) / Delta_I_hat; well above 1 favours GQDA over DBDA."""
    return delta_II_hat(summary_i, summary_j) * summary_j.trace / summary_i.p / delta_I_hat(summary_i, summary_j)


def _centered_gram(samples: np.ndarray) -> np.ndarray:
    X = np.asarray(samples, dtype=float)
    Xc = X - X.mean(axis=-2, keepdims=True)
    return Xc @ np.swapaxes(Xc, -1, -2)


def trsq_hat(samples) -> float | np.ndarray:
    """Distribution-free unbiased estimate of tr(Sigma^2).

    The U-statistic of ``{(x_a - x_b)^T (x_c - x_d)}^2 / 4`` over all ordered
    quadruples of distinct indices, evaluated in closed form from the Gram
    matrix. The kernel is translation invariant, so the Gram matrix is taken
    on mean-centered rows to avoid cancellation. Leading axes are batch axes.
    """
    X = np.asarray(samples, dtype=float)
    n = X.shape[-2]
    if n < 4:
        raise InsufficientSamplesError(f"tr(Sigma^2) estimate needs n >= 4, got {n}")
    G = _centered_gram(X)
    d = np.einsum("...ii->...i", G)
    G2 = G * G
    s2 = G2.sum(axis=(-1, -2)) - (d * d).sum(axis=-1)
    r = G.sum(axis=-1) - d
    s3 = (r * r).sum(axis=-1) - (G2.sum(axis=-1) - d * d).sum(axis=-1)
    t = G.sum(axis=(-1, -2)) - d.sum(axis=-1)
    s4 = t * t - 4 * s3 - 2 * s2
    p2 = n * (n - 1)
    p3 = p2 * (n - 2)
    p4 = p3 * (n - 3)
    out = s2 / p2 - 2 * s3 / p3 + s4 / p4
    return float(out) if np.ndim(out) == 0 else out


def trace_cov_product(samples1, samples2) -> float | np.ndarray:
    """tr(S_1 S_2) through the n_1 x n_2 cross Gram matrix."""
    X1, X2 = np.asarray(samples1, dtype=float), np.asarray(samples2, dtype=float)
    n1, n2 = X1.shape[-2], X2.shape[-2]
    C1 = X1 - X1.mean(axis=-2, keepdims=True)
    C2 = X2 - X2.mean(axis=-2, keepdims=True)
    K = C1 @ np.swapaxes(C2, -1, -2)
    out = (K * K).sum(axis=(-1, -2)) / ((n1 - 1) * (n2 - 1))
    return float(out) if np.ndim(out) == 0 else out


def delta_sigma_hat(samples1, samples2) -> float | np.ndarray:
    """Unbiased estimate of ||Sigma_1 - Sigma_2||_F^2."""
    return trsq_hat(samples1) + trsq_hat(samples2) - 2 * trace_cov_product(samples1, samples2)


@dataclass(frozen=True)
class ThresholdConfig:
    constant_M: float = 2.0
    keep_diagonal: bool = False

    def __post_init__(self):
        if not self.constant_M > 0:
            raise ConfigError("threshold constant M' must be positive")

    def tau(self, n: int, p: int) -> float:
        return self.constant_M * math.sqrt(math.log(p) / n)


def threshold_operator(M, tau: float, keep_diagonal: bool = False) -> np.ndarray:
    """Zero every entry with |m_st| < tau, diagonal included unless asked otherwise."""
    M = np.asarray(M, dtype=float)
    out = np.where(np.abs(M) >= tau, M, 0.0)
    if keep_diagonal:
        np.fill_diagonal(out, np.diag(M))
    return out


def sparsity_measure(M, h: float) -> float:
    """max over columns of sum_s |m_st|^h, with 0^0 taken as 0."""
    if not 0 <= h < 1:
        raise ConfigError(f"h must lie in [0, 1), got {h}")
    A = np.abs(np.asarray(M, dtype=float))
    powered = np.where(A > 0, A ** h, 0.0)
    return float(powered.sum(axis=0).max())


def nr_max_eigenvalue(samples) -> float:
    """Noise-reduced estimate of the largest eigenvalue of Sigma.

    The largest eigenvalue of the n x n dual covariance, minus the residual
    trace spread over the remaining n - 2 degrees of freedom; floored at 0.
    """
    X = np.asarray(samples, dtype=float)
    n = X.shape[0]
    if n < 3:
        raise InsufficientSamplesError(f"noise-reduced eigenvalue needs n >= 3, got {n}")
    SD = _centered_gram(X) / (n - 1)
    lam = float(np.linalg.eigvalsh(SD)[-1])
    resid = float(np.trace(SD)) - lam
    return max(lam - resid / (n - 2), 0.0)


@dataclass(frozen=True)
class ConditionDiagnostics:
    c1: float
    c2: float
    defined: bool


def condition_diagnostics(n_min: int, trsq_hats: Sequence[float], lambda_hats: Sequence[float], delta_I: float) -> ConditionDiagnostics:
    """C1 = max W / (n_min D^2) and C2 = max lambda / D; undefined when D <= 0."""
    if not delta_I > 0:
        return ConditionDiagnostics(math.nan, math.nan, False)
    c1 = max(trsq_hats) / (n_min * delta_I**2)
    c2 = max(lambda_hats) / delta_I
    return ConditionDiagnostics(float(c1), float(c2), True)


@dataclass(frozen=True)
class SparsityReport:
    labels: tuple[str, str]
    p: int
    delta_I_hat: float
    delta_II_hat: tuple[float, float]
    delta_sigma_hat: float
    trsq_hat: tuple[float, float]
    lambda_max_hat: tuple[float, float]
    c1: float
    c2: float
    conditions_defined: bool
    sphericity: tuple[float, float]
    trace_ratio: float
    gqda_ratio: tuple[float, float]

    def items(self) -> list[tuple[str, float]]:
        a, b = self.labels
        p = self.p
        rows = [
            ("delta_I_hat", self.delta_I_hat),
            ("delta_I_hat_over_p", self.delta_I_hat / p),
            (f"delta_II_hat[{a}]", self.delta_II_hat[0]),
            (f"delta_II_hat[{b}]", self.delta_II_hat[1]),
            ("delta_sigma_hat", self.delta_sigma_hat),
            ("delta_sigma_hat_over_p", self.delta_sigma_hat / p),
            (f"trsq_hat[{a}]", self.trsq_hat[0]),
            (f"trsq_hat[{b}]", self.trsq_hat[1]),
            (f"lambda_max_hat[{a}]", self.lambda_max_hat[0]),
            (f"lambda_max_hat[{b}]", self.lambda_max_hat[1]),
            (f"lambda_max_hat_over_p[{a}]", self.lambda_max_hat[0] / p),
            (f"lambda_max_hat_over_p[{b}]", self.lambda_max_hat[1] / p),
            ("c1", self.c1),
            ("c2", self.c2),
            (f"sphericity[{a}]", self.sphericity[0]),
            (f"sphericity[{b}]", self.sphericity[1]),
            ("trace_ratio", self.trace_ratio),
            (f"gqda_ratio[{a}]", self.gqda_ratio[0]),
            (f"gqda_ratio[{b}]", self.gqda_ratio[1]),
        ]
        return rows

    def headline(self) -> str:
        """One-line summary with each quantity also written as a multiple of p."""
        p = self.p
        lam = ", ".join(f"{v:.4g}" for v in self.lambda_max_hat)
        lamp = ", ".join(f"{v / p:.3g}p" for v in self.lambda_max_hat)
        c = f"({self.c1:.3g}, {self.c2:.3g})" if self.conditions_defined else "(undefined, undefined)"
        return (
            f"Delta_I_hat={self.delta_I_hat:.4g} (={self.delta_I_hat / p:.3g}p); "
            f"Delta_Sigma_hat={self.delta_sigma_hat:.3g} (={self.delta_sigma_hat / p:.3g}p); "
            f"lambda_max_hat=({lam}) (=({lamp})); (C1, C2)={c}"
        )


def sparsity_report(samples1, samples2, labels=("1", "2")) -> SparsityReport:
    s1, s2 = fit_class_summary(samples1), fit_class_summary(samples2)
    p = s1.p
    dI = delta_I_hat(s1, s2)
    w = (trsq_hat(samples1), trsq_hat(samples2))
    lam = (nr_max_eigenvalue(samples1), nr_max_eigenvalue(samples2))
    cond = condition_diagnostics(min(s1.n, s2.n), w, lam, dI)
    d2 = (delta_II_hat(s1, s2), delta_II_hat(s2, s1))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (d2[0] * s2.trace / p / dI, d2[1] * s1.trace / p / dI) if dI != 0 else (math.nan, math.nan)
    return SparsityReport(
        labels=tuple(labels),
        p=p,
        delta_I_hat=dI,
        delta_II_hat=d2,
        delta_sigma_hat=float(w[0] + w[1] - 2 * trace_cov_product(samples1, samples2)),
        trsq_hat=w,
        lambda_max_hat=lam,
        c1=cond.c1,
        c2=cond.c2,
        conditions_defined=cond.defined,
        sphericity=(w[0] / s1.trace**2, w[1] / s2.trace**2),
        trace_ratio=s1.trace / s2.trace,
        gqda_ratio=ratio,
    )
