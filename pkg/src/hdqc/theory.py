"""Closed-form population quantities for the bias-corrected quadratic rule.

Classes are indexed 0 and 1 here; ``other(i)`` is the opposite class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import linalg

from .errors import DimensionError, PreconditionError, SingularPrecisionError, UndefinedRatioError
from .precision import Diagonal, Full, Identity, PrecisionSpec, ScaledIdentity

CHOICES = ("I", "II", "III", "IV")


def normal_cdf(x: float) -> float:
    """Standard normal CDF through ``erfc``; absolute error well below 1e-12."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def other(i: int) -> int:
    return 1 - i


@dataclass(frozen=True, eq=False)
class PopulationModel:
    """Means and SPD covariances of the populations.

    Factorizations, traces and diagonals are computed once and cached.
    """

    mu: tuple[np.ndarray, ...]
    sigma: tuple[np.ndarray, ...]

    def __post_init__(self):
        mu = tuple(np.asarray(m, dtype=float).ravel() for m in self.mu)
        sigma = tuple(np.atleast_2d(np.asarray(s, dtype=float)) for s in self.sigma)
        if len(mu) != len(sigma) or len(mu) < 2:
            raise DimensionError("need one mean and one covariance per class, at least two classes")
        p = mu[0].shape[0]
        for m, s in zip(mu, sigma):
            if m.shape != (p,) or s.shape != (p, p):
                raise DimensionError("means and covariances must share dimension p")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        self.factors  # SPD check at construction

    @property
    def p(self) -> int:
        return self.mu[0].shape[0]

    @property
    def k(self) -> int:
        return len(self.mu)

    @cached_property
    def factors(self) -> tuple[np.ndarray, ...]:
        out = []
        for i, s in enumerate(self.sigma):
            try:
                out.append(linalg.cholesky(s, lower=True))
            except linalg.LinAlgError:
                raise SingularPrecisionError(f"covariance of class {i} is not positive definite") from None
        return tuple(out)

    @cached_property
    def logdets(self) -> tuple[float, ...]:
        return tuple(float(2.0 * np.log(np.diag(L)).sum()) for L in self.factors)

    @cached_property
    def traces(self) -> tuple[float, ...]:
        return tuple(float(np.trace(s)) for s in self.sigma)

    @cached_property
    def diagonals(self) -> tuple[np.ndarray, ...]:
        return tuple(np.diag(s).copy() for s in self.sigma)

    @cached_property
    def eigenvalues(self) -> tuple[np.ndarray, ...]:
        """Eigenvalues of each covariance, descending."""
        return tuple(np.linalg.eigvalsh(s)[::-1] for s in self.sigma)

    @property
    def mean_diff(self) -> np.ndarray:
        return self.mu[0] - self.mu[1]

    def restrict(self, indices) -> "PopulationModel":
        idx = np.asarray(indices, dtype=np.int64)
        return PopulationModel(tuple(m[idx] for m in self.mu), tuple(s[np.ix_(idx, idx)] for s in self.sigma))


def population_specs(pop: PopulationModel, choice: str) -> list[PrecisionSpec]:
    """Per-class A for choices (I)-(IV) built from the true covariances."""
    p = pop.p
    if choice == "I":
        return [Identity(p) for _ in range(pop.k)]
    if choice == "II":
        return [ScaledIdentity(p / t, p) for t in pop.traces]
    if choice == "III":
        return [Diagonal(1.0 / d) for d in pop.diagonals]
    if choice == "IV":
        return [Full.from_covariance(s, L) for s, L in zip(pop.sigma, pop.factors)]
    raise ValueError(f"unknown choice {choice!r}; expected one of {CHOICES}")


def _trace_sigma_a(sigma: np.ndarray, spec: PrecisionSpec) -> float:
    return float(np.trace(spec.apply(sigma)))


def delta_i(pop: PopulationModel, specs: Sequence[PrecisionSpec], i: int) -> float:
    """Expected score gap E{W_other} - E{W_i} for x0 from class ``i``."""
    j = other(i)
    d = pop.mean_diff
    return float(
        specs[j].quad(d)
        + _trace_sigma_a(pop.sigma[i], specs[j])
        - _trace_sigma_a(pop.sigma[i], specs[i])
        + specs[i].logdet
        - specs[j].logdet
    )


def delta_iA(pop: PopulationModel, specs: Sequence[PrecisionSpec], i: int) -> float:
    j = other(i)
    v = specs[j].apply(pop.mean_diff[:, None])[:, 0]
    return float(v @ pop.sigma[i] @ v)


def delta_small(pop: PopulationModel, specs: Sequence[PrecisionSpec], n: Sequence[int], i: int) -> float:
    """Asymptotic standard deviation of the score difference for x0 in class ``i``."""
    j = other(i)
    SA_i = specs[i].apply(pop.sigma[i]).T  # Sigma_i A_i
    SA_j = specs[j].apply(pop.sigma[i]).T  # Sigma_i A_j
    TA_j = specs[j].apply(pop.sigma[j])  # A_j Sigma_j = (Sigma_j A_j)^T
    t1 = float(np.sum(SA_i * SA_i.T))
    t2 = float(np.sum(SA_j * TA_j))
    return 2.0 * math.sqrt(t1 / n[i] + t2 / n[j] + delta_iA(pop, specs, i))


def score_gap_moments(pop: PopulationModel, specs: Sequence[PrecisionSpec], n: Sequence[int]) -> tuple[tuple[float, float], tuple[float, float]]:
    """``((Delta_1, Delta_2), (delta_1, delta_2))`` sharing the four products A_a Sigma_k.

    Same values as ``delta_i`` and ``delta_small``; at large p with full
    precision matrices this avoids recomputing the p x p solves.
    """
    P = [[specs[a].apply(pop.sigma[k]) for k in (0, 1)] for a in (0, 1)]
    D, ds = [], []
    for i in (0, 1):
        j = other(i)
        D.append(float(specs[j].quad(pop.mean_diff) + np.trace(P[j][i]) - np.trace(P[i][i]) + specs[i].logdet - specs[j].logdet))
        t1 = float(np.sum(P[i][i] * P[i][i].T))
        t2 = float(np.sum(P[j][i].T * P[j][j]))
        ds.append(2.0 * math.sqrt(t1 / n[i] + t2 / n[j] + delta_iA(pop, specs, i)))
    return (D[0], D[1]), (ds[0], ds[1])


def asymptotic_error(delta: float, delta_small: float) -> float:
    if not delta_small > 0:
        raise UndefinedRatioError("delta_small must be positive")
    return normal_cdf(-delta / delta_small)


# -- named forms for (I)-(IV) ----------------------------------------------


def delta_named(pop: PopulationModel, choice: str, i: int) -> float:
    """The four displayed specializations of the expected score gap."""
    j = other(i)
    d = pop.mean_diff
    p = pop.p
    dI = float(d @ d)
    if choice == "I":
        return dI
    if choice == "II":
        ti, tj = pop.traces[i], pop.traces[j]
        return p * dI / tj + p * ti / tj - p + p * math.log(tj / ti)
    if choice == "III":
        si, sj = pop.diagonals[i], pop.diagonals[j]
        return float(np.sum(d * d / sj + si / sj - 1.0 + np.log(sj / si)))
    if choice == "IV":
        Lj = pop.factors[j]
        z = linalg.solve_triangular(Lj, d, lower=True)
        tr = float(np.trace(linalg.cho_solve((Lj, True), pop.sigma[i])))
        return float(z @ z) + tr - p + pop.logdets[j] - pop.logdets[i]
    raise ValueError(f"unknown choice {choice!r}")


def delta_small_named(pop: PopulationModel, choice: str, n: Sequence[int], i: int) -> float:
    j = other(i)
    d = pop.mean_diff
    Si, Sj = pop.sigma[i], pop.sigma[j]
    if choice == "I":
        return 2.0 * math.sqrt(np.sum(Si * Si) / n[i] + np.sum(Si * Sj) / n[j] + d @ Si @ d)
    if choice == "II":
        p = pop.p
        ti, tj = pop.traces[i], pop.traces[j]
        dI = delta_small_named(pop, "I", n, i)
        inner = dI * dI / 4.0 + np.sum(Si * Si) / n[i] * (tj * tj / (ti * ti) - 1.0)
        return 2.0 * p / tj * math.sqrt(inner)
    if choice == "III":
        ai, aj = 1.0 / pop.diagonals[i], 1.0 / pop.diagonals[j]
        Bi = Si * ai[None, :]  # Sigma_i D_i^{-1}
        t1 = np.sum(Bi * Bi.T)
        t2 = np.sum((Si * aj[None, :]) * (Sj * aj[None, :]).T)
        v = aj * d
        return 2.0 * math.sqrt(t1 / n[i] + t2 / n[j] + v @ Si @ v)
    if choice == "IV":
        Lj = pop.factors[j]
        tr = float(np.trace(linalg.cho_solve((Lj, True), Si)))
        v = linalg.cho_solve((Lj, True), d)
        return 2.0 * math.sqrt(pop.p / n[i] + tr / n[j] + v @ Si @ v)
    raise ValueError(f"unknown choice {choice!r}")


@dataclass(frozen=True)
class TheoryQuantities:
    choice: str
    delta: tuple[float, float]
    delta_A: tuple[float, float]
    delta_small: tuple[float, float]
    asymptotic_error: tuple[float, float]
    mahalanobis: float | None
    bayes_error: tuple[float, float] | None


def theory_quantities(pop: PopulationModel, choice: str, n: Sequence[int]) -> TheoryQuantities:
    specs = population_specs(pop, choice)
    D, ds = score_gap_moments(pop, specs, n)
    DA = tuple(delta_iA(pop, specs, i) for i in (0, 1))
    err = tuple(asymptotic_error(D[i], ds[i]) for i in (0, 1))
    md = None
    bayes = None
    if covariances_equal(pop):
        md = mahalanobis(pop)
        b = bayes_error_equal_cov(pop)
        bayes = (b, b)
    elif np.any(pop.mean_diff != 0):
        bayes = tuple(bayes_error_unequal_cov_gaussian(pop, i) for i in (0, 1))
    return TheoryQuantities(choice, D, DA, ds, err, md, bayes)


# -- Bayes error rates -----------------------------------------------------


def covariances_equal(pop: PopulationModel, atol: float = 1e-10) -> bool:
    return bool(np.allclose(pop.sigma[0], pop.sigma[1], rtol=0.0, atol=atol))


def mahalanobis(pop: PopulationModel) -> float:
    z = linalg.solve_triangular(pop.factors[0], pop.mean_diff, lower=True)
    return float(z @ z)


def bayes_error_equal_cov(pop: PopulationModel) -> float:
    if not covariances_equal(pop):
        raise PreconditionError("Bayes error Phi(-sqrt(D_MD)/2) requires equal covariances")
    return normal_cdf(-math.sqrt(mahalanobis(pop)) / 2.0)


def bayes_error_unequal_cov_gaussian(pop: PopulationModel, i: int) -> float:
    specs = population_specs(pop, "IV")
    dA = delta_iA(pop, specs, i)
    if not dA > 0:
        raise UndefinedRatioError("mean difference is zero; the Bayes-rate ratio is undefined")
    return normal_cdf(-delta_i(pop, specs, i) / (2.0 * math.sqrt(dA)))


def sphericity(sigma) -> float:
    """tr(S^2) / tr(S)^2; equals 1/p for a multiple of the identity."""
    S = np.asarray(sigma, dtype=float)
    t = np.trace(S)
    return float(np.sum(S * S.T) / (t * t))


def score_gap_linear_statistic(x0, xbar_i, xbar_j, pop: PopulationModel, specs, i: int):
    """The linear statistic whose variance is delta_small(...)**2.

    ``2 (x0 - mu_i)^T {A_i (xbar_i - mu_i) - A_j (xbar_j - mu_i)}``; vectorized
    over leading axes of the three sample arrays.
    """
    j = other(i)
    u = np.asarray(x0) - pop.mu[i]
    a = np.asarray(xbar_i) - pop.mu[i]
    b = np.asarray(xbar_j) - pop.mu[i]
    v = specs[i].apply(a.reshape(-1, pop.p).T).T - specs[j].apply(b.reshape(-1, pop.p).T).T
    return 2.0 * np.einsum("...j,...j->...", u, v.reshape(u.shape))
