"""The positive definite matrix A that weights a discriminant score.

Each variant keeps A in its compact form (nothing, a scalar, a p-vector, a
Cholesky-factored dense matrix, or an index list plus sub-vector) and exposes
the handful of operations the scores and the population theory need.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import DataError, DimensionError, SingularPrecisionError
from .summaries import ClassSummary


class PrecisionSpec:
    kind: str = ""

    @property
    def dim(self) -> int:
        raise NotImplementedError

    @property
    def logdet(self) -> float:
        raise NotImplementedError

    def quad(self, D: np.ndarray) -> np.ndarray:
        """Row-wise ``d^T A d`` for ``D`` of shape ``(..., p)``."""
        raise NotImplementedError

    def apply(self, M: np.ndarray) -> np.ndarray:
        """``A @ M`` for a ``p x k`` matrix."""
        raise NotImplementedError

    def trace_with(self, summary: ClassSummary) -> float:
        """``tr(S A)`` for the summary's sample covariance ``S``."""
        raise NotImplementedError

    def trace_with_centered(self, Xc: np.ndarray) -> float:
        """``(n - 1) tr(S A)`` from the centered sample rows."""
        return float(self.quad(Xc).sum())

    def dense(self) -> np.ndarray:
        return self.apply(np.eye(self.dim))

    def to_dict(self) -> dict:
        raise NotImplementedError

    def _check_dim(self, d: np.ndarray):
        if d.shape[-1] != self.dim:
            raise DimensionError(f"expected dimension {self.dim}, got {d.shape[-1]}")


@dataclass(frozen=True)
class Identity(PrecisionSpec):
    p: int
    kind = "identity"

    @property
    def dim(self):
        return self.p

    @property
    def logdet(self):
        return 0.0

    def quad(self, D):
        D = np.asarray(D, dtype=float)
        self._check_dim(D)
        return np.einsum("...j,...j->...", D, D)

    def apply(self, M):
        return np.array(M, dtype=float)

    def trace_with(self, summary):
        return float(summary.trace)

    def to_dict(self):
        return {"kind": self.kind, "dim": self.p}


@dataclass(frozen=True)
class ScaledIdentity(PrecisionSpec):
    """``A = scale * I_p``; GQDA uses ``scale = p / tr(S)``."""

    scale: float
    p: int
    kind = "scaled_identity"

    def __post_init__(self):
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise SingularPrecisionError(f"scale must be positive, got {self.scale}")

    @property
    def dim(self):
        return self.p

    @property
    def logdet(self):
        return self.p * math.log(self.scale)

    def quad(self, D):
        D = np.asarray(D, dtype=float)
        self._check_dim(D)
        return self.scale * np.einsum("...j,...j->...", D, D)

    def apply(self, M):
        return self.scale * np.asarray(M, dtype=float)

    def trace_with(self, summary):
        return self.scale * float(summary.trace)

    def to_dict(self):
        return {"kind": self.kind, "dim": self.p, "scale": float(self.scale)}


@dataclass(frozen=True, eq=False)
class Diagonal(PrecisionSpec):
    values: np.ndarray
    kind = "diagonal"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        bad = np.flatnonzero(~(np.isfinite(v) & (v > 0)))
        if bad.size:
            raise SingularPrecisionError(f"diagonal precision must be positive; coordinate {bad[0]} is {v[bad[0]]}")
        object.__setattr__(self, "values", v)

    @property
    def dim(self):
        return self.values.shape[0]

    @property
    def logdet(self):
        return float(np.log(self.values).sum())

    def quad(self, D):
        D = np.asarray(D, dtype=float)
        self._check_dim(D)
        return np.einsum("...j,j,...j->...", D, self.values, D)

    def apply(self, M):
        return self.values[:, None] * np.asarray(M, dtype=float)

    def trace_with(self, summary):
        return float(summary.cov_diag @ self.values)

    def to_dict(self):
        return {"kind": self.kind, "values": self.values.tolist()}


@dataclass(frozen=True, eq=False)
class Full(PrecisionSpec):
    """``A = C^{-1}`` for an SPD matrix ``C``, held through its Cholesky factor.

    Nothing is ever explicitly inverted: quadratic forms are triangular solves
    and ``log|A| = -2 sum log diag(L)``.
    """

    covariance: np.ndarray
    factor: np.ndarray = field(default=None, repr=False)
    kind = "full"

    def __post_init__(self):
        C = np.asarray(self.covariance, dtype=float)
        if C.ndim != 2 or C.shape[0] != C.shape[1]:
            raise DimensionError("full precision needs a square matrix")
        if not np.all(np.isfinite(C)):
            raise SingularPrecisionError("matrix has non-finite entries")
        L = self.factor
        if L is None:
            try:
                L = linalg.cholesky(C, lower=True, check_finite=False)
            except linalg.LinAlgError:
                raise SingularPrecisionError("matrix is not positive definite") from None
            if np.any(np.diag(L) <= 0):
                raise SingularPrecisionError("matrix is not positive definite")
        object.__setattr__(self, "covariance", C)
        object.__setattr__(self, "factor", np.asarray(L, dtype=float))

    @classmethod
    def from_covariance(cls, C, factor=None) -> "Full":
        return cls(C, factor)

    @classmethod
    def from_precision(cls, P) -> "Full":
        P = np.asarray(P, dtype=float)
        try:
            cf = linalg.cho_factor(P, lower=True)
        except linalg.LinAlgError:
            raise SingularPrecisionError("precision matrix is not positive definite") from None
        C = linalg.cho_solve(cf, np.eye(P.shape[0]))
        return cls(0.5 * (C + C.T))

    @property
    def dim(self):
        return self.covariance.shape[0]

    @property
    def logdet(self):
        return float(-2.0 * np.log(np.diag(self.factor)).sum())

    def whiten(self, D):
        """``L^{-1} d`` for every row ``d`` of ``D``."""
        D = np.asarray(D, dtype=float)
        self._check_dim(D)
        flat = D.reshape(-1, self.dim)
        Z = linalg.solve_triangular(self.factor, flat.T, lower=True, check_finite=False)
        return Z.T.reshape(D.shape)

    def quad(self, D):
        Z = self.whiten(D)
        return np.einsum("...j,...j->...", Z, Z)

    def apply(self, M):
        return linalg.cho_solve((self.factor, True), np.asarray(M, dtype=float), check_finite=False)

    def trace_with(self, summary):
        if summary.cov is None:
            raise DataError("full precision needs the full sample covariance in the summary")
        return float(np.trace(self.apply(summary.cov)))

    def to_dict(self):
        return {"kind": self.kind, "dim": self.dim, "covariance": self.covariance.ravel().tolist()}


@dataclass(frozen=True, eq=False)
class FeatureRestricted(PrecisionSpec):
    """Diagonal precision supported on a subset of coordinates (FS-DQDA)."""

    indices: np.ndarray
    inner: Diagonal
    p: int
    kind = "feature_restricted"

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).ravel()
        if idx.size == 0:
            raise DataError("feature-restricted precision needs at least one coordinate")
        if np.any(np.diff(idx) <= 0):
            raise DataError("feature indices must be strictly increasing")
        if idx[0] < 0 or idx[-1] >= self.p:
            raise DimensionError("feature index out of range")
        if self.inner.dim != idx.size:
            raise DimensionError("inner diagonal length must match the index list")
        object.__setattr__(self, "indices", idx)

    @property
    def dim(self):
        return self.p

    @property
    def logdet(self):
        return self.inner.logdet

    def quad(self, D):
        D = np.asarray(D, dtype=float)
        self._check_dim(D)
        return self.inner.quad(D[..., self.indices])

    def apply(self, M):
        M = np.asarray(M, dtype=float)
        out = np.zeros_like(M)
        out[self.indices] = self.inner.values[:, None] * M[self.indices]
        return out

    def trace_with(self, summary):
        return float(summary.cov_diag[self.indices] @ self.inner.values)

    def to_dict(self):
        return {"kind": self.kind, "dim": self.p, "indices": self.indices.tolist(), "values": self.inner.values.tolist()}


def spec_from_dict(d: dict) -> PrecisionSpec:
    kind = d.get("kind")
    if kind == "identity":
        return Identity(int(d["dim"]))
    if kind == "scaled_identity":
        return ScaledIdentity(float(d["scale"]), int(d["dim"]))
    if kind == "diagonal":
        return Diagonal(np.array(d["values"], dtype=float))
    if kind == "full":
        p = int(d["dim"])
        return Full(np.array(d["covariance"], dtype=float).reshape(p, p))
    if kind == "feature_restricted":
        return FeatureRestricted(np.array(d["indices"], dtype=np.int64), Diagonal(np.array(d["values"], dtype=float)), int(d["dim"]))
    raise DataError(f"unknown precision kind {kind!r}")
