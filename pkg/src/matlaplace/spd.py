"""Small dense linear algebra for symmetric positive (semi)definite matrices.

Dimensions here are tiny (2 or 3 in practice), so the factorizations are
written out directly. They need pivot-tolerance semantics that
``numpy.linalg.cholesky`` does not expose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import (
    DataError,
    DimensionMismatch,
    NotPositiveDefinite,
    NotPsd,
    NotSymmetric,
    PivotFailure,
)

Mode = Literal["strict", "psd"]


@dataclass(frozen=True)
class ToleranceSet:
    sym_tol: float = 1e-8
    pivot_tol: float = 1e-12
    psd_tol: float = 1e-8
    recon_tol: float = 1e-10
    solve_tol: float = 1e-10


DEFAULT_TOL = ToleranceSet()


def _frozen(a: NDArray[np.float64]) -> NDArray[np.float64]:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SpdMatrix:
    """A validated symmetric matrix, flagged strict-PD or PSD.

    Build instances with :func:`validate_spd`; the constructor trusts its input.
    """

    entries: NDArray[np.float64]
    definiteness: Mode = "strict"

    def __post_init__(self):
        object.__setattr__(self, "entries", _frozen(self.entries))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, SpdMatrix):
            return NotImplemented
        return np.array_equal(self.entries, other.entries)

    def __repr__(self):
        return f"SpdMatrix({self.entries.tolist()!r}, {self.definiteness!r})"


@dataclass(frozen=True, eq=False)
class CholeskyFactor:
    lower: NDArray[np.float64]

    def __post_init__(self):
        object.__setattr__(self, "lower", _frozen(self.lower))

    @property
    def dim(self) -> int:
        return self.lower.shape[0]


def _as_square(m: ArrayLike) -> NDArray[np.float64]:
    a = np.asarray(m, dtype=np.float64)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DataError("matrix has non-finite entries")
    return a


def _cholesky_lower(a: NDArray[np.float64], pivot_floor: float) -> NDArray[np.float64] | None:
    """Plain Cholesky-Banachiewicz; returns None on a pivot <= pivot_floor."""
    d = a.shape[0]
    low = np.zeros_like(a)
    for j in range(d):
        s = a[j, j] - np.dot(low[j, :j], low[j, :j])
        if not s > pivot_floor:
            return None
        ljj = math.sqrt(s)
        low[j, j] = ljj
        for i in range(j + 1, d):
            low[i, j] = (a[i, j] - np.dot(low[i, :j], low[j, :j])) / ljj
    return low


def validate_spd(m: ArrayLike, mode: Mode = "strict", tol: ToleranceSet = DEFAULT_TOL) -> SpdMatrix:
    """Check symmetry and definiteness; return the symmetrized matrix."""
    a = _as_square(m)
    scale = max(1.0, float(np.max(np.abs(a))) if a.size else 0.0)
    if np.max(np.abs(a - a.T)) > tol.sym_tol * scale:
        raise NotSymmetric(f"asymmetry {np.max(np.abs(a - a.T)):.3g} exceeds tolerance")
    a = 0.5 * (a + a.T)
    max_diag = float(np.max(np.diag(a)))
    if mode == "strict":
        if max_diag <= 0 or _cholesky_lower(a, tol.pivot_tol * max_diag) is None:
            raise NotPositiveDefinite("Cholesky pivot failure; matrix is not positive definite")
        return SpdMatrix(a, "strict")
    if mode != "psd":
        raise ValueError(f"unknown mode {mode!r}")
    if np.min(np.diag(a)) < 0:
        raise NotPsd("negative diagonal entry")
    if max_diag == 0.0:
        # PSD with zero diagonal forces the zero matrix
        if np.any(a != 0.0):
            raise NotPsd("zero diagonal with nonzero off-diagonal entries")
        return SpdMatrix(a, "psd")
    shift = tol.psd_tol * max_diag
    if _cholesky_lower(a + 2.0 * shift * np.eye(a.shape[0]), 0.0) is None:
        raise NotPsd("shifted Cholesky probe failed; matrix has a negative eigenvalue")
    return SpdMatrix(a, "psd")


def _raw(m: SpdMatrix | ArrayLike) -> NDArray[np.float64]:
    return m.entries if isinstance(m, SpdMatrix) else np.asarray(m, dtype=np.float64)


def cholesky(m: SpdMatrix | ArrayLike, tol: ToleranceSet = DEFAULT_TOL) -> CholeskyFactor:
    a = _raw(m)
    a = 0.5 * (a + a.T)
    max_diag = float(np.max(np.diag(a)))
    low = _cholesky_lower(a, tol.pivot_tol * max_diag) if max_diag > 0 else None
    if low is None:
        raise PivotFailure("matrix is numerically not positive definite")
    return CholeskyFactor(low)


def logdet(m: SpdMatrix | ArrayLike, tol: ToleranceSet = DEFAULT_TOL) -> float:
    low = cholesky(m, tol).lower
    return 2.0 * float(np.sum(np.log(np.diag(low))))


def forward_substitute(low: NDArray[np.float64], b: NDArray[np.float64]) -> NDArray[np.float64]:
    """Solve ``low @ x = b`` for lower-triangular ``low``; ``b`` is d x k."""
    d = low.shape[0]
    x = np.empty_like(b, dtype=np.float64)
    for i in range(d):
        x[i] = (b[i] - low[i, :i] @ x[:i]) / low[i, i]
    return x


def back_substitute(up: NDArray[np.float64], b: NDArray[np.float64]) -> NDArray[np.float64]:
    d = up.shape[0]
    x = np.empty_like(b, dtype=np.float64)
    for i in range(d - 1, -1, -1):
        x[i] = (b[i] - up[i, i + 1 :] @ x[i + 1 :]) / up[i, i]
    return x


def solve_spd(m: SpdMatrix | ArrayLike, b: ArrayLike, tol: ToleranceSet = DEFAULT_TOL) -> NDArray[np.float64]:
    """Solve ``m @ x = b`` through the Cholesky factor of ``m``."""
    low = cholesky(m, tol).lower
    rhs = np.asarray(b, dtype=np.float64)
    vector = rhs.ndim == 1
    if vector:
        rhs = rhs[:, None]
    if rhs.shape[0] != low.shape[0]:
        raise DimensionMismatch(f"right-hand side has {rhs.shape[0]} rows, matrix is {low.shape[0]}x{low.shape[0]}")
    x = back_substitute(low.T, forward_substitute(low, rhs))
    return x[:, 0] if vector else x


def trace_product(a: SpdMatrix | ArrayLike, b: SpdMatrix | ArrayLike) -> float:
    """tr(A B) without forming the product."""
    x, y = _raw(a), _raw(b)
    if x.shape != y.shape or x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise DimensionMismatch(f"shapes {x.shape} and {y.shape} are incompatible")
    return float(np.sum(x * y.T))


def identity(d: int, scale: float = 1.0) -> SpdMatrix:
    return SpdMatrix(scale * np.eye(d), "strict" if scale > 0 else "psd")
