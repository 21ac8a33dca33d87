"""Laplace transforms: the noncentral Wishart weight and empirical transforms.

The weight used by the statistic is

    L(S) = exp(-tr(2 S (I + 2 Sigma S)^{-1} omega)) / det(I + 2 Sigma S)^(nu / 2)

with ``nu`` the shape (degrees of freedom) of the noncentral Wishart measure.
In terms of Gaussian vectors y_i ~ N(m_i, Sigma), i = 1..nu, this is the
transform of sum y_i y_i^T when sum m_i m_i^T = 2 omega.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DataError, DimensionMismatch, EmptySample
from .sample import MatrixSample
from .spd import (
    SpdMatrix,
    cholesky,
    forward_substitute,
    logdet,
    solve_spd,
    trace_product,
    validate_spd,
)


@dataclass(frozen=True, eq=False)
class NcwParams:
    """Parameters of the noncentral Wishart weight measure."""

    nu: float
    sigma: SpdMatrix
    omega: SpdMatrix

    def __post_init__(self):
        if not (self.nu > 0 and math.isfinite(self.nu)):
            raise DataError(f"nu must be positive, got {self.nu}")
        if self.sigma.definiteness != "strict":
            raise DataError("sigma must be strictly positive definite")
        if self.sigma.dim != self.omega.dim:
            raise DimensionMismatch(f"sigma is {self.sigma.dim}x{self.sigma.dim}, omega is {self.omega.dim}x{self.omega.dim}")

    @classmethod
    def create(cls, nu: float, sigma: ArrayLike, omega: ArrayLike) -> "NcwParams":
        return cls(float(nu), validate_spd(sigma, "strict"), validate_spd(omega, "psd"))

    @classmethod
    def isotropic(cls, d: int, nu: float, sigma_scale: float = 1.0, omega_scale: float = 1.0) -> "NcwParams":
        """``Sigma = sigma_scale * I_d``, ``omega = omega_scale * I_d``."""
        return cls.create(nu, sigma_scale * np.eye(d), omega_scale * np.eye(d))

    @property
    def dim(self) -> int:
        return self.sigma.dim

    @cached_property
    def sigma_chol(self) -> NDArray[np.float64]:
        return cholesky(self.sigma).lower

    @cached_property
    def sigma_is_identity(self) -> bool:
        return bool(np.array_equal(self.sigma.entries, np.eye(self.dim)))

    @cached_property
    def whitened_omega(self) -> NDArray[np.float64]:
        """C^{-1} omega C^{-T} where Sigma = C C^T."""
        c = self.sigma_chol
        half = forward_substitute(c, self.omega.entries)
        w = forward_substitute(c, half.T)
        return 0.5 * (w + w.T)

    @cached_property
    def whitened_omega_root(self) -> NDArray[np.float64]:
        """R with R R^T = whitened omega (eigenvalues clipped at zero)."""
        vals, vecs = np.linalg.eigh(self.whitened_omega)
        return np.ascontiguousarray(vecs * np.sqrt(np.clip(vals, 0.0, None)))

    def whiten(self, mats: NDArray[np.float64]) -> NDArray[np.float64]:
        """Map each matrix A to C^T A C; a no-op copy when Sigma = I."""
        if self.sigma_is_identity:
            return np.ascontiguousarray(mats, dtype=np.float64)
        c = self.sigma_chol
        return np.ascontiguousarray(np.einsum("ji,njk,kl->nil", c, mats, c))

    def describe(self) -> dict:
        return {
            "nu": self.nu,
            "sigma": self.sigma.entries.tolist(),
            "omega": self.omega.entries.tolist(),
        }

    def label(self) -> str:
        d = self.dim

        def short(m: SpdMatrix) -> str:
            e = m.entries
            if np.array_equal(e, e[0, 0] * np.eye(d)):
                s = e[0, 0]
                return f"I{d}" if s == 1 else f"{s:g}I{d}"
            return "custom"

        return f"nu={self.nu:g},Sigma={short(self.sigma)},omega={short(self.omega)}"


def _entries(m: SpdMatrix | ArrayLike) -> NDArray[np.float64]:
    a = m.entries if isinstance(m, SpdMatrix) else np.asarray(m, dtype=np.float64)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    return a


def ncw_laplace(s: SpdMatrix | ArrayLike, p: NcwParams) -> float:
    """Evaluate the weight transform at a single PSD matrix ``s``.

    Uses the congruence M = I + 2 C^T S C (Sigma = C C^T), which shares the
    determinant of I + 2 Sigma S and is symmetric positive definite.
    """
    a = _entries(s)
    if a.shape != (p.dim, p.dim):
        raise DimensionMismatch(f"argument is {a.shape}, parameters are {p.dim}x{p.dim}")
    c = p.sigma_chol
    m = np.eye(p.dim) + 2.0 * (c.T @ a @ c)
    m = 0.5 * (m + m.T)
    ld = logdet(m)
    c_inv_omega = forward_substitute(c, p.omega.entries)
    expo = 2.0 * trace_product(a @ c, solve_spd(m, c_inv_omega))
    return math.exp(-expo - 0.5 * p.nu * ld)


def empirical_laplace(sample: MatrixSample, t: SpdMatrix | ArrayLike) -> float:
    """Average of exp(-tr(T X_k)) over the sample."""
    if len(sample) == 0:
        raise EmptySample("empirical transform of an empty sample")
    tt = _entries(t)
    if tt.shape != (sample.dim, sample.dim):
        raise DimensionMismatch(f"T is {tt.shape}, sample matrices are {sample.dim}x{sample.dim}")
    return math.fsum(math.exp(-trace_product(tt, x)) for x in sample.data) / len(sample)


def empirical_laplace_batch(data: NDArray[np.float64], ts: NDArray[np.float64]) -> NDArray[np.float64]:
    """Empirical transform of ``data`` (n, d, d) at each of ``ts`` (m, d, d)."""
    traces = np.einsum("mij,nji->mn", ts, data)
    return np.exp(-traces).mean(axis=1)
