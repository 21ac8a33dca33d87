"""The two-sample statistic: integrated squared difference of empirical
Laplace transforms under the noncentral Wishart weight.

``statistic_fast`` is the production path. ``statistic_reference`` evaluates
the quadruple kernel sum literally and exists as a cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DimensionMismatch, EmptySample, PivotFailure
from .laplace import NcwParams, ncw_laplace
from .sample import MatrixSample
from .spd import SpdMatrix


@dataclass(frozen=True)
class StatisticValue:
    raw: float
    n1: int
    n2: int
    params: NcwParams

    @property
    def scaled(self) -> float:
        return scaled_statistic(self)


def scaled_statistic(v: StatisticValue) -> float:
    """n1 n2 / (n1 + n2) times the raw statistic."""
    return v.raw * (v.n1 * v.n2) / (v.n1 + v.n2)


def _check(x: MatrixSample, y: MatrixSample, p: NcwParams) -> None:
    if len(x) == 0 or len(y) == 0:
        raise EmptySample("both samples must be nonempty")
    if x.dim != p.dim or y.dim != p.dim:
        raise DimensionMismatch(f"sample dims ({x.dim}, {y.dim}) do not match parameter dim {p.dim}")


def kernel_psi(xi, xj, yk, yl, p: NcwParams) -> float:
    mats = [m.entries if isinstance(m, SpdMatrix) else np.asarray(m, dtype=np.float64) for m in (xi, xj, yk, yl)]
    if any(m.shape != (p.dim, p.dim) for m in mats):
        raise DimensionMismatch("kernel arguments must all be d x d with d matching the parameters")
    a, b, c, e = mats
    lap = lambda s: ncw_laplace(s, p)  # noqa: E731
    cross = lap(a + c) + lap(a + e) + lap(b + c) + lap(b + e)
    return lap(a + b) + lap(c + e) - 0.5 * cross


def statistic_reference(x: MatrixSample, y: MatrixSample, p: NcwParams) -> StatisticValue:
    """Literal quadruple sum of the kernel. O(n1^2 n2^2); small inputs only."""
    _check(x, y, p)
    n1, n2 = len(x), len(y)
    # transform values memoized per index pair; psi assembled from them
    lxx = [[ncw_laplace(x.data[i] + x.data[j], p) for j in range(n1)] for i in range(n1)]
    lyy = [[ncw_laplace(y.data[k] + y.data[l], p) for l in range(n2)] for k in range(n2)]
    lxy = [[ncw_laplace(x.data[i] + y.data[k], p) for k in range(n2)] for i in range(n1)]
    terms = []
    for i in range(n1):
        for j in range(n1):
            for k in range(n2):
                for l in range(n2):
                    cross = lxy[i][k] + lxy[i][l] + lxy[j][k] + lxy[j][l]
                    terms.append(lxx[i][j] + lyy[k][l] - 0.5 * cross)
    raw = math.fsum(terms) / (n1 * n1 * n2 * n2)
    return StatisticValue(raw, n1, n2, p)


def _weights(p: NcwParams) -> tuple[np.ndarray, float]:
    root = p.whitened_omega_root
    tr = 0.0
    d = root.shape[0]
    # same accumulation order as the kernel so that L(0) == 1 exactly
    for col in range(d):
        for i in range(d):
            tr += root[i, col] * root[i, col]
    return root, tr


def block_sums(xw: np.ndarray, yw: np.ndarray, p: NcwParams) -> tuple[float, float, float]:
    """Exact block sums on whitened arrays: (sum XX, sum YY, sum XY)."""
    root, tr = _weights(p)
    sxx = _kernels.same_block_sum(xw, root, tr, float(p.nu))
    syy = _kernels.same_block_sum(yw, root, tr, float(p.nu))
    sxy = _kernels.cross_block_sum(xw, yw, root, tr, float(p.nu))
    if math.isnan(sxx) or math.isnan(syy) or math.isnan(sxy):
        raise PivotFailure("I + 2 Sigma S is numerically singular for some pairwise sum")
    return sxx, syy, sxy


def combine_blocks(sxx: float, syy: float, sxy: float, n1: int, n2: int) -> float:
    raw = (sxx / (n1 * n1) + syy / (n2 * n2)) - 2.0 * sxy / (n1 * n2)
    # integral of a square; negative values are cancellation roundoff
    return max(raw, 0.0)


def raw_from_whitened(xw: np.ndarray, yw: np.ndarray, p: NcwParams) -> float:
    sxx, syy, sxy = block_sums(xw, yw, p)
    return combine_blocks(sxx, syy, sxy, xw.shape[0], yw.shape[0])


def statistic_fast(x: MatrixSample, y: MatrixSample, p: NcwParams) -> StatisticValue:
    """Expanded form: XX block + YY block - 2 * XY block, each exactly summed."""
    _check(x, y, p)
    raw = raw_from_whitened(p.whiten(x.data), p.whiten(y.data), p)
    return StatisticValue(raw, len(x), len(y), p)
