"""Compiled inner loops for the expanded statistic.

Each block sum is accumulated exactly (Shewchuk partials, as in
``math.fsum``) and rounded once, so results do not depend on summation
order. Inputs are whitened matrices (C^T A C); see ``NcwParams.whiten``.
"""

import math

import numpy as np
from numba import njit

_MAX_PARTIALS = 96


@njit(cache=True)
def _acc_add(partials, count, x):
    i = 0
    for j in range(count):
        y = partials[j]
        if abs(x) < abs(y):
            t = x
            x = y
            y = t
        hi = x + y
        lo = y - (hi - x)
        if lo != 0.0:
            partials[i] = lo
            i += 1
        x = hi
    partials[i] = x
    return i + 1


@njit(cache=True)
def _acc_round(partials, count):
    # correctly rounded value of the partials, CPython fsum semantics
    if count == 0:
        return 0.0
    n = count - 1
    hi = partials[n]
    lo = 0.0
    while n > 0:
        x = hi
        n -= 1
        y = partials[n]
        hi = x + y
        yr = hi - x
        lo = y - yr
        if lo != 0.0:
            break
    if n > 0 and ((lo < 0.0 and partials[n - 1] < 0.0) or (lo > 0.0 and partials[n - 1] > 0.0)):
        y = lo * 2.0
        x = hi + y
        yr = x - hi
        if y == yr:
            hi = x
    return hi


@njit(cache=True, inline="always")
def _transform_2(a, i, b, j, omega_root, tr_omega, nu):
    m00 = 1.0 + 2.0 * (a[i, 0, 0] + b[j, 0, 0])
    m10 = 2.0 * (a[i, 1, 0] + b[j, 1, 0])
    m11 = 1.0 + 2.0 * (a[i, 1, 1] + b[j, 1, 1])
    if not m00 > 1e-300:
        return -1.0
    l00 = math.sqrt(m00)
    l10 = m10 / l00
    s = m11 - l10 * l10
    if not s > 1e-300:
        return -1.0
    l11 = math.sqrt(s)
    q = 0.0
    for c in range(2):
        t0 = omega_root[0, c] / l00
        t1 = (omega_root[1, c] - l10 * t0) / l11
        q += t0 * t0
        q += t1 * t1
    return math.exp(-(tr_omega - q) - nu * math.log(l00 * l11))


@njit(cache=True, inline="always")
def _transform_d(a, i, b, j, omega_root, tr_omega, nu, work, rhs):
    d = a.shape[1]
    for r in range(d):
        for c in range(r + 1):
            v = 2.0 * (a[i, r, c] + b[j, r, c])
            if r == c:
                v += 1.0
            work[r, c] = v
    diag_prod = 1.0
    for col in range(d):
        s = work[col, col]
        for k in range(col):
            s -= work[col, k] * work[col, k]
        if not s > 1e-300:
            return -1.0
        ljj = math.sqrt(s)
        work[col, col] = ljj
        diag_prod *= ljj
        for r in range(col + 1, d):
            t = work[r, col]
            for k in range(col):
                t -= work[r, k] * work[col, k]
            work[r, col] = t / ljj
    # tr(M^{-1} Omega) = ||L^{-1} R||_F^2
    q = 0.0
    for col in range(d):
        for r in range(d):
            t = omega_root[r, col]
            for k in range(r):
                t -= work[r, k] * rhs[k]
            t /= work[r, r]
            rhs[r] = t
            q += t * t
    return math.exp(-(tr_omega - q) - nu * math.log(diag_prod))


@njit(cache=True, inline="always")
def _transform(a, i, b, j, omega_root, tr_omega, nu, work, rhs):
    """Weight transform at a[i] + b[j]; -1.0 flags a pivot failure."""
    if a.shape[1] == 2:
        return _transform_2(a, i, b, j, omega_root, tr_omega, nu)
    return _transform_d(a, i, b, j, omega_root, tr_omega, nu, work, rhs)


@njit(cache=True)
def same_block_sum(a, omega_root, tr_omega, nu):
    """Sum over all ordered pairs (i, j) of L(A_i + A_j); NaN on failure."""
    n = a.shape[0]
    d = a.shape[1]
    work = np.empty((d, d))
    rhs = np.empty(d)
    partials = np.empty(_MAX_PARTIALS)
    count = 0
    for i in range(n):
        v = _transform(a, i, a, i, omega_root, tr_omega, nu, work, rhs)
        if v < 0.0:
            return np.nan
        count = _acc_add(partials, count, v)
        for j in range(i + 1, n):
            v = _transform(a, i, a, j, omega_root, tr_omega, nu, work, rhs)
            if v < 0.0:
                return np.nan
            count = _acc_add(partials, count, 2.0 * v)
    return _acc_round(partials, count)


@njit(cache=True)
def cross_block_sum(a, b, omega_root, tr_omega, nu):
    """Sum over i, k of L(A_i + B_k); NaN on failure."""
    d = a.shape[1]
    work = np.empty((d, d))
    rhs = np.empty(d)
    partials = np.empty(_MAX_PARTIALS)
    count = 0
    for i in range(a.shape[0]):
        for k in range(b.shape[0]):
            v = _transform(a, i, b, k, omega_root, tr_omega, nu, work, rhs)
            if v < 0.0:
                return np.nan
            count = _acc_add(partials, count, v)
    return _acc_round(partials, count)


@njit(cache=True)
def transform_many(a, omega_root, tr_omega, nu):
    """Weight transform at each a[i] (no pairing); used by tests and oracles."""
    n = a.shape[0]
    d = a.shape[1]
    zero = np.zeros((1, d, d))
    work = np.empty((d, d))
    rhs = np.empty(d)
    out = np.empty(n)
    for i in range(n):
        out[i] = _transform(a, i, zero, 0, omega_root, tr_omega, nu, work, rhs)
    return out


@njit(cache=True)
def exact_sum(values):
    partials = np.empty(_MAX_PARTIALS)
    count = 0
    for v in values:
        count = _acc_add(partials, count, v)
    return _acc_round(partials, count)
