"""Warp-speed bootstrap power estimation and pooled-bootstrap p-values."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import EmptyList, EmptySample, InvalidAlpha, InvalidReps, MatLaplaceError, ReplicationError
from .laplace import NcwParams
from .sample import MatrixSample
from .samplers import RngStream, ScenarioSpec, sample_scenario
from .statistic import raw_from_whitened, statistic_fast


@dataclass(frozen=True)
class WarpSpeedRun:
    n_reps: int
    alpha: float
    observed: np.ndarray
    bootstrap: np.ndarray
    c_alpha: float
    rejection_rate: float

    @property
    def rejections(self) -> int:
        return int(np.sum(self.observed > self.c_alpha))


@dataclass(frozen=True)
class PValueResult:
    observed: float
    b_reps: int
    p_value: float
    replicates: Optional[np.ndarray] = field(default=None, repr=False)


def pooled_resample(x: MatrixSample, y: MatrixSample, rng: np.random.Generator) -> tuple[MatrixSample, MatrixSample]:
    """Draw n1 then n2 elements with replacement from the joined sample."""
    if len(x) == 0 or len(y) == 0:
        raise EmptySample("pooled resampling needs two nonempty samples")
    pool = x.concat(y)
    n1, n2 = len(x), len(y)
    idx = rng.integers(0, n1 + n2, size=n1 + n2)
    return pool.take(idx[:n1]), pool.take(idx[n1:])


def critical_value(stats: Sequence[float] | np.ndarray, alpha: float) -> float:
    """Order statistic of rank ceil((1 - alpha) N), 1-based, ascending."""
    values = np.sort(np.asarray(stats, dtype=np.float64))
    n = values.size
    if n == 0:
        raise EmptyList("critical value of an empty list")
    if not 0.0 < alpha < 1.0:
        raise InvalidAlpha(f"alpha must lie in (0, 1), got {alpha}")
    # round before ceil: (1 - 0.05) * 100 must give rank 95, not 96
    rank = max(1, math.ceil(round((1.0 - alpha) * n, 9)))
    return float(values[min(rank, n) - 1])


def _replication(
    spec_x: ScenarioSpec, spec_y: ScenarioSpec, n1: int, n2: int, p: NcwParams, stream: RngStream
) -> tuple[float, float]:
    rng = stream.generator()
    x = sample_scenario(spec_x, rng, size=n1)
    y = sample_scenario(spec_y, rng, size=n2)
    pool = p.whiten(np.concatenate([x, y]))
    observed = raw_from_whitened(pool[:n1], pool[n1:], p)
    idx = rng.integers(0, n1 + n2, size=n1 + n2)
    boot = raw_from_whitened(np.ascontiguousarray(pool[idx[:n1]]), np.ascontiguousarray(pool[idx[n1:]]), p)
    return observed, boot


def _run_chunk(args) -> list[tuple[float, float]]:
    spec_x, spec_y, n1, n2, p, base, indices = args
    out = []
    for j in indices:
        try:
            out.append(_replication(spec_x, spec_y, n1, n2, p, base.child(j)))
        except MatLaplaceError as exc:
            raise ReplicationError(j, exc) from exc
    return out


def replicate_pairs(
    spec_x: ScenarioSpec,
    spec_y: ScenarioSpec,
    n1: int,
    n2: int,
    p: NcwParams,
    n_reps: int,
    stream: RngStream,
    workers: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Observed and single-bootstrap statistics for replications 0..n_reps-1.

    Replication j always uses ``stream.child(j)``; results come back in index
    order whatever the worker count.
    """
    if n_reps < 1:
        raise InvalidReps(f"need at least one replication, got {n_reps}")
    if workers <= 1:
        pairs = _run_chunk((spec_x, spec_y, n1, n2, p, stream, range(n_reps)))
    else:
        bounds = np.linspace(0, n_reps, workers + 1).astype(int)
        jobs = [(spec_x, spec_y, n1, n2, p, stream, range(a, b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            pairs = [pair for chunk in pool.map(_run_chunk, jobs) for pair in chunk]
    arr = np.asarray(pairs, dtype=np.float64)
    return arr[:, 0], arr[:, 1]


def warp_speed_power(
    spec_x: ScenarioSpec,
    spec_y: ScenarioSpec,
    n1: int,
    n2: int,
    p: NcwParams,
    n_reps: int,
    alpha: float,
    seed: int | RngStream,
    workers: int = 1,
) -> WarpSpeedRun:
    """Estimate the rejection rate with one bootstrap replicate per replication."""
    if not 0.0 < alpha < 1.0:
        raise InvalidAlpha(f"alpha must lie in (0, 1), got {alpha}")
    stream = seed if isinstance(seed, RngStream) else RngStream(seed)
    observed, boot = replicate_pairs(spec_x, spec_y, n1, n2, p, n_reps, stream, workers)
    c_alpha = critical_value(boot, alpha)
    rate = float(np.sum(observed > c_alpha)) / n_reps
    return WarpSpeedRun(n_reps, alpha, observed, boot, c_alpha, rate)


def bootstrap_pvalue(
    x: MatrixSample,
    y: MatrixSample,
    p: NcwParams,
    b_reps: int = 10_000,
    seed: int | RngStream = 0,
    keep_replicates: bool = False,
) -> PValueResult:
    """p = (1 + #{L*_b >= L_obs}) / (B + 1) over pooled bootstrap resamples."""
    if b_reps < 1:
        raise InvalidReps(f"bootstrap needs B >= 1, got {b_reps}")
    observed = statistic_fast(x, y, p).raw
    stream = seed if isinstance(seed, RngStream) else RngStream(seed)
    rng = stream.generator()
    n1, n2 = len(x), len(y)
    pool = p.whiten(np.concatenate([x.data, y.data]))
    reps = np.empty(b_reps)
    for b in range(b_reps):
        idx = rng.integers(0, n1 + n2, size=n1 + n2)
        reps[b] = raw_from_whitened(np.ascontiguousarray(pool[idx[:n1]]), np.ascontiguousarray(pool[idx[n1:]]), p)
    count = int(np.sum(reps >= observed))
    return PValueResult(observed, b_reps, (1 + count) / (b_reps + 1), reps if keep_replicates else None)
