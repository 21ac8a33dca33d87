"""Random matrix generators for the power study.

Every sampler takes a ``numpy.random.Generator`` and an optional ``size``.
Without ``size`` a single ``(d, d)`` (or ``(d,)``) array is returned,
otherwise a stacked batch. Draws are symmetric by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DataError, DimensionMismatch, InvalidShape
from .sample import MatrixSample
from .spd import cholesky, forward_substitute, validate_spd

Kind = Literal["wishart", "wishart_rate", "scaled_std_wishart", "inv_wishart", "cmu", "cmt", "ncw"]
KINDS: tuple[str, ...] = ("wishart", "wishart_rate", "scaled_std_wishart", "inv_wishart", "cmu", "cmt", "ncw")

K2 = np.array([[math.cos(0.7), math.sin(0.7)], [math.sin(0.7), math.cos(0.7)]])
K3 = np.array([[1.0, -1.0, 0.95], [-1.0, 5.0, 0.01], [0.95, 0.01, 7.0]])


@dataclass(frozen=True)
class RngStream:
    """A reproducible stream keyed by ``(seed, stream_id)``.

    Streams with different ids come from ``SeedSequence`` spawn keys, so they
    are independent PCG64 generators.
    """

    seed: int
    stream_id: tuple[int, ...] = ()

    def __post_init__(self):
        sid = self.stream_id if isinstance(self.stream_id, tuple) else (self.stream_id,)
        object.__setattr__(self, "stream_id", tuple(int(s) for s in sid))

    def child(self, *ids: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id + tuple(ids))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed), spawn_key=self.stream_id)
        return np.random.Generator(np.random.PCG64(ss))


def make_rng(seed: int, *stream_id: int) -> np.random.Generator:
    return RngStream(seed, tuple(stream_id)).generator()


def _sym(a: NDArray[np.float64]) -> NDArray[np.float64]:
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def _matrix(m: ArrayLike, d: Optional[int] = None) -> NDArray[np.float64]:
    a = np.asarray(m, dtype=np.float64)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if d is not None and a.shape != (d, d):
        raise DimensionMismatch(f"expected a {d}x{d} matrix, got {a.shape}")
    return a


def _batch_shape(size: Optional[int]) -> tuple[int, ...]:
    return () if size is None else (int(size),)


def sample_mvn(mean: ArrayLike, sigma: ArrayLike, rng: np.random.Generator, size: Optional[int] = None) -> NDArray[np.float64]:
    mu = np.atleast_1d(np.asarray(mean, dtype=np.float64))
    cov = _matrix(sigma, mu.shape[0])
    low = cholesky(cov).lower
    z = rng.standard_normal(_batch_shape(size) + (mu.shape[0],))
    return mu + z @ low.T


def _bartlett(df: float, d: int, rng: np.random.Generator, size: Optional[int]) -> NDArray[np.float64]:
    """Standard Wishart(df, I_d) via the Bartlett factor A: W = A A^T."""
    shape = _batch_shape(size)
    a = np.zeros(shape + (d, d))
    for i in range(d):
        # chi-square via gamma(shape k/2, scale 2) allows fractional df
        a[..., i, i] = np.sqrt(rng.chisquare(df - i, size=shape if shape else None))
        if i:
            a[..., i, :i] = rng.standard_normal(shape + (i,))
    return a @ np.swapaxes(a, -1, -2)


def sample_std_wishart(df: float, sigma: ArrayLike, rng: np.random.Generator, size: Optional[int] = None) -> NDArray[np.float64]:
    """Classical Wishart W_d(df, Sigma) with E[X] = df * Sigma."""
    scale = _matrix(sigma)
    d = scale.shape[0]
    if not df > d - 1:
        raise InvalidShape(f"Wishart needs df > d - 1 = {d - 1}, got {df}")
    low = cholesky(scale).lower
    w = _bartlett(df, d, rng, size)
    return _sym(low @ w @ low.T)


def sample_wishart_rate(a: float, sigma: ArrayLike, rng: np.random.Generator, size: Optional[int] = None) -> NDArray[np.float64]:
    """Density proportional to det(X)^(a-(d+1)/2) exp(-tr(Sigma X)).

    Equivalent to W_d(2a, Sigma^{-1}) / 2, so E[X] = a Sigma^{-1}.
    """
    rate = _matrix(sigma)
    d = rate.shape[0]
    if not a > (d - 1) / 2:
        raise InvalidShape(f"shape a must exceed (d-1)/2 = {(d - 1) / 2}, got {a}")
    # Sigma^{-1} = C C^T with C = L^{-T}, L the Cholesky factor of Sigma
    low = cholesky(rate).lower
    c = forward_substitute(low, np.eye(d)).T
    w = _bartlett(2.0 * a, d, rng, size)
    return _sym(0.5 * (c @ w @ c.T))


def sample_inv_wishart(a: float, sigma: ArrayLike, rng: np.random.Generator, size: Optional[int] = None) -> NDArray[np.float64]:
    """Inverse Wishart: X^{-1} ~ W_d(a, Sigma^{-1}); E[X] = Sigma / (a - d - 1)."""
    scale = _matrix(sigma)
    d = scale.shape[0]
    if not a > d - 1:
        raise InvalidShape(f"inverse Wishart needs a > d - 1 = {d - 1}, got {a}")
    low = cholesky(scale).lower
    c = forward_substitute(low, np.eye(d)).T
    w = _bartlett(a, d, rng, size)
    return _sym(np.linalg.inv(c @ w @ c.T))


def sample_covariance(obs: NDArray[np.float64], ddof: int = 1) -> NDArray[np.float64]:
    """Centred sample covariance of ``obs`` shaped (..., nobs, d)."""
    nobs = obs.shape[-2]
    centred = obs - obs.mean(axis=-2, keepdims=True)
    return _sym(np.swapaxes(centred, -1, -2) @ centred / (nobs - ddof))


def sample_cov_uniform(d: int, nobs: int, rng: np.random.Generator, size: Optional[int] = None) -> NDArray[np.float64]:
    if nobs < 2:
        raise InvalidShape(f"covariance needs nobs >= 2, got {nobs}")
    u = rng.random(_batch_shape(size) + (nobs, d))
    return sample_covariance(u)


def sample_cov_t(
    df: float, sigma: ArrayLike, d: int, nobs: int, rng: np.random.Generator, size: Optional[int] = None
) -> NDArray[np.float64]:
    """Covariance of ``nobs`` multivariate-t vectors z / sqrt(u / df)."""
    if not df > 0:
        raise InvalidShape(f"t degrees of freedom must be positive, got {df}")
    if nobs < 2:
        raise InvalidShape(f"covariance needs nobs >= 2, got {nobs}")
    scale = _matrix(sigma, d)
    low = cholesky(scale).lower
    shape = _batch_shape(size) + (nobs,)
    z = rng.standard_normal(shape + (d,)) @ low.T
    u = rng.chisquare(df, size=shape)
    x = z / np.sqrt(u / df)[..., None]
    return sample_covariance(x)


def sample_ncw(
    shape: int, sigma: ArrayLike, means: ArrayLike, rng: np.random.Generator, size: Optional[int] = None
) -> NDArray[np.float64]:
    """Sum of y_i y_i^T for y_i ~ N(m_i, Sigma), i = 1..shape.

    ``means`` is (shape, d). The weight transform's omega corresponds to
    half of sum m_i m_i^T.
    """
    cov = _matrix(sigma)
    d = cov.shape[0]
    m = np.asarray(means, dtype=np.float64).reshape(-1, d) if np.size(means) else np.zeros((0, d))
    if int(shape) != shape or shape < 1:
        raise InvalidShape(f"Gaussian construction needs a positive integer shape, got {shape}")
    if m.shape != (shape, d):
        raise DimensionMismatch(f"means must be ({shape}, {d}), got {m.shape}")
    low = cholesky(cov).lower
    y = m + rng.standard_normal(_batch_shape(size) + (int(shape), d)) @ low.T
    return _sym(np.swapaxes(y, -1, -2) @ y)


def ncw_means_for(omega: ArrayLike, shape: int) -> NDArray[np.float64]:
    """Means m_1..m_shape with sum m_i m_i^T = 2 omega (needs shape >= rank)."""
    om = validate_spd(omega, "psd").entries
    d = om.shape[0]
    vals, vecs = np.linalg.eigh(2.0 * om)
    vals = np.clip(vals, 0.0, None)
    cols = [vecs[:, k] * math.sqrt(vals[k]) for k in range(d) if vals[k] > 1e-14 * max(1.0, vals.max())]
    if len(cols) > shape:
        raise DataError(f"omega has rank {len(cols)} > shape {shape}; Gaussian construction impossible")
    out = np.zeros((shape, d))
    for k, col in enumerate(cols):
        out[k] = col
    return out


@dataclass(frozen=True)
class ScenarioSpec:
    """One distribution of random SPD matrices.

    ``shape`` is the Wishart shape/df or the t degrees of freedom; ``scale`` is
    the matrix parameter (identity when omitted); ``nobs`` is the number of
    vectors behind each covariance draw (defaults to ``dim``).
    """

    name: str
    kind: str
    dim: int
    shape: float = 0.0
    scale: Optional[tuple[tuple[float, ...], ...]] = None
    nobs: Optional[int] = None
    scale_factor: float = 1.0
    means: Optional[tuple[tuple[float, ...], ...]] = field(default=None)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"unknown scenario kind {self.kind!r}; expected one of {KINDS}")
        if self.dim < 1:
            raise DataError(f"dim must be positive, got {self.dim}")
        if self.scale is not None:
            arr = np.asarray(self.scale, dtype=np.float64)
            object.__setattr__(self, "scale", tuple(tuple(float(v) for v in row) for row in arr))
            validate_spd(arr, "strict")
            if arr.shape != (self.dim, self.dim):
                raise DimensionMismatch(f"scenario {self.name}: scale is {arr.shape}, dim is {self.dim}")
        d = self.dim
        k = self.kind
        if k in ("wishart", "scaled_std_wishart") and not self.shape > d - 1:
            raise InvalidShape(f"scenario {self.name}: Wishart df must exceed {d - 1}")
        if k == "wishart_rate" and not self.shape > (d - 1) / 2:
            raise InvalidShape(f"scenario {self.name}: rate Wishart shape must exceed {(d - 1) / 2}")
        if k == "inv_wishart" and not self.shape > d - 1:
            raise InvalidShape(f"scenario {self.name}: inverse Wishart shape must exceed {d - 1}")
        if k == "cmt" and not self.shape > 0:
            raise InvalidShape(f"scenario {self.name}: t df must be positive")
        if k in ("cmu", "cmt") and self.nobs_or_default < 2:
            raise InvalidShape(f"scenario {self.name}: nobs must be at least 2")
        if k == "ncw" and (int(self.shape) != self.shape or self.shape < 1):
            raise InvalidShape(f"scenario {self.name}: ncw shape must be a positive integer")

    @property
    def nobs_or_default(self) -> int:
        return self.dim if self.nobs is None else int(self.nobs)

    @property
    def scale_matrix(self) -> NDArray[np.float64]:
        return np.eye(self.dim) if self.scale is None else np.asarray(self.scale)

    def to_dict(self) -> dict:
        out = {"name": self.name, "kind": self.kind, "dim": self.dim, "shape": self.shape}
        if self.scale is not None:
            out["scale"] = [list(r) for r in self.scale]
        if self.nobs is not None:
            out["nobs"] = self.nobs
        if self.scale_factor != 1.0:
            out["scale_factor"] = self.scale_factor
        if self.means is not None:
            out["means"] = [list(r) for r in self.means]
        return out


def sample_scenario(spec: ScenarioSpec, rng: np.random.Generator, size: Optional[int] = None) -> NDArray[np.float64]:
    k, d, sc = spec.kind, spec.dim, spec.scale_matrix
    if k in ("wishart", "scaled_std_wishart"):
        out = sample_std_wishart(spec.shape, sc, rng, size)
    elif k == "wishart_rate":
        out = sample_wishart_rate(spec.shape, sc, rng, size)
    elif k == "inv_wishart":
        out = sample_inv_wishart(spec.shape, sc, rng, size)
    elif k == "cmu":
        out = sample_cov_uniform(d, spec.nobs_or_default, rng, size)
    elif k == "cmt":
        out = sample_cov_t(spec.shape, sc, d, spec.nobs_or_default, rng, size)
    else:
        shape = int(spec.shape)
        means = np.zeros((shape, d)) if spec.means is None else np.asarray(spec.means)
        out = sample_ncw(shape, sc, means, rng, size)
    return out * spec.scale_factor if spec.scale_factor != 1.0 else out


def draw_sample(spec: ScenarioSpec, n: int, rng: np.random.Generator) -> MatrixSample:
    return MatrixSample(sample_scenario(spec, rng, size=n))


# Scenario builders named after the table labels.

def W(d: int, a: float, scale: ArrayLike | float = 1.0, name: Optional[str] = None) -> ScenarioSpec:
    sc = _scale_arg(d, scale)
    return ScenarioSpec(name or f"W{d}({a:g},{_scale_label(d, scale)})", "wishart", d, a, sc)


def IW(d: int, a: float, scale: ArrayLike | float = 1.0, name: Optional[str] = None) -> ScenarioSpec:
    sc = _scale_arg(d, scale)
    return ScenarioSpec(name or f"IW{d}({a:g},{_scale_label(d, scale)})", "inv_wishart", d, a, sc)


def CMU(d: int, nobs: Optional[int] = None, name: Optional[str] = None) -> ScenarioSpec:
    return ScenarioSpec(name or f"CMU{d}", "cmu", d, 0.0, None, nobs)


def CMT(d: int, df: float, scale: ArrayLike | float = 1.0, nobs: Optional[int] = None, name: Optional[str] = None) -> ScenarioSpec:
    sc = _scale_arg(d, scale)
    return ScenarioSpec(name or f"CMT{d}({df:g},{_scale_label(d, scale)})", "cmt", d, df, sc, nobs)


def _scale_arg(d: int, scale) -> Optional[tuple]:
    if np.isscalar(scale):
        return None if scale == 1.0 else tuple(tuple(r) for r in (float(scale) * np.eye(d)))
    return tuple(tuple(float(v) for v in r) for r in np.asarray(scale))


def _scale_label(d: int, scale) -> str:
    if np.isscalar(scale):
        return f"I{d}" if scale == 1.0 else f"{float(scale):g}I{d}"
    arr = np.asarray(scale)
    if d == 2 and np.allclose(arr, K2):
        return "K2"
    if d == 3 and np.allclose(arr, K3):
        return "K3"
    return "S"


def table_scenarios(d: int) -> list[ScenarioSpec]:
    """The eleven row/column distributions of the power tables."""
    k = K2 if d == 2 else K3
    kname = f"K{d}"
    base = W(d, 2.5 if d == 2 else 3.0)
    return [
        base,
        IW(d, 2.5 if d == 2 else 3.0),
        CMT(d, 1),
        CMU(d),
        W(d, base.shape, 2.0),
        IW(d, 4, 2.5) if d == 2 else IW(d, 5, 3.0),
        W(d, base.shape, k, name=f"W{d}({base.shape:g},{kname})"),
        CMT(d, 3, k, name=f"CMT{d}(3,{kname})"),
        CMT(d, 5, k, name=f"CMT{d}(5,{kname})"),
        CMT(d, 3),
        CMT(d, 5),
    ]


def scenario_by_name(name: str, d: int) -> ScenarioSpec:
    for s in table_scenarios(d):
        if s.name == name:
            return s
    raise DataError(f"no built-in scenario named {name!r} for d={d}")
