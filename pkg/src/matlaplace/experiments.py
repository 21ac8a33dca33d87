"""Config-driven simulation studies and their result tables.

A study is described by a YAML file that maps onto ``ExperimentConfig``.
Runners return ``ResultTable`` objects, which serialize to CSV or JSON and
parse back to equal tables.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Optional, Sequence, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, PositiveInt, PrivateAttr, ValidationError

from . import __version__
from .bootstrap import bootstrap_pvalue, critical_value, warp_speed_power
from .errors import ConfigError, DataError, MatLaplaceError, ReplicationError
from .ingest import read_matrix_file, read_sample_csv
from .laplace import NcwParams
from .sample import MatrixSample
from .samplers import KINDS, CMT, W, RngStream, ScenarioSpec, sample_scenario, scenario_by_name
from .spd import validate_spd
from .statistic import StatisticValue, raw_from_whitened

DEFAULT_DF_GRID: tuple[float, ...] = tuple(float(v) for v in range(1, 502, 20))

MatrixSpec = Union[float, str, list[list[float]]]
Unit = Literal["percent", "value"]


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ScenarioEntry(_Model):
    """Inline scenario; built-in table scenarios can be named by string instead."""

    kind: Literal[KINDS]  # type: ignore[valid-type]
    name: Optional[str] = None
    dim: Optional[PositiveInt] = None
    shape: float = 0.0
    scale: MatrixSpec = "identity"
    nobs: Optional[int] = Field(None, ge=2)
    scale_factor: float = Field(1.0, gt=0)
    means: Optional[list[list[float]]] = None


class ParamsEntry(_Model):
    nu: float = Field(gt=0)
    sigma: MatrixSpec = "identity"
    omega: MatrixSpec = "identity"


class ExperimentConfig(_Model):
    kind: Literal["power_table", "df_sweep", "percentile_table", "two_sample_test"]
    seed: int = Field(ge=0)
    dim: PositiveInt = 2
    scenarios: list[Union[str, ScenarioEntry]] = []
    null_scenario: Optional[Union[str, ScenarioEntry]] = None
    size_pairs: list[tuple[PositiveInt, PositiveInt]] = []
    params_grid: list[ParamsEntry] = []
    n_reps: PositiveInt = 2000
    alpha: float = Field(0.05, gt=0, lt=1)
    output_path: Optional[str] = None
    output_format: Literal["csv", "json"] = "csv"
    workers: PositiveInt = 1
    df_grid: list[float] = list(DEFAULT_DF_GRID)
    nobs: int = Field(500, ge=2)
    x_path: Optional[str] = None
    y_path: Optional[str] = None
    boot: PositiveInt = 10_000

    _base_dir: Optional[Path] = PrivateAttr(default=None)

    # resolution into domain objects

    def resolve_path(self, p: str | Path) -> Path:
        path = Path(p)
        if not path.is_absolute() and self._base_dir is not None:
            return self._base_dir / path
        return path

    def _scenario(self, entry: Union[str, ScenarioEntry]) -> ScenarioSpec:
        if isinstance(entry, str):
            return scenario_by_name(entry, self.dim)
        d = entry.dim or self.dim
        scale = None
        if entry.scale != "identity":
            scale = tuple(tuple(r) for r in resolve_matrix(entry.scale, d, self._base_dir).tolist())
        means = None if entry.means is None else tuple(tuple(r) for r in entry.means)
        name = entry.name or f"{entry.kind}{d}({entry.shape:g})"
        return ScenarioSpec(name, entry.kind, d, entry.shape, scale, entry.nobs, entry.scale_factor, means)

    def scenario_specs(self) -> list[ScenarioSpec]:
        return [self._scenario(e) for e in self.scenarios]

    def null_spec(self) -> ScenarioSpec:
        if self.null_scenario is not None:
            return self._scenario(self.null_scenario)
        return W(self.dim, 2.5 if self.dim == 2 else float(self.dim))

    def ncw_params(self) -> list[NcwParams]:
        d = self.dim
        return [
            NcwParams.create(e.nu, resolve_matrix(e.sigma, d, self._base_dir), resolve_matrix(e.omega, d, self._base_dir))
            for e in self.params_grid
        ]

    def with_overrides(self, **updates) -> "ExperimentConfig":
        """Copy with some fields replaced (``None`` values are ignored), revalidated."""
        data = self.model_dump()
        data.update({k: v for k, v in updates.items() if v is not None})
        return validate_config(data, self._base_dir)


def _fill_kind_defaults(data: dict) -> dict:
    kind = data.get("kind")
    out = dict(data)
    if kind == "df_sweep":
        out.setdefault("size_pairs", [[20, 20]])
        out.setdefault("params_grid", [{"nu": 1.0}])
    elif kind == "two_sample_test":
        out.setdefault("params_grid", [{"nu": 1.0}])
    return out


_REQUIRED = {
    "power_table": ("scenarios", "size_pairs", "params_grid"),
    "percentile_table": ("size_pairs", "params_grid"),
    "df_sweep": ("df_grid", "size_pairs", "params_grid"),
    "two_sample_test": ("params_grid",),
}


def _format_loc(loc: Sequence) -> str:
    return ".".join(str(p) for p in loc) or "<root>"


def validate_config(data: object, base_dir: Optional[Path] = None) -> ExperimentConfig:
    """Schema plus semantic checks; every failure names the offending field path."""
    if not isinstance(data, dict):
        raise ConfigError("<root>: config must be a mapping")
    try:
        cfg = ExperimentConfig.model_validate(_fill_kind_defaults(data))
    except ValidationError as exc:
        msgs = [f"{_format_loc(e['loc'])}: {e['msg']}" for e in exc.errors()]
        raise ConfigError("; ".join(msgs)) from None
    cfg._base_dir = base_dir
    for name in _REQUIRED[cfg.kind]:
        if not getattr(cfg, name):
            raise ConfigError(f"{name}: must be nonempty for kind {cfg.kind}")
    for k, df in enumerate(cfg.df_grid):
        if not df > 0:
            raise ConfigError(f"df_grid.{k}: degrees of freedom must be positive")
    checks = [(f"scenarios.{k}", cfg._scenario, e) for k, e in enumerate(cfg.scenarios)]
    if cfg.null_scenario is not None:
        checks.append(("null_scenario", cfg._scenario, cfg.null_scenario))
    for path, fn, arg in checks:
        try:
            spec = fn(arg)
        except DataError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        if spec.dim != cfg.dim:
            raise ConfigError(f"{path}: scenario dim {spec.dim} differs from dim {cfg.dim}")
    for k, e in enumerate(cfg.params_grid):
        for attr in ("sigma", "omega"):
            try:
                m = resolve_matrix(getattr(e, attr), cfg.dim, base_dir)
                validate_spd(m, "strict" if attr == "sigma" else "psd")
            except DataError as exc:
                raise ConfigError(f"params_grid.{k}.{attr}: {exc}") from None
        try:
            NcwParams.create(e.nu, resolve_matrix(e.sigma, cfg.dim, base_dir), resolve_matrix(e.omega, cfg.dim, base_dir))
        except DataError as exc:
            raise ConfigError(f"params_grid.{k}: {exc}") from None
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    return validate_config(data, path.parent)


_IDENTITY = re.compile(r"identity(?:\s*\*\s*(?P<s>\S+))?")


def resolve_matrix(spec: MatrixSpec, d: int, base_dir: Optional[Path] = None) -> np.ndarray:
    """``identity``, ``identity*<s>``, a scalar multiple of I, a nested list, or a CSV path."""
    if isinstance(spec, (int, float)):
        return float(spec) * np.eye(d)
    if isinstance(spec, str):
        m = _IDENTITY.fullmatch(spec.strip())
        if m:
            try:
                s = float(m.group("s")) if m.group("s") else 1.0
            except ValueError:
                raise DataError(f"bad identity multiplier in {spec!r}") from None
            return s * np.eye(d)
        path = Path(spec)
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        arr = read_matrix_file(path)
    else:
        arr = np.asarray(spec, dtype=np.float64)
    if arr.shape != (d, d):
        raise DataError(f"matrix is {arr.shape}, expected ({d}, {d})")
    return arr


# Result tables


@dataclass(frozen=True)
class ResultTable:
    """Labelled grid of cells; ``None`` marks a cell that was not computed."""

    title: str
    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]
    cells: tuple[tuple[Optional[float], ...], ...]
    unit: Unit = "percent"
    metadata: dict = field(default_factory=dict, compare=False)
    wall_seconds: Optional[float] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "row_labels", tuple(str(r) for r in self.row_labels))
        object.__setattr__(self, "col_labels", tuple(str(c) for c in self.col_labels))
        cells = tuple(tuple(None if v is None else float(v) for v in row) for row in self.cells)
        object.__setattr__(self, "cells", cells)
        if len(cells) != len(self.row_labels) or any(len(r) != len(self.col_labels) for r in cells):
            raise DataError(f"table {self.title!r}: cells must be {len(self.row_labels)} x {len(self.col_labels)}")
        if self.unit not in ("percent", "value"):
            raise DataError(f"unknown unit {self.unit!r}")
        for row in cells:
            for v in row:
                if v is None:
                    continue
                if not math.isfinite(v):
                    raise DataError(f"table {self.title!r}: non-finite cell {v}")
                if self.unit == "percent" and not 0.0 <= v <= 100.0:
                    raise DataError(f"table {self.title!r}: percentage {v} outside [0, 100]")

    def cell(self, row: str, col: str) -> Optional[float]:
        return self.cells[self.row_labels.index(row)][self.col_labels.index(col)]

    def values(self) -> list[float]:
        return [v for row in self.cells for v in row if v is not None]


def _fmt_cell(v: Optional[float], unit: str) -> str:
    if v is None:
        return ""
    if unit == "percent":
        # one decimal when that is exact, otherwise enough digits to round-trip
        short = f"{v:.1f}"
        return short if float(short) == v else repr(v)
    return repr(v)


_CORNER = re.compile(r"(?P<title>.*) \[(?P<unit>percent|value)\]")


def emit_csv(tables: Sequence[ResultTable]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for k, t in enumerate(tables):
        if k:
            buf.write("\n")
        w.writerow([f"{t.title} [{t.unit}]", *t.col_labels])
        for label, row in zip(t.row_labels, t.cells):
            w.writerow([label, *(_fmt_cell(v, t.unit) for v in row)])
    return buf.getvalue()


def parse_csv(text: str) -> list[ResultTable]:
    tables, block = [], []
    for row in [*csv.reader(io.StringIO(text)), []]:
        if row:
            block.append(row)
            continue
        if not block:
            continue
        m = _CORNER.fullmatch(block[0][0])
        if not m:
            raise DataError(f"table header {block[0][0]!r} lacks a '[unit]' suffix")
        cells = [[None if c == "" else float(c) for c in r[1:]] for r in block[1:]]
        tables.append(ResultTable(m["title"], [r[0] for r in block[1:]], block[0][1:], cells, m["unit"]))
        block = []
    return tables


def emit_json(tables: Sequence[ResultTable]) -> str:
    payload = {
        "tables": [
            {
                "title": t.title,
                "unit": t.unit,
                "row_labels": list(t.row_labels),
                "col_labels": list(t.col_labels),
                "cells": [list(r) for r in t.cells],
                "metadata": t.metadata,
            }
            for t in tables
        ]
    }
    return json.dumps(payload, indent=2, allow_nan=False) + "\n"


def parse_json(text: str) -> list[ResultTable]:
    try:
        payload = json.loads(text)
        return [
            ResultTable(t["title"], t["row_labels"], t["col_labels"], t["cells"], t["unit"], t.get("metadata", {}))
            for t in payload["tables"]
        ]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"malformed result JSON: {exc}") from None


def emit(tables: Sequence[ResultTable], fmt: str) -> str:
    return emit_json(tables) if fmt == "json" else emit_csv(tables)


def parse(text: str, fmt: str) -> list[ResultTable]:
    return parse_json(text) if fmt == "json" else parse_csv(text)


def write_tables(tables: Sequence[ResultTable], path: str | Path, fmt: str) -> None:
    Path(path).write_text(emit(tables, fmt))


def _metadata(cfg: ExperimentConfig, params: Sequence[NcwParams], **extra) -> dict:
    return {
        "seed": cfg.seed,
        "n_reps": cfg.n_reps,
        "alpha": cfg.alpha,
        "params": [p.describe() for p in params],
        "software_version": __version__,
        **extra,
    }


def _require(cfg: ExperimentConfig, kind: str) -> None:
    if cfg.kind != kind:
        raise ConfigError(f"kind: expected {kind}, got {cfg.kind}")


# Runners


def run_power_table(cfg: ExperimentConfig) -> list[ResultTable]:
    """One table of rejection percentages per (size pair, params) block.

    With equal sizes only cells on or above the diagonal are computed.
    """
    _require(cfg, "power_table")
    specs = cfg.scenario_specs()
    names = [s.name for s in specs]
    tables = []
    for s_idx, (n1, n2) in enumerate(cfg.size_pairs):
        for p_idx, p in enumerate(cfg.ncw_params()):
            start = time.perf_counter()
            cells: list[list[Optional[float]]] = [[None] * len(specs) for _ in specs]
            for i, sx in enumerate(specs):
                for j, sy in enumerate(specs):
                    if n1 == n2 and j < i:
                        continue
                    stream = RngStream(cfg.seed, (s_idx, p_idx, i, j))
                    run = warp_speed_power(sx, sy, n1, n2, p, cfg.n_reps, cfg.alpha, stream, cfg.workers)
                    cells[i][j] = 100.0 * run.rejection_rate
            tables.append(
                ResultTable(
                    f"rejection rate n1={n1} n2={n2} {p.label()}",
                    names,
                    names,
                    cells,
                    "percent",
                    _metadata(cfg, [p], n1=n1, n2=n2, scenarios=[s.to_dict() for s in specs]),
                    time.perf_counter() - start,
                )
            )
    return tables


def sweep_reference(d: int, nobs: int = 500) -> ScenarioSpec:
    """W_d(nobs, I) / (nobs - 1), the reference side of the df sweep."""
    return ScenarioSpec(f"W{d}({nobs},I{d})/{nobs - 1}", "scaled_std_wishart", d, float(nobs), scale_factor=1.0 / (nobs - 1))


def run_df_sweep(cfg: ExperimentConfig) -> ResultTable:
    """Rejection percentage against CMT_d(df, I) for each df (rows) and each
    (size pair, params) combination (columns)."""
    _require(cfg, "df_sweep")
    start = time.perf_counter()
    ref = sweep_reference(cfg.dim, cfg.nobs)
    params = cfg.ncw_params()
    cols = [(s_idx, p_idx) for s_idx in range(len(cfg.size_pairs)) for p_idx in range(len(params))]
    col_labels = [f"n1={cfg.size_pairs[s][0]},n2={cfg.size_pairs[s][1]};{params[p].label()}" for s, p in cols]
    cells = []
    for k, df in enumerate(cfg.df_grid):
        alt = CMT(cfg.dim, df, nobs=cfg.nobs)
        row = []
        for s_idx, p_idx in cols:
            n1, n2 = cfg.size_pairs[s_idx]
            stream = RngStream(cfg.seed, (k, s_idx, p_idx))
            run = warp_speed_power(ref, alt, n1, n2, params[p_idx], cfg.n_reps, cfg.alpha, stream, cfg.workers)
            row.append(100.0 * run.rejection_rate)
        cells.append(row)
    return ResultTable(
        f"df sweep d={cfg.dim} {ref.name} vs CMT{cfg.dim}(df,I{cfg.dim}) nobs={cfg.nobs}",
        [f"{df:g}" for df in cfg.df_grid],
        col_labels,
        cells,
        "percent",
        _metadata(cfg, params, df_grid=list(cfg.df_grid), nobs=cfg.nobs),
        time.perf_counter() - start,
    )


def _null_chunk(args) -> list[list[float]]:
    spec, n1, n2, params, base, indices = args
    out = []
    for j in indices:
        try:
            rng = base.child(j).generator()
            pool = np.concatenate([sample_scenario(spec, rng, size=n1), sample_scenario(spec, rng, size=n2)])
            row = []
            for p in params:
                w = p.whiten(pool)
                row.append(raw_from_whitened(w[:n1], w[n1:], p) * (n1 * n2) / (n1 + n2))
            out.append(row)
        except MatLaplaceError as exc:
            raise ReplicationError(j, exc) from exc
    return out


def null_scaled_statistics(
    spec: ScenarioSpec,
    n1: int,
    n2: int,
    params: Sequence[NcwParams],
    n_reps: int,
    stream: RngStream,
    workers: int = 1,
) -> np.ndarray:
    """(n_reps, len(params)) scaled statistics with both samples drawn from ``spec``.

    Each replication's draws are shared by all parameter columns.
    """
    params = list(params)
    if workers <= 1:
        rows = _null_chunk((spec, n1, n2, params, stream, range(n_reps)))
    else:
        bounds = np.linspace(0, n_reps, workers + 1).astype(int)
        jobs = [(spec, n1, n2, params, stream, range(a, b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = [r for chunk in pool.map(_null_chunk, jobs) for r in chunk]
    return np.asarray(rows, dtype=np.float64).reshape(n_reps, len(params))


def run_percentile_table(cfg: ExperimentConfig) -> ResultTable:
    """(1 - alpha) percentile of the scaled statistic under the null, rows by
    size pair, columns by params."""
    _require(cfg, "percentile_table")
    start = time.perf_counter()
    spec = cfg.null_spec()
    params = cfg.ncw_params()
    cells = []
    for s_idx, (n1, n2) in enumerate(cfg.size_pairs):
        stats = null_scaled_statistics(spec, n1, n2, params, cfg.n_reps, RngStream(cfg.seed, (s_idx,)), cfg.workers)
        cells.append([critical_value(stats[:, k], cfg.alpha) for k in range(len(params))])
    return ResultTable(
        f"{100 * (1 - cfg.alpha):g}th percentile of scaled statistic under {spec.name}",
        [f"n1={n1},n2={n2}" for n1, n2 in cfg.size_pairs],
        [p.label() for p in params],
        cells,
        "value",
        _metadata(cfg, params, null_scenario=spec.to_dict()),
        time.perf_counter() - start,
    )


@dataclass(frozen=True)
class ParamTest:
    params: NcwParams
    statistic: StatisticValue
    p_value: float


@dataclass(frozen=True)
class TestResult:
    """Statistic and bootstrap p-value for every parameter setting."""

    __test__ = False

    n1: int
    n2: int
    boot: int
    seed: int
    results: tuple[ParamTest, ...]

    def to_table(self, title: str = "two-sample test") -> ResultTable:
        rows = [
            [r.p_value for r in self.results],
            [r.statistic.raw for r in self.results],
            [r.statistic.scaled for r in self.results],
        ]
        meta = {
            "seed": self.seed,
            "boot": self.boot,
            "n1": self.n1,
            "n2": self.n2,
            "params": [r.params.describe() for r in self.results],
            "software_version": __version__,
        }
        return ResultTable(title, ["p_value", "statistic", "scaled"], [r.params.label() for r in self.results], rows, "value", meta)


def two_sample_test(
    x: MatrixSample, y: MatrixSample, params: Sequence[NcwParams], boot: int, seed: int
) -> TestResult:
    results = []
    for k, p in enumerate(params):
        pv = bootstrap_pvalue(x, y, p, boot, RngStream(seed, (k,)))
        results.append(ParamTest(p, StatisticValue(pv.observed, len(x), len(y), p), pv.p_value))
    return TestResult(len(x), len(y), boot, seed, tuple(results))


def run_two_sample_test(
    cfg: ExperimentConfig, x: Optional[MatrixSample] = None, y: Optional[MatrixSample] = None
) -> TestResult:
    """Samples default to the files named by ``x_path`` / ``y_path``."""
    _require(cfg, "two_sample_test")
    if x is None or y is None:
        if cfg.x_path is None or cfg.y_path is None:
            raise ConfigError("x_path/y_path: both samples are required")
        x = read_sample_csv(cfg.resolve_path(cfg.x_path)) if x is None else x
        y = read_sample_csv(cfg.resolve_path(cfg.y_path)) if y is None else y
    return two_sample_test(x, y, cfg.ncw_params(), cfg.boot, cfg.seed)


def consecutive_block_pairs(sample: MatrixSample, block: int) -> list[tuple[str, MatrixSample, MatrixSample]]:
    """Split into consecutive blocks of ``block`` matrices and pair neighbours.

    Hourly covariances of two days with ``block=24`` give one pair.
    """
    if block < 1:
        raise DataError(f"block must be positive, got {block}")
    count = len(sample) // block
    if count < 2:
        raise DataError(f"{len(sample)} matrices do not fill two blocks of {block}")
    blocks = [sample.take(range(k * block, (k + 1) * block)) for k in range(count)]
    return [(f"[{k},{k + 1}]", blocks[k], blocks[k + 1]) for k in range(count - 1)]


def run_pair_tests(
    pairs: Sequence[tuple[str, MatrixSample, MatrixSample]], params: Sequence[NcwParams], boot: int, seed: int
) -> ResultTable:
    """p-values with params as rows and window pairs as columns."""
    cells = [[0.0] * len(pairs) for _ in params]
    for j, (_, x, y) in enumerate(pairs):
        for k, p in enumerate(params):
            cells[k][j] = bootstrap_pvalue(x, y, p, boot, RngStream(seed, (j, k))).p_value
    meta = {"seed": seed, "boot": boot, "params": [p.describe() for p in params], "software_version": __version__}
    return ResultTable("window pair p-values", [p.label() for p in params], [lab for lab, _, _ in pairs], cells, "value", meta)


def run_experiment(cfg: ExperimentConfig) -> list[ResultTable]:
    if cfg.kind == "power_table":
        tables = run_power_table(cfg)
    elif cfg.kind == "df_sweep":
        tables = [run_df_sweep(cfg)]
    elif cfg.kind == "percentile_table":
        tables = [run_percentile_table(cfg)]
    else:
        tables = [run_two_sample_test(cfg).to_table()]
    for t in tables:
        if t.wall_seconds is not None:
            print(f"{t.title}: {t.wall_seconds:.1f}s", file=sys.stderr)
    return tables
