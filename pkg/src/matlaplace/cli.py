"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data or config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .errors import ConfigError, DataError, NumericalError, ReplicationError
from .experiments import (
    emit,
    load_config,
    resolve_matrix,
    run_df_sweep,
    run_percentile_table,
    run_power_table,
    two_sample_test,
)
from .ingest import (
    group_covariances,
    read_grouped_csv,
    read_sample_csv,
    read_series_csv,
    return_covariances,
    write_sample_csv,
)
from .laplace import NcwParams

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _csv_list(text: str) -> list[str]:
    items = [t.strip() for t in text.split(",") if t.strip()]
    if not items:
        raise argparse.ArgumentTypeError("expected a comma-separated list")
    return items


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {v}")
    return v


def _add_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="output file (default: config output_path, else stdout)")
    p.add_argument("--format", choices=("csv", "json"), help="output format (default: config output_format)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="matlaplace", description="Two-sample tests for samples of SPD matrices.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("test", help="test whether two matrix samples share a distribution")
    t.add_argument("--x", required=True, type=Path, help="first sample file (dim,<d> header, one matrix per line)")
    t.add_argument("--y", required=True, type=Path, help="second sample file")
    t.add_argument("--nu", type=float, default=1.0, help="shape of the weight measure (default 1)")
    t.add_argument("--sigma", default="identity", help="identity, identity*<s>, or a matrix CSV path")
    t.add_argument("--omega", default="identity", help="identity, identity*<s>, or a matrix CSV path")
    t.add_argument("--boot", type=_positive_int, default=10_000, help="bootstrap resamples (default 10000)")
    t.add_argument("--seed", type=int, required=True, help="random seed")
    t.add_argument("--out", type=Path, help="write the result table here")
    t.add_argument("--format", choices=("csv", "json"), default="csv", help="result table format (default csv)")

    for name, help_text in (
        ("power", "rejection-rate tables from a power_table config"),
        ("sweep", "rejection rate against t degrees of freedom from a df_sweep config"),
        ("percentiles", "null percentiles of the scaled statistic from a percentile_table config"),
    ):
        e = sub.add_parser(name, help=help_text)
        e.add_argument("--config", required=True, type=Path, help="YAML experiment config")
        e.add_argument("--seed", type=int, help="override the config seed")
        e.add_argument("--reps", type=_positive_int, help="override n_reps")
        e.add_argument("--threads", type=_positive_int, help="worker processes (default: config workers)")
        _add_output(e)

    r = sub.add_parser("ingest-returns", help="hourly-style covariance matrices from a price series CSV")
    r.add_argument("--input", required=True, type=Path, help="CSV: timestamp column, then price columns")
    r.add_argument("--window", type=_positive_int, default=60, help="price rows per covariance; returns are taken inside each window (default 60)")
    r.add_argument("--columns", type=_csv_list, help="comma-separated price columns (default: all)")
    r.add_argument("--ddof", type=int, default=1, help="covariance divisor is returns per window minus ddof (default 1)")
    r.add_argument("--out", required=True, type=Path, help="output sample file")

    g = sub.add_parser("ingest-groups", help="per-group covariance matrices split into two samples")
    g.add_argument("--input", required=True, type=Path, help="CSV with a group column and feature columns")
    g.add_argument("--group-col", required=True, help="name of the group column")
    g.add_argument("--features", required=True, type=_csv_list, help="comma-separated feature columns")
    g.add_argument("--first", required=True, type=_csv_list, help="comma-separated group labels for the first sample")
    g.add_argument("--ddof", type=int, default=1, help="covariance divisor is count - ddof (default 1)")
    g.add_argument("--out-x", required=True, type=Path, help="output file for the first sample")
    g.add_argument("--out-y", required=True, type=Path, help="output file for the second sample")
    return parser


def _write_or_print(text: str, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _cmd_test(a) -> int:
    x, y = read_sample_csv(a.x), read_sample_csv(a.y)
    d = x.dim
    p = NcwParams.create(a.nu, resolve_matrix(a.sigma, d), resolve_matrix(a.omega, d))
    res = two_sample_test(x, y, [p], a.boot, a.seed)
    r = res.results[0]
    print(f"statistic={r.statistic.raw!r} scaled={r.statistic.scaled!r} p={r.p_value!r}")
    if a.out is not None:
        _write_or_print(emit([res.to_table()], a.format), a.out)
    return EXIT_OK


_RUNNERS = {
    "power": ("power_table", lambda cfg: run_power_table(cfg)),
    "sweep": ("df_sweep", lambda cfg: [run_df_sweep(cfg)]),
    "percentiles": ("percentile_table", lambda cfg: [run_percentile_table(cfg)]),
}


def _cmd_experiment(a) -> int:
    kind, runner = _RUNNERS[a.command]
    cfg = load_config(a.config).with_overrides(
        seed=a.seed, n_reps=a.reps, workers=a.threads, output_format=a.format
    )
    if cfg.kind != kind:
        raise ConfigError(f"kind: '{a.command}' needs {kind}, the config has {cfg.kind}")
    tables = runner(cfg)
    for t in tables:
        print(f"{t.title}: {t.wall_seconds:.1f}s", file=sys.stderr)
    out = a.out if a.out is not None else (cfg.resolve_path(cfg.output_path) if cfg.output_path else None)
    _write_or_print(emit(tables, cfg.output_format), out)
    return EXIT_OK


def _cmd_ingest_returns(a) -> int:
    series = read_series_csv(a.input, a.columns)
    sample = return_covariances(series, a.window, a.ddof)
    write_sample_csv(sample, a.out)
    print(f"wrote {len(sample)} matrices of dim {sample.dim} to {a.out}")
    return EXIT_OK


def _cmd_ingest_groups(a) -> int:
    records = read_grouped_csv(a.input, a.group_col, a.features)
    first = set(a.first)
    unknown = first - set(records.group_order())
    if unknown:
        raise DataError(f"--first names unknown group(s): {sorted(unknown)}")
    x, y = group_covariances(records, lambda label: label in first, a.ddof)
    write_sample_csv(x, a.out_x)
    write_sample_csv(y, a.out_y)
    print(f"wrote {len(x)} and {len(y)} matrices of dim {x.dim}")
    return EXIT_OK


_COMMANDS = {
    "test": _cmd_test,
    "power": _cmd_experiment,
    "sweep": _cmd_experiment,
    "percentiles": _cmd_experiment,
    "ingest-returns": _cmd_ingest_returns,
    "ingest-groups": _cmd_ingest_groups,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return _COMMANDS[a.command](a)
    except ReplicationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL if isinstance(exc.cause, NumericalError) else EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
