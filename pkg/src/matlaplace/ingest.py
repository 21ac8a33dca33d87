"""Turning raw observations into matrix samples, plus the sample file format.

Sample files are CSV: the first line is ``dim,<d>`` and every following line
holds one d x d matrix in row-major order.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from .errors import DataError, EmptySide, GroupTooSmall, NonPositiveValue, TooShort
from .sample import MatrixSample
from .spd import validate_spd

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SeriesTable:
    timestamps: NDArray
    columns: tuple[str, ...]
    values: NDArray[np.float64]

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2 or vals.shape[1] != len(self.columns) or vals.shape[0] != len(self.timestamps):
            raise DataError("series values must be (rows, columns) aligned with timestamps")
        ts = np.asarray(self.timestamps)
        if len(ts) > 1 and not np.all(ts[1:] > ts[:-1]):
            raise DataError("timestamps must be strictly increasing")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "columns", tuple(self.columns))

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class GroupedRecords:
    groups: NDArray
    features: tuple[str, ...]
    values: NDArray[np.float64]

    def group_order(self) -> list:
        """Group labels in order of first appearance."""
        return list(dict.fromkeys(self.groups.tolist()))


def log_returns(s: SeriesTable) -> SeriesTable:
    if len(s) < 2:
        raise TooShort("log returns need at least two rows")
    bad = np.argwhere(~(s.values > 0))
    if bad.size:
        r, c = bad[0]
        raise NonPositiveValue(f"non-positive value at row {r}, column {s.columns[c]!r}")
    rets = np.diff(np.log(s.values), axis=0)
    return SeriesTable(s.timestamps[1:], s.columns, rets)


def windowed_covariances(s: SeriesTable, window: int, ddof: int = 1) -> MatrixSample:
    """Covariance of each consecutive non-overlapping block of ``window`` rows.

    A trailing partial block is dropped.
    """
    if window < 2:
        raise TooShort(f"window must be at least 2 rows, got {window}")
    if not 0 <= ddof < window:
        raise DataError(f"ddof must lie in [0, window), got {ddof}")
    count = len(s) // window
    if count == 0:
        raise TooShort(f"{len(s)} rows cannot fill one window of {window}")
    blocks = s.values[: count * window].reshape(count, window, -1)
    centred = blocks - blocks.mean(axis=1, keepdims=True)
    covs = np.swapaxes(centred, 1, 2) @ centred / (window - ddof)
    return MatrixSample.from_matrices(covs, mode="psd")


def return_covariances(prices: SeriesTable, window: int, ddof: int = 1) -> MatrixSample:
    """Covariance of log returns inside each block of ``window`` price rows.

    Returns never straddle two blocks, so each block contributes
    ``window - 1`` returns and ``rows // window`` matrices come out.
    """
    if window < 3:
        raise TooShort(f"window must hold at least 3 prices, got {window}")
    count = len(prices) // window
    if count == 0:
        raise TooShort(f"{len(prices)} rows cannot fill one window of {window}")
    blocks = []
    for k in range(count):
        rows = slice(k * window, (k + 1) * window)
        blocks.append(log_returns(SeriesTable(prices.timestamps[rows], prices.columns, prices.values[rows])).values)
    rets = np.concatenate(blocks)
    return windowed_covariances(SeriesTable(np.arange(rets.shape[0]), prices.columns, rets), window - 1, ddof)


def group_covariances(
    g: GroupedRecords, split: Callable[[object], bool], ddof: int = 1
) -> tuple[MatrixSample, MatrixSample]:
    """Per-group covariance; groups with ``split(label)`` true go to the first sample."""
    first, second = [], []
    for label in g.group_order():
        rows = g.values[g.groups == label]
        if rows.shape[0] < 2 or rows.shape[0] <= ddof:
            raise GroupTooSmall(f"group {label!r} has {rows.shape[0]} record(s); need at least 2")
        centred = rows - rows.mean(axis=0)
        cov = centred.T @ centred / (rows.shape[0] - ddof)
        (first if split(label) else second).append(cov)
    if not first or not second:
        raise EmptySide("the split leaves one side without any group")
    return MatrixSample.from_matrices(first, "psd"), MatrixSample.from_matrices(second, "psd")


def _read_frame(path: str | Path) -> pd.DataFrame:
    try:
        return pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def read_series_csv(path: str | Path, columns: Optional[Sequence[str]] = None) -> SeriesTable:
    """First column is the timestamp (ISO-8601 or integer); the rest are series."""
    frame = _read_frame(path)
    if frame.shape[1] < 2:
        raise DataError(f"{path}: need a timestamp column and at least one series")
    ts_col = frame.columns[0]
    cols = list(columns) if columns else list(frame.columns[1:])
    missing = [c for c in cols if c not in frame.columns]
    if missing:
        raise DataError(f"{path}: unknown column(s) {missing}")
    sub = frame[[ts_col, *cols]]
    clean = sub.dropna()
    dropped = len(sub) - len(clean)
    if dropped:
        log.warning("dropped %d row(s) with missing cells from %s", dropped, path)
    ts = clean[ts_col]
    if not pd.api.types.is_integer_dtype(ts):
        ts = pd.to_datetime(ts, utc=True).astype("int64")
    try:
        values = clean[cols].to_numpy(dtype=np.float64)
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric series value ({exc})") from exc
    return SeriesTable(ts.to_numpy(), tuple(cols), values)


def read_grouped_csv(path: str | Path, group_col: str, features: Sequence[str]) -> GroupedRecords:
    frame = _read_frame(path)
    needed = [group_col, *features]
    missing = [c for c in needed if c not in frame.columns]
    if missing:
        raise DataError(f"{path}: unknown column(s) {missing}")
    sub = frame[needed]
    clean = sub.dropna()
    if len(clean) < len(sub):
        log.warning("dropped %d row(s) with missing cells from %s", len(sub) - len(clean), path)
    try:
        values = clean[list(features)].to_numpy(dtype=np.float64)
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric feature value ({exc})") from exc
    return GroupedRecords(clean[group_col].astype(str).to_numpy(), tuple(features), values)


def format_sample(sample: MatrixSample) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dim", sample.dim])
    for m in sample.data:
        w.writerow([repr(float(v)) for v in m.ravel()])
    return buf.getvalue()


def write_sample_csv(sample: MatrixSample, path: str | Path) -> None:
    Path(path).write_text(format_sample(sample))


def parse_sample(text: str, source: str = "<sample>") -> MatrixSample:
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows or len(rows[0]) != 2 or rows[0][0].strip() != "dim":
        raise DataError(f"{source}: first line must be 'dim,<d>'")
    try:
        d = int(rows[0][1])
    except ValueError as exc:
        raise DataError(f"{source}: bad dimension {rows[0][1]!r}") from exc
    mats = []
    for lineno, r in enumerate(rows[1:], start=2):
        if len(r) != d * d:
            raise DataError(f"{source}: line {lineno} has {len(r)} values, expected {d * d}")
        try:
            m = np.array([float(v) for v in r]).reshape(d, d)
        except ValueError as exc:
            raise DataError(f"{source}: line {lineno}: {exc}") from exc
        try:
            mats.append(validate_spd(m, "psd"))
        except DataError as exc:
            raise type(exc)(f"{source}: line {lineno}: {exc}") from exc
    if not mats:
        raise DataError(f"{source}: no matrices")
    return MatrixSample.from_matrices(mats)


def read_sample_csv(path: str | Path) -> MatrixSample:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    return parse_sample(text, str(path))


def read_matrix_file(path: str | Path) -> NDArray[np.float64]:
    """A single matrix: either a one-matrix sample file or a plain square CSV."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if text.lstrip().startswith("dim"):
        s = parse_sample(text, str(path))
        if len(s) != 1:
            raise DataError(f"{path}: expected exactly one matrix, found {len(s)}")
        return np.array(s.data[0])
    try:
        rows = [[float(v) for v in r] for r in csv.reader(io.StringIO(text)) if r]
        m = np.array(rows)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DataError(f"{path}: matrix must be square, got shape {m.shape}")
    return m
