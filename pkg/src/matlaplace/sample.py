"""Ordered collections of same-sized PSD matrices."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DimensionMismatch, EmptySample
from .spd import DEFAULT_TOL, Mode, SpdMatrix, ToleranceSet, validate_spd


@dataclass(frozen=True, eq=False)
class MatrixSample:
    """One of the two samples, stored as a read-only ``(n, d, d)`` array.

    The constructor trusts its input (samplers produce symmetric draws by
    construction). Use :meth:`from_matrices` for anything user-supplied.
    """

    data: NDArray[np.float64]

    def __post_init__(self):
        a = np.array(self.data, dtype=np.float64, copy=True)
        if a.ndim != 3 or a.shape[1] != a.shape[2]:
            raise DimensionMismatch(f"expected an (n, d, d) array, got shape {a.shape}")
        if a.shape[0] == 0:
            raise EmptySample("a matrix sample needs at least one element")
        a.setflags(write=False)
        object.__setattr__(self, "data", a)

    @classmethod
    def from_matrices(
        cls,
        matrices: Iterable[SpdMatrix | ArrayLike],
        mode: Mode = "psd",
        tol: ToleranceSet = DEFAULT_TOL,
    ) -> "MatrixSample":
        items = [m if isinstance(m, SpdMatrix) else validate_spd(m, mode, tol) for m in matrices]
        if not items:
            raise EmptySample("a matrix sample needs at least one element")
        dims = {m.dim for m in items}
        if len(dims) != 1:
            raise DimensionMismatch(f"mixed matrix dimensions {sorted(dims)}")
        return cls(np.stack([m.entries for m in items]))

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    @property
    def size(self) -> int:
        return self.data.shape[0]

    def __len__(self) -> int:
        return self.data.shape[0]

    @property
    def items(self) -> list[SpdMatrix]:
        return [SpdMatrix(m, "psd") for m in self.data]

    def take(self, indices: Sequence[int] | NDArray[np.intp]) -> "MatrixSample":
        return MatrixSample(self.data[np.asarray(indices, dtype=np.intp)])

    def concat(self, other: "MatrixSample") -> "MatrixSample":
        if other.dim != self.dim:
            raise DimensionMismatch(f"cannot join samples of dims {self.dim} and {other.dim}")
        return MatrixSample(np.concatenate([self.data, other.data]))

    def __eq__(self, other):
        if not isinstance(other, MatrixSample):
            return NotImplemented
        return np.array_equal(self.data, other.data)
