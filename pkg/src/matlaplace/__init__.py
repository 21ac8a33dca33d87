"""Two-sample tests for random SPD matrices based on Laplace transforms."""

from .bootstrap import PValueResult, WarpSpeedRun, bootstrap_pvalue, critical_value, warp_speed_power
from .errors import DataError, MatLaplaceError, NumericalError, PivotFailure
from .laplace import NcwParams, empirical_laplace, ncw_laplace
from .sample import MatrixSample
from .spd import SpdMatrix, cholesky, validate_spd
from .statistic import StatisticValue, scaled_statistic, statistic_fast, statistic_reference

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "MatLaplaceError",
    "MatrixSample",
    "NcwParams",
    "NumericalError",
    "PValueResult",
    "PivotFailure",
    "SpdMatrix",
    "StatisticValue",
    "WarpSpeedRun",
    "bootstrap_pvalue",
    "cholesky",
    "critical_value",
    "empirical_laplace",
    "ncw_laplace",
    "scaled_statistic",
    "statistic_fast",
    "statistic_reference",
    "validate_spd",
    "warp_speed_power",
]
