from .report_log import ReportLog
from .config import load_config, merge_flags, family_from_config, parse_family_spec
from .helpers import geometric_grid, doubling_grid, ols, nested_fit, loglog_slope


__all__ = [
    "ReportLog",
    "load_config",
    "merge_flags",
    "family_from_config",
    "parse_family_spec",
    "geometric_grid",
    "doubling_grid",
    "ols",
    "nested_fit",
    "loglog_slope",
]
