import numpy as np
import chex
from typing import Any, Dict, Optional, Tuple
from flax import struct
from ..utils.report_log import ReportLog


BASE_COLUMNS = ("n", "lhs", "rhs_main", "rhs_correction", "residual", "normalized")


@struct.dataclass
class Criterion:
    """One acceptance criterion; only `hard` ones decide the exit code."""

    name: str
    passed: bool
    value: float
    target: Any = None
    hard: bool = True
    note: str = ""

    def summary(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "hard": bool(self.hard),
            "passed": bool(self.passed),
            "value": self.value,
            "target": self.target,
            "note": self.note,
        }


@struct.dataclass
class AsymReport:
    """Per-n comparison of a quantity with its asymptotic form.

    `residual` is recomputed from the stored columns, so a report read back
    from CSV reproduces it bit for bit.
    """

    n: chex.Array
    lhs: chex.Array
    rhs_main: chex.Array
    rhs_correction: chex.Array
    normalized: chex.Array
    quantity: str = struct.field(pytree_node=False, default="")
    family: str = struct.field(pytree_node=False, default="")
    extras: Optional[Dict[str, np.ndarray]] = struct.field(pytree_node=False, default=None)
    fit: Optional[Dict[str, Any]] = struct.field(pytree_node=False, default=None)
    criteria: Tuple[Criterion, ...] = struct.field(pytree_node=False, default=())

    @property
    def residual(self) -> np.ndarray:
        return np.asarray(self.lhs) - np.asarray(self.rhs_main) - np.asarray(self.rhs_correction)

    @property
    def passed(self) -> bool:
        return all(bool(c.passed) for c in self.criteria if c.hard)

    def columns(self) -> Dict[str, np.ndarray]:
        cols = {
            "n": np.asarray(self.n, dtype=np.int64),
            "lhs": np.asarray(self.lhs),
            "rhs_main": np.asarray(self.rhs_main),
            "rhs_correction": np.asarray(self.rhs_correction),
            "residual": self.residual,
            "normalized": np.asarray(self.normalized),
        }
        for k, v in (self.extras or {}).items():
            cols[k] = np.asarray(v)
        return cols

    def summary(self) -> Dict[str, Any]:
        fit = self.fit or {}
        return {
            "quantity": self.quantity,
            "family": self.family,
            "fitted_slope": fit.get("slope"),
            "fitted_intercept": fit.get("intercept"),
            "slope_error": fit.get("slope_error"),
            "target_slope": fit.get("target_slope"),
            "fit": fit,
            "pass": self.passed,
            "criteria": [c.summary() for c in self.criteria],
        }

    def with_criteria(self, *criteria: Criterion) -> "AsymReport":
        return self.replace(criteria=tuple(self.criteria) + tuple(criteria))

    def save(self, log: ReportLog, name: Optional[str] = None) -> str:
        return log.save(name or self.quantity, self.columns(), self.summary())

    @classmethod
    def from_columns(cls, cols: Dict[str, np.ndarray], quantity: str = "", family: str = "") -> "AsymReport":
        """Rebuild a report from the columns written by `columns()`."""
        extras = {k: v for k, v in cols.items() if k not in BASE_COLUMNS}
        return cls(
            n=np.asarray(cols["n"], dtype=np.int64),
            lhs=np.asarray(cols["lhs"], dtype=np.float64),
            rhs_main=np.asarray(cols["rhs_main"], dtype=np.float64),
            rhs_correction=np.asarray(cols["rhs_correction"], dtype=np.float64),
            normalized=np.asarray(cols["normalized"], dtype=np.float64),
            quantity=quantity,
            family=family,
            extras=extras or None,
        )


def make_report(
    quantity: str,
    family: str,
    n: np.ndarray,
    lhs: np.ndarray,
    rhs_main: Any,
    rhs_correction: Any = 0.0,
    normalized: Optional[np.ndarray] = None,
    extras: Optional[Dict[str, np.ndarray]] = None,
    fit: Optional[Dict[str, Any]] = None,
) -> AsymReport:
    """Broadcast scalar right-hand sides and sort every column by n."""
    n = np.asarray(n, dtype=np.int64)
    order = np.argsort(n, kind="stable")
    shape = n.shape

    def col(x):
        return np.broadcast_to(np.asarray(x, dtype=np.float64), shape)[order].copy()

    lhs = col(lhs)
    rhs_main = col(rhs_main)
    rhs_correction = col(rhs_correction)
    if normalized is None:
        normalized = lhs - rhs_main - rhs_correction
    else:
        normalized = col(normalized)
    extras = {k: np.asarray(v)[order] for k, v in (extras or {}).items()}
    return AsymReport(
        n=n[order],
        lhs=lhs,
        rhs_main=rhs_main,
        rhs_correction=rhs_correction,
        normalized=normalized,
        quantity=quantity,
        family=family,
        extras=extras or None,
        fit=fit,
    )
