import math
import jax.numpy as jnp
import numpy as np
import chex
from typing import Dict, Sequence, Tuple


def geometric_grid(lo: int, hi: int, per_decade: int = 4) -> np.ndarray:
    """Integer grid round(10^(k/per_decade)) restricted to [lo, hi]."""
    k_lo = math.floor(per_decade * math.log10(lo))
    k_hi = math.ceil(per_decade * math.log10(hi))
    pts = np.rint(10.0 ** (np.arange(k_lo, k_hi + 1) / per_decade)).astype(np.int64)
    return np.unique(pts[(pts >= lo) & (pts <= hi)])


def doubling_grid(start: int, count: int) -> np.ndarray:
    return start * 2 ** np.arange(count, dtype=np.int64)


def top_range(n: np.ndarray, decades: float = 2.0) -> np.ndarray:
    """Mask of grid points within `decades` of the largest one."""
    n = np.asarray(n)
    return n >= n.max() / 10.0**decades


def ols(design: chex.Array, y: chex.Array) -> Tuple[np.ndarray, np.ndarray]:
    """Least-squares coefficients and standard errors.

    Columns are rescaled to unit max-norm before solving since regressors
    like ln n/n and 1/n differ by orders of magnitude.
    """
    x = jnp.asarray(design, dtype=jnp.float64)
    y = jnp.asarray(y, dtype=jnp.float64)
    m, p = x.shape
    assert m >= p, f"ols needs at least {p} points, got {m}"
    scale = jnp.max(jnp.abs(x), axis=0)
    scale = jnp.where(scale > 0, scale, 1.0)
    xs = x / scale
    coef_s, _, _, _ = jnp.linalg.lstsq(xs, y)
    resid = y - xs @ coef_s
    dof = max(m - p, 1)
    sigma2 = jnp.sum(resid**2) / dof
    cov_s = sigma2 * jnp.linalg.pinv(xs.T @ xs)
    stderr = jnp.sqrt(jnp.abs(jnp.diag(cov_s))) / scale
    return np.asarray(coef_s / scale), np.asarray(stderr)


def log_corrections(n: np.ndarray, columns: Sequence[str]) -> np.ndarray:
    """Design matrix from the named columns "1", "log/n" and "1/n"."""
    n = np.asarray(n, dtype=np.float64)
    basis = {"1": np.ones_like(n), "log/n": np.log(n) / n, "1/n": 1.0 / n}
    return np.stack([basis[c] for c in columns], axis=1)


def loglog_slope(n: np.ndarray, y: np.ndarray) -> float:
    """Slope of log|y| against log n; zero rows are dropped."""
    n = np.asarray(n, dtype=np.float64)
    y = np.abs(np.asarray(y, dtype=np.float64))
    keep = (y > 0) & np.isfinite(y)
    if keep.sum() < 2:
        return 0.0
    x = np.stack([np.ones(keep.sum()), np.log(n[keep])], axis=1)
    coef, _ = ols(x, np.log(y[keep]))
    return float(coef[1])


def nested_fit(
    n: np.ndarray, y: np.ndarray, columns: Sequence[str], which: int = 0
) -> Dict[str, float]:
    """Fit on the full grid and on every other point (top point kept).

    Agreement asks the two estimates of coefficient `which` to lie within
    three combined standard errors of each other.
    """
    n = np.asarray(n)
    y = np.asarray(y)
    full, full_se = ols(log_corrections(n, columns), y)
    sub = np.arange(n.shape[0] - 1, -1, -2)[::-1]
    if sub.shape[0] < len(columns):
        sub = np.arange(n.shape[0])
    half, half_se = ols(log_corrections(n[sub], columns), y[sub])
    gap = abs(full[which] - half[which])
    bar = 3.0 * (full_se[which] + half_se[which])
    return {
        "estimate": float(full[which]),
        "error": float(full_se[which]),
        "estimate_half": float(half[which]),
        "error_half": float(half_se[which]),
        "grid_agreement": bool(gap <= max(bar, 1e-12 * max(1.0, abs(full[which])))),
    }


def richardson(values: np.ndarray) -> np.ndarray:
    """First-order extrapolation 2 a_{2n} - a_n on a doubling grid."""
    values = np.asarray(values)
    return 2.0 * values[1:] - values[:-1]
