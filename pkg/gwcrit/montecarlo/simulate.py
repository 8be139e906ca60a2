import os
import warnings
import jax
import jax.numpy as jnp
import numpy as np
import chex
from typing import Any, Dict, Optional
from concurrent.futures import ThreadPoolExecutor
from flax import struct
from ..core.errors import DomainError
from ..family import OffspringFamily
from .sampler import CAPPED, get_sampler


POLICIES = ("censor", "exclude")
UNIFORM_CHUNK = 2**16
CAPPED_WARN_FRACTION = 1e-3


@struct.dataclass
class SimConfig:
    family: OffspringFamily = struct.field(pytree_node=False)
    horizon: int = struct.field(pytree_node=False, default=20)
    replicates: int = struct.field(pytree_node=False, default=10**6)
    seed: int = struct.field(pytree_node=False, default=0)
    pop_cap: int = struct.field(pytree_node=False, default=10**7)
    support_cap: int = struct.field(pytree_node=False, default=2**32)
    jmax: int = struct.field(pytree_node=False, default=8)
    workers: Optional[int] = struct.field(pytree_node=False, default=None)
    chunk: int = struct.field(pytree_node=False, default=2**14)
    policy: str = struct.field(pytree_node=False, default="exclude")
    verbose: bool = struct.field(pytree_node=False, default=False)

    def echo(self) -> Dict[str, Any]:
        return {
            "family": self.family.config(),
            "n": self.horizon,
            "reps": self.replicates,
            "seed": self.seed,
            "pop_cap": self.pop_cap,
            "support_cap": self.support_cap,
            "jmax": self.jmax,
            "policy": self.policy,
        }


@struct.dataclass
class SimResult:
    """Tallies for generations 0..n.

    `survivors[g]` counts replicates with Z_g > 0 and `occupancy[g, j]`
    those with Z_g = j; both are over the `used[g]` replicates that enter
    the estimates. `final` holds Z_n per replicate, CAPPED when flagged.
    """

    survivors: chex.Array
    occupancy: chex.Array
    used: chex.Array
    capped: int
    cap_tail_mass: float
    final: chex.Array

    @property
    def q_hat(self) -> np.ndarray:
        return self.survivors / self.used

    @property
    def p_hat(self) -> np.ndarray:
        return self.occupancy / self.used[:, None]

    @property
    def q_stderr(self) -> np.ndarray:
        q = self.q_hat
        return np.sqrt(q * (1.0 - q) / self.used)

    @property
    def stderr(self) -> np.ndarray:
        p = self.p_hat
        return np.sqrt(p * (1.0 - p) / self.used[:, None])

    def to_json(self, cfg: SimConfig) -> Dict[str, Any]:
        return {
            "config_echo": cfg.echo(),
            "q_hat": self.q_hat,
            "q_stderr": self.q_stderr,
            "p_hat": self.p_hat,
            "stderr": self.stderr,
            "capped": int(self.capped),
            "used": self.used,
            "cap_tail_mass": self.cap_tail_mass,
        }


@jax.jit
def _uniforms(key_g: chex.PRNGKey, reps: chex.Array, idx: chex.Array) -> chex.Array:
    """Uniform for individual `idx` of replicate `reps`, independent of scheduling."""

    def one(r, i):
        k = jax.random.fold_in(jax.random.fold_in(key_g, r), i)
        return jax.random.uniform(k, dtype=jnp.float64)

    return jax.vmap(one)(reps, idx)


def _draw_uniforms(key_g: chex.PRNGKey, reps: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Evaluate `_uniforms` in fixed-size padded chunks to keep one compiled shape."""
    total = reps.shape[0]
    out = np.empty(total, dtype=np.float64)
    for start in range(0, total, UNIFORM_CHUNK):
        stop = min(start + UNIFORM_CHUNK, total)
        r = np.zeros(UNIFORM_CHUNK, dtype=np.uint32)
        i = np.zeros(UNIFORM_CHUNK, dtype=np.uint32)
        r[: stop - start] = reps[start:stop]
        i[: stop - start] = idx[start:stop]
        u = _uniforms(key_g, jnp.asarray(r), jnp.asarray(i))
        out[start:stop] = np.asarray(u)[: stop - start]
    return out


def _tally(hist: np.ndarray, mask: np.ndarray, jmax: int):
    """Survivor and occupancy counts per generation over the columns in `mask`."""
    h = hist[:, mask]
    alive = np.sum((h > 0) | (h == CAPPED), axis=1)
    occ = np.stack([np.bincount(row[(row >= 0) & (row <= jmax)], minlength=jmax + 1) for row in h])
    return alive.astype(np.int64), occ.astype(np.int64)


def _run_block(cfg: SimConfig, first: int, count: int):
    """Simulate replicates first..first+count-1 through all generations."""
    sampler = get_sampler(cfg.family, cfg.support_cap)
    master = jax.random.PRNGKey(cfg.seed)
    n, jmax = cfg.horizon, cfg.jmax
    rep_ids = np.arange(first, first + count, dtype=np.int64)
    z = np.ones(count, dtype=np.int64)
    flagged_at = np.full(count, n + 1, dtype=np.int64)
    hist = np.empty((n + 1, count), dtype=np.int64)
    hist[0] = z

    for g in range(1, n + 1):
        active = np.nonzero(z > 0)[0]
        if active.size > 0:
            sizes = z[active]
            starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
            total = int(sizes.sum())
            owners = np.repeat(rep_ids[active], sizes)
            idx = np.arange(total, dtype=np.int64) - np.repeat(starts, sizes)
            key_g = jax.random.fold_in(master, g)
            x = sampler.ppf(_draw_uniforms(key_g, owners, idx))
            over = np.add.reduceat((x == CAPPED).astype(np.int64), starts) > 0
            sums = np.add.reduceat(np.where(x == CAPPED, 0, x), starts)
            new = np.where(over | (sums > cfg.pop_cap), CAPPED, sums)
            flagged_at[active[new == CAPPED]] = g
            z[active] = new
        hist[g] = z

    # Flags are final only after the last generation.
    flagged = flagged_at <= n
    alive, occ = _tally(hist, np.ones(count, dtype=bool), jmax)
    alive_flagged, occ_flagged = _tally(hist, flagged, jmax)
    return alive, occ, alive_flagged, occ_flagged, flagged_at, z


def _check_config(cfg: SimConfig):
    if cfg.replicates < 1:
        raise DomainError(f"replicates must be >= 1, got {cfg.replicates}.")
    if cfg.horizon < 1:
        raise DomainError(f"horizon must be >= 1, got {cfg.horizon}.")
    if cfg.pop_cap < 1 or cfg.support_cap < 2:
        raise DomainError("pop_cap and support_cap must be positive.")
    if cfg.pop_cap >= 2**32:
        raise DomainError("pop_cap must stay below 2^32 individual indices.")
    if cfg.jmax < 0:
        raise DomainError(f"jmax must be >= 0, got {cfg.jmax}.")
    if cfg.policy not in POLICIES:
        raise DomainError(f"policy must be one of {POLICIES}, got {cfg.policy}.")


def simulate(cfg: SimConfig) -> SimResult:
    """Run `cfg.replicates` independent processes from Z_0 = 1.

    Every uniform is keyed by (seed, generation, replicate, individual), so
    results do not depend on `workers` or `chunk`. A replicate is flagged
    once a generation exceeds `pop_cap` or a draw passes the support cap.
    Under "censor" it stays in the estimates as alive with Z > jmax; under
    "exclude" it is dropped from every generation.
    """
    _check_config(cfg)
    n, reps = cfg.horizon, cfg.replicates
    blocks = [(first, min(cfg.chunk, reps - first)) for first in range(0, reps, cfg.chunk)]
    workers = cfg.workers or os.cpu_count() or 1
    if cfg.verbose:
        print(f"Simulate: {reps} replicates, {len(blocks)} blocks, {workers} workers.")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda b: _run_block(cfg, *b), blocks))

    alive = sum(p[0] for p in parts)
    occ = sum(p[1] for p in parts)
    flagged_at = np.concatenate([p[4] for p in parts])
    final = np.concatenate([p[5] for p in parts])
    capped = int(np.sum(flagged_at <= n))
    used = np.full(n + 1, reps, dtype=np.int64)
    if cfg.policy == "exclude":
        alive = alive - sum(p[2] for p in parts)
        occ = occ - sum(p[3] for p in parts)
        used = used - capped
        if capped == reps:
            raise DomainError("Every replicate was capped; nothing left to estimate.")

    if capped > CAPPED_WARN_FRACTION * reps:
        warnings.warn(
            f"Simulate: {capped} of {reps} replicates hit a cap"
            f" ({capped / reps:.3%} > {CAPPED_WARN_FRACTION:.1%})."
        )
    sampler = get_sampler(cfg.family, cfg.support_cap)
    return SimResult(
        survivors=alive,
        occupancy=occ,
        used=used,
        capped=capped,
        cap_tail_mass=sampler.cap_tail_mass,
        final=final,
    )
