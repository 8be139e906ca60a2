import threading
from collections import OrderedDict
import jax
import jax.numpy as jnp
import numpy as np
import chex
from ..core.errors import DomainError
from ..family import OffspringFamily


CAPPED = -1


class OffspringSampler(object):
    def __init__(
        self,
        fam: OffspringFamily,
        support_cap: int = 2**32,
        initial_table: int = 2**12,
        max_table: int = 2**22,
    ):
        """Exact inverse-CDF sampler for the offspring law of `fam`.

        Draws are looked up in a table of P(X > k) that doubles on demand up
        to `max_table` entries; beyond it the tail is bisected through the
        log-gamma form of the coefficients up to `support_cap`. Draws past
        the cap come back as CAPPED.
        """
        if support_cap < 2:
            raise DomainError(f"support_cap must be >= 2, got {support_cap}.")
        self.fam = fam
        self.support_cap = int(support_cap)
        self.max_table = int(max(min(max_table, support_cap + 1), 2))
        self._lock = threading.Lock()
        self._neg_tail = self._build(min(initial_table, self.max_table))

    def _build(self, size: int) -> np.ndarray:
        # Decreasing tail stored negated so that searchsorted sees ascending values.
        return -np.asarray(self.fam.tail_probs(size))

    @property
    def table_size(self) -> int:
        return int(self._neg_tail.shape[0])

    @property
    def cap_tail_mass(self) -> float:
        """P(X > support_cap), the mass that can only be reported, not sampled."""
        return float(self.fam.tail_probs_at(float(self.support_cap)))

    def _grow(self, needed: float):
        with self._lock:
            size = self.table_size
            while size < self.max_table and -self._neg_tail[-1] >= needed:
                size = min(2 * size, self.max_table)
                self._neg_tail = self._build(size)

    def _bisect(self, v: np.ndarray) -> np.ndarray:
        """Smallest k > table with P(X > k) < v, or CAPPED past the cap."""
        lo = np.full(v.shape, self.table_size - 1, dtype=np.int64)
        hi = np.full(v.shape, self.support_cap, dtype=np.int64)
        beyond = np.asarray(self.fam.tail_probs_at(float(self.support_cap))) >= v
        while np.any(hi - lo > 1):
            mid = (lo + hi) // 2
            tail = np.asarray(self.fam.tail_probs_at(jnp.asarray(mid, dtype=jnp.float64)))
            below = tail < v
            hi = np.where(below, mid, hi)
            lo = np.where(below, lo, mid)
        return np.where(beyond, CAPPED, hi)

    def ppf(self, u: chex.Array) -> np.ndarray:
        """Offspring counts min{k : F(k) > u} for uniforms u in [0, 1)."""
        v = 1.0 - np.asarray(u, dtype=np.float64)
        if v.size and np.min(v) <= -self._neg_tail[-1]:
            self._grow(float(np.min(v)))
        neg_tail = self._neg_tail
        k = np.searchsorted(neg_tail, -v, side="right").astype(np.int64)
        deep = k >= neg_tail.shape[0]
        if np.any(deep):
            k[deep] = self._bisect(v[deep])
        return k


SAMPLER_SLOTS = 8
_SAMPLERS: "OrderedDict[tuple, OffspringSampler]" = OrderedDict()
_SAMPLERS_LOCK = threading.Lock()


def get_sampler(fam: OffspringFamily, support_cap: int = 2**32) -> OffspringSampler:
    """One shared sampler per (family parameters, cap), least recently used evicted first."""
    key = (tuple(sorted(fam.config().items())), int(support_cap))
    with _SAMPLERS_LOCK:
        sampler = _SAMPLERS.pop(key, None)
        if sampler is None:
            sampler = OffspringSampler(fam, support_cap)
        _SAMPLERS[key] = sampler
        while len(_SAMPLERS) > SAMPLER_SLOTS:
            _SAMPLERS.popitem(last=False)
        return sampler


def sample_offspring_batch(fam: OffspringFamily, uniforms: chex.Array, support_cap: int = 2**32) -> np.ndarray:
    return get_sampler(fam, support_cap).ppf(uniforms)


def sample_offspring(fam: OffspringFamily, rng: chex.PRNGKey, support_cap: int = 2**32) -> int:
    """Single offspring count; CAPPED (-1) past the support cap."""
    u = jax.random.uniform(rng, dtype=jnp.float64)
    return int(sample_offspring_batch(fam, np.atleast_1d(np.asarray(u)), support_cap)[0])
