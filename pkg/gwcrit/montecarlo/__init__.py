from .sampler import CAPPED, OffspringSampler, get_sampler, sample_offspring, sample_offspring_batch
from .simulate import SimConfig, SimResult, simulate


__all__ = [
    "CAPPED",
    "OffspringSampler",
    "get_sampler",
    "sample_offspring",
    "sample_offspring_batch",
    "SimConfig",
    "SimResult",
    "simulate",
]
