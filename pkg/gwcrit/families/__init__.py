from .stable import StableFamily
from .perturbed import PerturbedFamily


Families = {
    "stable": StableFamily,
    "perturbed": PerturbedFamily,
}


__all__ = ["StableFamily", "PerturbedFamily", "Families"]
