from typing import Dict, Tuple
from ..core.errors import DomainError, InvalidFamilyError
from ..family import OffspringFamily


class StableFamily(OffspringFamily):
    name = "stable"

    def __init__(self, nu: float, c: float, verbose: bool = False):
        """f(s) = s + c (1-s)^(1+nu) with constant slowly varying part L = c."""
        super().__init__(nu, verbose)
        if c <= 0.0:
            raise DomainError(f"Scale c must be positive, got {c}.")
        self.c = float(c)
        if self.p1 < -self.default_params.negative_tol:
            raise InvalidFamilyError(
                f"StableFamily: p_1 = {self.p1:.6g} < 0, scale c must be <= {self.max_c:.6g}.", index=1
            )

    @property
    def max_c(self) -> float:
        """Largest scale that keeps p_1 = 1 - c(1+nu) nonnegative."""
        return 1.0 / (1.0 + self.nu)

    @property
    def terms(self) -> Tuple[Tuple[float, float], ...]:
        return ((self.c, 1.0 + self.nu),)

    def certify_tail(self, depth: int) -> bool:
        # Coefficients of (1-s)^(1+nu) are positive from index 2 on.
        return depth >= 2

    def config(self) -> Dict[str, float]:
        return {"family": self.name, "nu": self.nu, "c": self.c}

    def __repr__(self) -> str:
        return f"StableFamily(nu={self.nu}, c={self.c})"
