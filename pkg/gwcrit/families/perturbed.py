from typing import Dict, Tuple
import jax.numpy as jnp
from ..core.errors import DomainError, InvalidFamilyError
from ..core.series import binomial_coeffs_at
from ..family import OffspringFamily


class PerturbedFamily(OffspringFamily):
    name = "perturbed"

    def __init__(self, nu: float, c: float, d: float, verbose: bool = False):
        """f(s) = s + c (1-s)^(1+nu) + c d (1-s)^(1+2nu).

        The slowly varying part L(x) = c + c d x^(-nu) converges to C_L = c at
        rate x^(-nu). Validity is certified numerically at construction.
        """
        super().__init__(nu, verbose)
        if c <= 0.0:
            raise DomainError(f"Scale c must be positive, got {c}.")
        if c * (1.0 + d) <= 0.0:
            raise DomainError(f"p_0 = c(1+d) must be positive, got {c * (1.0 + d)}.")
        self.c = float(c)
        self.d = float(d)
        report = self.validate(self.default_params.validation_depth)
        if not report.tail_certified:
            raise InvalidFamilyError(
                "PerturbedFamily: tail sign could not be certified beyond depth"
                f" {report.depth}.",
                index=report.depth,
            )

    @property
    def terms(self) -> Tuple[Tuple[float, float], ...]:
        return ((self.c, 1.0 + self.nu), (self.c * self.d, 1.0 + 2.0 * self.nu))

    def certify_tail(self, depth: int) -> bool:
        """Dominant term beats the perturbation at `depth` and the gap only widens.

        For k > 1 + 2nu the magnitude ratio of the (1-s)^(1+2nu) and
        (1-s)^(1+nu) coefficients decreases by (k - 1 - 2nu)/(k - 1 - nu) per step.
        """
        g1, g2 = 1.0 + self.nu, 1.0 + 2.0 * self.nu
        if self.d == 0.0 or g2.is_integer():
            return depth >= 2
        if depth <= g2 + 1.0:
            return False
        dominant = float(binomial_coeffs_at(g1, jnp.float64(depth)))
        perturbation = float(jnp.abs(binomial_coeffs_at(g2, jnp.float64(depth))))
        return dominant > 0.0 and abs(self.d) * perturbation < dominant

    def config(self) -> Dict[str, float]:
        return {"family": self.name, "nu": self.nu, "c": self.c, "d": self.d}

    def __repr__(self) -> str:
        return f"PerturbedFamily(nu={self.nu}, c={self.c}, d={self.d})"
