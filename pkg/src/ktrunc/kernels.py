"""Scalar constants of the operator family.

All constants are functions of the block dimension ``n`` and the fractional
order ``s`` only.
"""

from dataclasses import dataclass
import math

from scipy import special


@dataclass(frozen=True)
class SpectralParams:
    s: float
    n: int

    def __post_init__(self):
        check_order(self.s)
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.n}")


def check_order(s):
    if not (0.0 < s < 1.0):
        raise ValueError(f"fractional order must lie in (0, 1), got {s}")


def normalizing_constant(n, s):
    """C_{n,s} = s 4^s Gamma(n/2 + s) / (pi^{n/2} Gamma(1 - s)).

    With this choice the full-space operator is exactly ``-(-Laplace)^s``.
    """
    SpectralParams(s, n)
    return s * 4.0**s * special.gamma(n / 2 + s) / (math.pi ** (n / 2) * special.gamma(1 - s))


def beta_1ms_s(s):
    """Beta(1-s, s) = pi / sin(pi s)."""
    check_order(s)
    return float(special.beta(1.0 - s, s))


def sphere_measure(k):
    """Surface measure of the unit sphere S^{k-1} in R^k (2 for k=1)."""
    if int(k) != k or k < 1:
        raise ValueError(f"sphere dimension must be >= 1, got {k}")
    return 2.0 * math.pi ** (k / 2) / special.gamma(k / 2)


def asymptotic_ratio(k, s):
    # tends to 1 as s -> 1^-
    return normalizing_constant(k, s) * sphere_measure(k) / (4.0 * k * (1.0 - s))


def barrier_constant(ks, s):
    """Common value of both extremal operators on (1 - |x|^2)^s_+ inside B_1.

    ``-Beta(1-s,s)/2 * sum_i C_{k_i,s} omega_{k_i}``; for radius R multiply by
    nothing (the barrier identity is scale free in R).
    """
    return -0.5 * beta_1ms_s(s) * sum(normalizing_constant(k, s) * sphere_measure(k) for k in ks)
