"""Small closed-form constants shared across modules."""
from __future__ import annotations

import math
from fractions import Fraction


def unit_ball_measure(k: int) -> float:
    """Lebesgue measure of the unit ball in R^k (2 for k = 1, pi for k = 2)."""
    return math.pi ** (k / 2) / math.gamma(k / 2 + 1)


def lower_ahlfors_beta(n: int, M: float) -> float:
    """Lower density constant omega_{n-1} / (M + 1)^(n-1) of a corkscrew domain."""
    if n == 2 and isinstance(M, (int, Fraction)):
        return float(Fraction(2) / (M + 1))
    return unit_ball_measure(n - 1) / (M + 1) ** (n - 1)
