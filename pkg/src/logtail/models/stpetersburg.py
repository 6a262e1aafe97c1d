"""Generalized St. Petersburg distributions.

P(X = 2**(n/alpha)) = 2**-n for n >= 1, alpha in (0, 1].  The tail is an
exact staircase: survival(x) * x**alpha = 2**frac(alpha log2 x), so the
modulation is p(z) = z**alpha on [1, r) with r = 2**(1/alpha).  For
alpha < 1 the transform-side modulation q0 has an absolutely convergent
bilateral series; for alpha = 1 the mean diverges and the remainder picks
up a log factor instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

from ..core import PeriodicFn, SlowlyVaryingFn
from ..laplace import AtomGenerator, StieltjesMeasure, moment_remainders

__all__ = ["StPetersburg"]


@dataclass(frozen=True)
class StPetersburg:
    alpha: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")

    @property
    def r(self) -> float:
        return 2.0 ** (1.0 / self.alpha)

    @cached_property
    def measure(self) -> StieltjesMeasure:
        gen = AtomGenerator.geometric(
            x0=self.r, loc_ratio=self.r, m0=0.5, mass_ratio=0.5, n_start=1)
        return StieltjesMeasure(generators=(gen,), is_probability=True)

    def tail(self, x: float) -> float:
        """P(X > x), exactly."""
        if x < self.r:
            return 1.0
        return 2.0 ** -math.floor(self.alpha * math.log2(x))

    def period_p(self) -> PeriodicFn:
        """Tail modulation: survival(x) x**alpha = p(x) with p(z) = z**alpha."""
        return PeriodicFn.power(1.0, self.alpha, self.r)

    def one_minus_hat_F(self, s: float) -> float:
        """1 - E exp(-s X) by the cancellation-free route."""
        if s <= 0:
            raise ValueError("s must be positive")
        return moment_remainders(self.measure, 0, s).g

    def q0(self, s: float) -> float:
        """Transform modulation: the exact r-periodic limit of
        (1 - hat_F(s)) / s**alpha, as a bilateral series over the atom lattice.

        Substituting s = 2**-(m0 + theta)/alpha collapses the limit to a sum
        over the integer offsets m between atom index and scale index.
        """
        if self.alpha >= 1.0:
            raise ValueError("q0 exists only for alpha < 1; at alpha = 1 use "
                             "normalized_remainder")
        if s <= 0:
            raise ValueError("s must be positive")
        theta = -self.alpha * math.log2(s)
        theta -= math.floor(theta)
        total = 0.0
        m = 0
        while True:  # m -> +infinity: terms ~ 2**-m
            t = 2.0 ** ((m - theta) / self.alpha)
            term = -math.expm1(-t) * 2.0 ** (theta - m)
            total += term
            if m > 0 and term < 1e-17 * total:
                break
            m += 1
        m = -1
        while True:  # m -> -infinity: terms ~ 2**((m-theta)(1-alpha)/alpha)
            t = 2.0 ** ((m - theta) / self.alpha)
            term = -math.expm1(-t) * 2.0 ** (theta - m)
            total += term
            if term < 1e-17 * total:
                break
            m -= 1
        return total

    def normalized_remainder(self, s: float) -> float:
        """alpha = 1 only: (1 - hat_F(s)) / (s log2(1/s)) -> 1 as s -> 0."""
        if self.alpha != 1.0:
            raise ValueError("normalized_remainder is the alpha = 1 diagnostic")
        if not 0.0 < s < 1.0:
            raise ValueError("s must lie in (0, 1)")
        return self.one_minus_hat_F(s) / (s * math.log2(1.0 / s))

    def ell(self) -> SlowlyVaryingFn:
        """The slowly varying factor of the remainder: 1 for alpha < 1,
        log2 for alpha = 1."""
        if self.alpha < 1.0:
            return SlowlyVaryingFn()
        return SlowlyVaryingFn(kind="log-power", base=2.0, exponent=1.0)
