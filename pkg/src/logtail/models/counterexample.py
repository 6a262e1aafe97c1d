"""A bounded-nowhere counterexample for pointwise lattice limits.

f equals 1 everywhere except on the excursion windows
[(1+1/n) 2**n, (1+2/n) 2**n), n >= 3, where it equals n.  Along every
geometric ray x = 2**k z the excursions are visited only finitely often, so
f(2**k z) -> 1 pointwise; yet sup over [2**n, 2**(n+1)) equals n, so no
locally uniform (or O-regular-variation) bound holds.  Estimators must
report the pointwise limit 1 together with unbounded-excursion diagnostics
rather than a spurious periodic limit.
"""

from __future__ import annotations

import math

__all__ = ["excursion_function", "excursion_window", "excursion_height"]


def excursion_window(n: int) -> tuple[float, float]:
    """[lo, hi) of the level-n excursion; contained in [2**n, 2**(n+1)) for n >= 2."""
    if n < 3:
        raise ValueError("excursion windows are defined for n >= 3")
    return (1.0 + 1.0 / n) * 2.0**n, (1.0 + 2.0 / n) * 2.0**n


def excursion_function(x: float) -> float:
    if x <= 8.0:
        return 1.0
    # the window at level n sits inside octave n; the float floor can land
    # one octave high at the boundary, so probe both candidates
    k = int(math.floor(math.log2(x)))
    for n in (k, k - 1):
        if n >= 3:
            lo, hi = excursion_window(n)
            if lo <= x < hi:
                return float(n)
    return 1.0


def excursion_height(n: int) -> float:
    """sup of f over [2**n, 2**(n+1)): the advertised unbounded excursion."""
    if n < 3:
        return 1.0
    return float(n)
