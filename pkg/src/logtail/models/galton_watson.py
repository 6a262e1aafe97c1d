"""Supercritical Galton-Watson processes in the Schroeder case.

With offspring pgf f, mean mu = f'(1) > 1, extinction probability q < 1 and
gamma = f'(q) in (0, 1), the martingale limit W = lim Z_n / mu**n has an
atom q at zero and log-periodic small-value behavior with exponent
alpha = log(1/gamma) / log(mu): mu**alpha gamma = 1 makes
K(s) = s**alpha Q(phi(s)) multiplicatively mu-periodic, where phi is the
Poincare transform of W and Q the Schroeder function of f at q.

phi(s) approaches q exponentially fast as s grows, so everything here
iterates the pgf in recentered form -- as polynomials in the deviation
from the fixed points 1 and q with zero constant term -- keeping
phi(s) - q at full relative precision instead of losing it to
cancellation near the attractor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import optimize

from ..tauberian import aitken_limit

__all__ = ["GaltonWatson"]


def _horner_no_const(coeffs, x: float) -> float:
    """sum_m coeffs[m] x**(m+1): a polynomial with zero constant term."""
    acc = 0.0
    for c in reversed(coeffs):
        acc = (acc + c) * x
    return acc


@dataclass(frozen=True)
class GaltonWatson:
    probs: tuple

    def __post_init__(self):
        p = tuple(float(v) for v in self.probs)
        if any(v < 0 for v in p) or abs(sum(p) - 1.0) > 1e-12:
            raise ValueError("offspring probabilities must be nonnegative and sum to 1")
        object.__setattr__(self, "probs", p)
        if self.mean <= 1.0:
            raise ValueError("process must be supercritical (mean > 1)")
        if self.probs[0] <= 0.0:
            raise ValueError("the Schroeder case here needs p0 > 0")

    def f(self, s: float) -> float:
        return sum(p * s**k for k, p in enumerate(self.probs))

    def f_prime(self, s: float) -> float:
        return sum(k * p * s ** (k - 1) for k, p in enumerate(self.probs) if k > 0)

    @property
    def mean(self) -> float:
        return self.f_prime(1.0)

    @cached_property
    def extinction_prob(self) -> float:
        # smallest root of f(s) = s in [0, 1)
        return float(optimize.brentq(lambda s: self.f(s) - s, 0.0, 1.0 - 1e-12,
                                     xtol=1e-15, rtol=8.9e-16))

    @cached_property
    def gamma(self) -> float:
        return self.f_prime(self.extinction_prob)

    @cached_property
    def alpha(self) -> float:
        return math.log(1.0 / self.gamma) / math.log(self.mean)

    # -- recentered pgf iterations ------------------------------------------

    @cached_property
    def _coeffs_at_q(self) -> tuple:
        """c with f(q + d) - q = sum c[m] d**(m+1); c[0] = gamma."""
        q = self.extinction_prob
        kmax = len(self.probs) - 1
        out = []
        for m in range(1, kmax + 1):
            out.append(sum(p * math.comb(k, m) * q ** (k - m)
                           for k, p in enumerate(self.probs) if k >= m))
        return tuple(out)

    @cached_property
    def _coeffs_at_1(self) -> tuple:
        """b with 1 - f(1 - w) = sum b[m] w**(m+1); b[0] = mu."""
        kmax = len(self.probs) - 1
        out = []
        for m in range(1, kmax + 1):
            out.append((-1.0) ** (m + 1)
                       * sum(p * math.comb(k, m)
                             for k, p in enumerate(self.probs) if k >= m))
        return tuple(out)

    def iterate(self, s: float, n: int) -> float:
        for _ in range(n):
            s = self.f(s)
        return s

    def _orbit_dev(self, u: float, n: int) -> float:
        """f_n(exp(-u)) - q without cancellation.

        Tracks w = 1 - x through the repelling phase, switches to d = x - q
        once the orbit leaves the neighborhood of 1; both maps are the exact
        recentered pgf, so only the representation changes.
        """
        q = self.extinction_prob
        dq = 1.0 - q
        w = -math.expm1(-u)
        steps = 0
        while steps < n and w < 0.35 * dq:
            w = _horner_no_const(self._coeffs_at_1, w)
            steps += 1
        d = dq - w
        while steps < n:
            d = _horner_no_const(self._coeffs_at_q, d)
            steps += 1
        return d

    def phi_dev(self, t: float, window: int = 8) -> float:
        """phi(t) - q at full relative precision."""
        if t < 0:
            raise ValueError("t must be nonnegative")
        q = self.extinction_prob
        if t == 0.0:
            return 1.0 - q
        mu = self.mean
        n0 = max(0, math.ceil((math.log(t) + 10.0 * math.log(10.0)) / math.log(mu)))
        vals = [self._orbit_dev(t / mu ** (n0 + k), n0 + k) for k in range(window)]
        limit, _, _ = aitken_limit(vals, 1e-13)
        return limit

    def poincare_phi(self, t: float) -> float:
        """Laplace transform of W: phi(t) = lim f_n(exp(-t / mu**n))."""
        return self.extinction_prob + self.phi_dev(t)

    def Q_dev(self, d: float, max_iter: int = 400) -> float:
        """Schroeder function through the deviation: Q(q + d) = lim d_m / gamma**m."""
        vals = []
        cur = d
        scale = 1.0
        for m in range(max_iter):
            vals.append(cur / scale)
            if m >= 2 and abs(vals[-1] - vals[-2]) <= 1e-15 * abs(vals[-1]):
                break
            cur = _horner_no_const(self._coeffs_at_q, cur)
            scale *= self.gamma
        limit, _, _ = aitken_limit(vals[-8:], 1e-12)
        return limit

    def schroeder_Q(self, s: float) -> float:
        """Q(s) = lim (f_n(s) - q) / gamma**n; Q(f(s)) = gamma Q(s), Q'(q) = 1."""
        if not 0.0 <= s < 1.0:
            raise ValueError("s must lie in [0, 1)")
        return self.Q_dev(s - self.extinction_prob)

    def schroeder_residual(self, s: float) -> float:
        return abs(self.schroeder_Q(self.f(s)) - self.gamma * self.schroeder_Q(s))

    def K(self, s: float) -> float:
        """K(s) = s**alpha Q(phi(s)); K(mu s) = K(s) since mu**alpha gamma = 1."""
        return s**self.alpha * self.Q_dev(self.phi_dev(s))

    def harris_ratio(self, s: float) -> float:
        """(phi(s) - q) s**alpha / K(s) -> 1 as s -> infinity.

        The survival part phi - q is the transform contribution of W on
        non-extinction; the extinction atom q carries no s**-alpha decay and
        must be removed before normalizing.
        """
        dev = self.phi_dev(s)
        return dev / self.Q_dev(dev)

    # -- Monte Carlo -------------------------------------------------------

    def simulate_counts(self, n_samples: int, generations: int,
                        rng: np.random.Generator,
                        cap: int = 10_000_000) -> np.ndarray:
        """Population sizes Z_generations from Z_0 = 1, aggregated per
        generation with vectorized multinomial offspring draws.

        Populations hitting the cap stay there; with bounded offspring and
        the horizons used here the cap is never reached in practice.
        """
        z = np.ones(n_samples, dtype=np.int64)
        pv = np.asarray(self.probs)
        weights = np.arange(len(self.probs), dtype=np.int64)
        for _ in range(generations):
            counts = rng.multinomial(z, pv)
            z = counts @ weights
            np.clip(z, 0, cap, out=z)
        return z

    def mc_small_value_rows(self, counts: np.ndarray, generations: int,
                            n_values, z_values):
        """Rows (n, z, ratio, se) with ratio = P(0 < Z_N <= z mu**(N-n)) / x**alpha
        at x = z / mu**n; the ratio stabilizes in n once 1 << n << N."""
        mu = self.mean
        alive = np.sort(counts[counts > 0])
        total = counts.size
        rows = []
        for n in n_values:
            for z in z_values:
                thr = z * mu ** (generations - n)
                hits = np.searchsorted(alive, thr, side="right")
                prob = hits / total
                x = z / mu**n
                se = math.sqrt(max(prob * (1 - prob), 1e-300) / total) / x**self.alpha
                rows.append([int(n), float(z), prob / x**self.alpha, se])
        return ["n", "z", "small_value_ratio", "se"], rows
