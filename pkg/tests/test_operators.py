"""Transform-side operators: identities, multipliers, inversion accuracy."""

import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gamma as Gamma, loggamma

from logtail import operators as op
from logtail.core import PeriodicFn, QClassFn
from logtail.operators import (
    OperatorDomainError,
    apply_A,
    apply_A_inv,
    apply_B,
    apply_B_inv,
    chain_p_from_q,
    chain_q_from_p,
    tabulate_with_snap,
)


def period_grid(r, n=64):
    return np.exp(np.linspace(0.0, math.log(r), n, endpoint=False))


def sup_err(f, g, r, n=64):
    return max(abs(f.value(float(z)) - g.value(float(z))) for z in period_grid(r, n))


# -- action on constants -------------------------------------------------------


@pytest.mark.parametrize("rho", [0.1, 0.5, 0.9, 1.7])
def test_A_of_constant_is_gamma(rho):
    q = apply_A(rho, PeriodicFn.constant(2.0, 2.0))
    for z in period_grid(2.0, 16):
        assert q.value(float(z)) == pytest.approx(2.0 * Gamma(rho + 1), rel=1e-9)


@pytest.mark.parametrize("rho", [-1.0, -0.5, 0.5, 1.0])
def test_B_of_constant_is_reciprocal_rho(rho):
    b = apply_B(rho, PeriodicFn.constant(3.0, 4.0))
    for z in period_grid(4.0, 16):
        assert b.value(float(z)) == pytest.approx(3.0 / abs(rho), rel=1e-13)


# -- closed-form values ----------------------------------------------------------


def test_B_half_of_sqrt_closed_form():
    b = apply_B(0.5, PeriodicFn.power(1.0, 0.5, 4.0))
    assert b.value(1.0) == pytest.approx(3.0, rel=1e-12)
    assert b.value(2.0) == pytest.approx(2.0 * math.sqrt(2.0), rel=1e-12)
    assert b.value(3.0) == pytest.approx(5.0 / math.sqrt(3.0), rel=1e-12)


# -- Fourier multipliers ----------------------------------------------------------


@pytest.mark.parametrize("rho,r", [(0.5, 2.0), (0.75, 16.0), (-0.5, 4.0)])
def test_B_attenuates_first_harmonic_exactly(rho, r):
    a = 0.04
    omega = 2.0 * math.pi / math.log(r)
    b = apply_B(rho, PeriodicFn.coslog(1.0, a, r))
    lo, hi = b.min_max()
    assert (hi - lo) / 2 == pytest.approx(a / abs(complex(rho, omega)), rel=1e-6)
    assert (hi + lo) / 2 == pytest.approx(1.0 / abs(rho), rel=1e-9)


@pytest.mark.parametrize("rho,r", [(0.5, 2.0), (0.75, 16.0)])
def test_A_multiplier_is_gamma_ratio(rho, r):
    a = 0.04
    omega = 2.0 * math.pi / math.log(r)
    q = apply_A(rho, PeriodicFn.coslog(1.0, a, r))
    lo, hi = q.q.min_max()
    want = a * abs(cmath.exp(loggamma(complex(rho + 1, omega))))
    assert (hi - lo) / 2 == pytest.approx(want, rel=1e-6)
    assert (hi + lo) / 2 == pytest.approx(Gamma(rho + 1), rel=1e-9)


def test_chain_total_attenuation_alpha_quarter():
    # alpha = 1/4, r = 16: |B_hat(1) A_hat(1)| relative to the k = 0 mass
    rho, r = 0.75, 16.0
    omega = 2.0 * math.pi / math.log(r)
    rel = (abs(1.0 / complex(rho, omega))
           * abs(cmath.exp(loggamma(complex(rho + 1, omega))))
           * rho / Gamma(rho + 1))
    assert rel == pytest.approx(0.0712828488167695, abs=1e-12)

    a = 0.02
    q = chain_q_from_p(0.25, PeriodicFn.coslog(1.0, a, r))
    lo, hi = q.q.min_max()
    assert ((hi - lo) / 2) / ((hi + lo) / 2) / a == pytest.approx(rel, rel=1e-5)


# -- periodicity of outputs --------------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(st.floats(min_value=0.1, max_value=100.0))
def test_operator_outputs_are_periodic(s):
    p = PeriodicFn.coslog(1.0, 0.1, 2.0)
    b = apply_B(0.5, p)
    assert b.value(2.0 * s) == pytest.approx(b.value(s), rel=1e-10)
    q = apply_A(0.5, p)
    assert q.value(2.0 * s) == pytest.approx(q.value(s), rel=1e-10)


# -- exact roundtrip B_inv B ---------------------------------------------------------


@pytest.mark.parametrize("rho", [0.5, -0.5, 1.3])
def test_B_inv_undoes_B_smooth(rho):
    p = PeriodicFn.coslog(1.0, 0.2, 4.0, phase=0.9)
    back = apply_B_inv(rho, apply_B(rho, p))
    assert sup_err(back, p, 4.0) < 1e-10


@settings(max_examples=20, deadline=None)
@given(st.floats(min_value=1.0, max_value=3.999),
       st.floats(min_value=0.01, max_value=0.3),
       st.floats(min_value=0.0, max_value=6.28))
def test_B_roundtrip_pointwise(z, amp, phase):
    p = PeriodicFn.coslog(1.0, amp, 4.0, phase=phase)
    back = apply_B_inv(0.5, apply_B(0.5, p))
    assert back.value(z) == pytest.approx(p.value(z), rel=1e-9)


# -- Gaver-Stehfest and A inversion ----------------------------------------------


def test_gs_point_inversion_frozen():
    got = op._gs_invert(lambda s: 1.0 / (s + 1.0), 1.0, 8, 40)
    assert got == pytest.approx(0.3678793715188221, abs=1e-12)
    assert abs(got - math.exp(-1.0)) < 1e-7


def test_A_inv_recovers_smooth_p():
    p = PeriodicFn.coslog(1.0, 0.3, 2.0)
    back = apply_A_inv(0.75, apply_A(0.75, p))
    assert sup_err(back, p, 2.0, n=128) < 1e-7  # measured 2.4e-8


def test_A_inv_recovers_constant():
    c = 1.7
    back = apply_A_inv(0.5, apply_A(0.5, PeriodicFn.constant(c, 2.0)))
    assert sup_err(back, PeriodicFn.constant(c, 2.0), 2.0, n=128) < 1e-7


def test_A_inv_diagnostics_shape():
    q = apply_A(0.75, PeriodicFn.coslog(1.0, 0.3, 2.0))
    back, diag = apply_A_inv(0.75, q, return_diagnostics=True)
    assert diag.modes_kept >= 1
    assert diag.grid_n >= 16
    assert not diag.eckhoff_applied  # smooth input: no wrap jump to model
    assert back.is_continuous()


def test_chain_roundtrip_smooth():
    p = PeriodicFn.coslog(1.0, 0.057, 16.0)
    back = chain_p_from_q(0.25, chain_q_from_p(0.25, p))
    assert sup_err(back, p, 16.0, n=32) < 2e-6  # measured 3.7e-7


def test_chain_roundtrip_wrap_jump():
    # sqrt(z) has a wrap discontinuity; Eckhoff completion keeps the interior
    # tight and the jump neighborhood bounded
    p = PeriodicFn.power(1.0, 0.5, 4.0)
    back = chain_p_from_q(0.5, chain_q_from_p(0.5, p))
    zs = period_grid(4.0, 64)
    errs = np.array([abs(back.value(float(z)) - p.value(float(z))) for z in zs])
    assert errs.max() < 5e-3        # measured 1.35e-3
    assert errs[8:-8].max() < 1e-3  # measured 2.0e-4 away from the wrap


# -- domain errors ------------------------------------------------------------------


def test_rho_zero_is_excluded():
    p = PeriodicFn.coslog(1.0, 0.1, 2.0)
    with pytest.raises(OperatorDomainError):
        apply_B(0.0, p)
    with pytest.raises(OperatorDomainError):
        apply_B_inv(0.0, p)


def test_A_requires_positive_rho():
    p = PeriodicFn.coslog(1.0, 0.1, 2.0)
    with pytest.raises(OperatorDomainError):
        apply_A(0.0, p)
    with pytest.raises(OperatorDomainError):
        apply_A(-0.5, p)


def test_B_inv_rejects_step_tables():
    p = PeriodicFn.from_samples([1.0, 1.5], [1.0, 2.0], 2.0, mode="step")
    with pytest.raises(OperatorDomainError):
        apply_B_inv(0.5, p)


@pytest.mark.parametrize("alpha", [0.0, 1.0, 1.5, -0.2])
def test_chains_require_alpha_in_unit_interval(alpha):
    p = PeriodicFn.constant(1.0, 2.0)
    with pytest.raises(OperatorDomainError):
        chain_q_from_p(alpha, p)
    with pytest.raises(OperatorDomainError):
        chain_p_from_q(alpha, QClassFn(0.5, p))


# -- tabulation with jump snapping -----------------------------------------------


def test_tabulate_with_snap_restores_right_continuity():
    p = PeriodicFn.from_callable(lambda z: 1.0 if z < 2.0 else 2.0, 4.0,
                                 breakpoints=(2.0,), smooth=False)
    tab, report = tabulate_with_snap(p, n=64)
    assert len(report.snapped) >= 1
    assert tab.value(2.0) == pytest.approx(2.0, rel=1e-9)
    assert max(report.gaps) >= 0.5


def test_tabulate_with_snap_gentle_input_no_snaps():
    # the +-2e-3 probe sees slope as gap, so only gentle modulations are
    # guaranteed snap-free
    p = PeriodicFn.coslog(1.0, 0.04, 4.0)
    tab, report = tabulate_with_snap(p, n=64)
    assert report.snapped == ()
    assert max(report.gaps) < 1e-3
    assert sup_err(tab, p, 4.0) < 1e-6
