"""Limit estimation, periodic fitting, and the four verification suites."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from logtail.core import GeometricGrid, PeriodicFn, SlowlyVaryingFn, UNIT_SV
from logtail.laplace import (
    AtomGenerator,
    DensitySegment,
    StieltjesMeasure,
)
from logtail.models.counterexample import excursion_function, excursion_height
from logtail.models.stpetersburg import StPetersburg
from logtail.operators import apply_A
from logtail.tauberian import (
    aitken_limit,
    bd_equivalence_suite,
    estimate_tail_limit,
    estimate_transform_limit,
    fit_periodic,
    verify_karamata_suite,
    verify_monotone_density,
    verify_tauberian,
)

LOG_ELL = SlowlyVaryingFn(kind="log-power")


def coslog_pair(rho, amp, r, phase=0.0):
    """U(x) = x^rho p(x) and its exact density u = U'."""
    p = PeriodicFn.coslog(1.0, amp, r, phase=phase)
    omega = 2.0 * math.pi / math.log(r)

    def U(x):
        return x**rho * p.value(x)

    def u(x):
        theta = omega * math.log(x) + phase
        return x ** (rho - 1) * (rho * (1 + amp * math.cos(theta))
                                 - amp * omega * math.sin(theta))

    return p, U, u


# -- sequence acceleration ----------------------------------------------------


def test_aitken_limit_geometric():
    seq = [2.0 + 0.5 * 0.3**n for n in range(12)]
    lim, converged, gap = aitken_limit(seq, 1e-10)
    assert converged
    assert lim == pytest.approx(2.0, abs=1e-12)
    assert gap < 1e-10


def test_aitken_limit_flags_non_convergence():
    for seq in ([math.log(n + 2) for n in range(14)],
                [math.sin(1.7 * n) for n in range(14)]):
        _, converged, _ = aitken_limit(seq, 1e-6)
        assert not converged


def test_aitken_limit_exact_constant():
    lim, converged, gap = aitken_limit([3.0] * 6, 1e-12)
    assert converged and lim == 3.0 and gap == 0.0


@settings(max_examples=30)
@given(st.floats(min_value=0.1, max_value=5),
       st.floats(min_value=0.01, max_value=2),
       st.booleans(),
       st.floats(min_value=0.05, max_value=0.7))
def test_aitken_limit_recovers_geometric_families(a, c, neg, q):
    seq = [a + (-c if neg else c) * q**n for n in range(14)]
    lim, converged, _ = aitken_limit(seq, 1e-8)
    assert converged
    assert lim == pytest.approx(a, abs=1e-6 * max(1.0, abs(a), abs(c)))


# -- limit estimation ----------------------------------------------------------


def test_estimate_tail_limit_exact_power_periodic():
    # amp 0.03 keeps x^rho p(x) genuinely nondecreasing (a (omega + rho) < rho)
    p, U, _ = coslog_pair(0.5, 0.03, 2.0)
    grid = GeometricGrid.default(2.0, n_z=16, n_range=(0, 12))
    est = estimate_tail_limit(U, UNIT_SV, 0.5, grid)
    assert est.converged_mask.all()
    for z, lim in zip(est.z_points, est.limits):
        assert lim == pytest.approx(p.value(z), rel=1e-9)
    assert est.monotone_ok
    assert not est.is_unbounded()
    header, rows = est.to_rows()
    assert header == ["z", "limit", "converged", "gap", "note"]
    assert len(rows) == len(est.z_points)


def test_estimate_tail_limit_with_slowly_varying_factor():
    # U = sqrt(x) log2(x) p(x): the log factor must be divided out exactly
    p = PeriodicFn.coslog(1.0, 0.1, 4.0)
    ell = SlowlyVaryingFn(kind="log-power", base=2.0)
    U = lambda x: math.sqrt(x) * (math.log2(x)) * p.value(x)
    grid = GeometricGrid.default(4.0, n_z=8, n_range=(5, 25))
    est = estimate_tail_limit(U, ell, 0.5, grid)
    assert est.converged_mask.all()
    for z, lim in zip(est.z_points, est.limits):
        assert lim == pytest.approx(p.value(z), rel=1e-3)


def test_estimate_transform_limit_exact():
    q = PeriodicFn.coslog(2.0, 0.15, 2.0)
    Uhat = lambda s: s**-0.5 * q.value(s)
    grid = GeometricGrid.default(2.0, n_z=12, n_range=(0, 10))
    est = estimate_transform_limit(Uhat, UNIT_SV, 0.5, grid)
    assert est.converged_mask.all()
    for z, lim in zip(est.z_points, est.limits):
        assert lim == pytest.approx(q.value(z), rel=1e-9)
    assert est.side == "transform"


def test_estimate_direction_validation():
    grid = GeometricGrid.default(2.0, n_z=4, n_range=(0, 4))
    with pytest.raises(ValueError):
        estimate_tail_limit(lambda x: x, UNIT_SV, 1.0, grid, direction="sideways")
    with pytest.raises(ValueError):
        estimate_transform_limit(lambda s: s, UNIT_SV, 1.0, grid, direction="up")


def test_monotone_spot_check_catches_decay():
    # rho > 0 defaults to a nondecreasing check; a decreasing U must flag it
    grid = GeometricGrid.default(2.0, n_z=6, n_range=(0, 10))
    est = estimate_tail_limit(lambda x: x**-0.5, UNIT_SV, -0.5, grid,
                              monotone="nondecreasing")
    assert not est.monotone_ok


def test_excursions_record_unbounded_windows():
    # limits are identically 1 but higher and higher spikes live in the
    # windows [(1+1/n) 2^n, (1+2/n) 2^n): the estimator must notice
    grid = GeometricGrid.default(2.0, n_z=16, n_range=(0, 12))
    est = estimate_tail_limit(excursion_function, UNIT_SV, 0.0, grid,
                              monotone="skip")
    conv = est.converged_mask
    # z-points whose window is hit late in the short lattice stay unconverged
    assert conv.sum() >= 12
    assert np.allclose(est.limits[conv], 1.0, atol=1e-9)
    by_n = dict(zip(est.n_values, est.excursions))
    for n in range(4, 12):
        assert by_n[n] == pytest.approx(excursion_height(n))
    assert est.is_unbounded()


def test_excursion_function_window_values():
    for n in (3, 7, 19, 30):
        lo, hi = (1 + 1 / n) * 2.0**n, (1 + 2 / n) * 2.0**n
        mid = 0.5 * (lo + hi)
        assert excursion_function(mid) == float(n)
        assert excursion_function(lo * 0.99) == 1.0
        assert excursion_function(hi * 1.01) == 1.0
        assert 2.0**n < lo < hi < 2.0 ** (n + 1)
    assert excursion_height(2) == 1.0


# -- periodic fitting -----------------------------------------------------------


def test_fit_periodic_recovers_fourier():
    r = 2.0
    p = PeriodicFn.coslog(1.0, 0.12, r, phase=0.4)
    z = np.exp(np.linspace(0, math.log(r), 24, endpoint=False))
    v = np.array([p.value(float(x)) for x in z])
    fit, kind, res = fit_periodic(z, v, r)
    assert kind == "fourier"
    assert res < 1e-10
    for x in (1.05, 1.5, 1.95):
        assert fit.value(x) == pytest.approx(p.value(x), abs=1e-8)


def test_fit_periodic_recovers_power():
    r = 4.0
    z = np.exp(np.linspace(0, math.log(r), 20, endpoint=False))
    v = z**0.7
    fit, kind, res = fit_periodic(z, v, r)
    assert kind == "power"
    assert res < 1e-10
    assert fit.value(2.0) == pytest.approx(2.0**0.7, rel=1e-9)


def test_fit_periodic_falls_back_to_table():
    rng = np.random.default_rng(5)
    z = np.exp(np.linspace(0, math.log(2.0), 16, endpoint=False))
    v = rng.uniform(0.5, 1.5, size=16)
    fit, kind, res = fit_periodic(z, v, 2.0)
    assert kind == "table-step"
    assert res == 0.0
    for x, val in zip(z, v):
        assert fit.value(float(x)) == pytest.approx(val, rel=1e-12)


# -- tauberian suite ------------------------------------------------------------


def test_verify_tauberian_power_periodic_pair():
    # U = x p(x) pairs with Uhat = s^-1 (A_1 p)(s)
    rho, r, amp = 1.0, 2.0, 0.08
    p, U, _ = coslog_pair(rho, amp, r)
    q = apply_A(rho, p)
    Uhat = lambda s: s**-rho * q.value(s)
    grid = GeometricGrid.default(r, n_z=10, n_range=(0, 25))
    rep = verify_tauberian((U, Uhat), UNIT_SV, rho, grid)
    assert rep.verdict == "pass", rep.render_text()
    names = [c.name for c in rep.clauses]
    assert "transform-match" in names
    assert "tail-limit-class" in names


def test_verify_tauberian_rho0_constants():
    mu = StieltjesMeasure(atoms=((1.0, 1.2), (3.0, 0.8)))
    grid = GeometricGrid.default(2.0, n_z=6, n_range=(2, 20))
    rep = verify_tauberian(mu, UNIT_SV, 0.0, grid)
    assert rep.verdict == "pass", rep.render_text()
    byname = {c.name: c for c in rep.clauses}
    assert "tail-equals-transform" in byname


def test_verify_tauberian_measure_route_stp():
    model = StPetersburg(0.5)
    grid = GeometricGrid.default(model.r, n_z=8, n_range=(0, 25))
    rep = verify_tauberian(model.measure, UNIT_SV, 0.0, grid, tol=5e-3)
    # distribution functions have rho = 0 on the U side: U -> total mass 1
    assert rep.verdict == "pass", rep.render_text()


def test_verify_tauberian_rejects_negative_rho():
    grid = GeometricGrid.default(2.0, n_z=4, n_range=(0, 4))
    with pytest.raises(ValueError):
        verify_tauberian((lambda x: x, lambda s: s), UNIT_SV, -0.5, grid)


def test_verify_tauberian_corrupted_transform_fails():
    # scale the transform by 2% and keep everything else: the operator
    # comparison must fail, not go inconclusive
    rho, r, amp = 1.0, 2.0, 0.08
    p, U, _ = coslog_pair(rho, amp, r)
    q = apply_A(rho, p)
    grid = GeometricGrid.default(r, n_z=10, n_range=(0, 25))
    rep = verify_tauberian((U, lambda s: 1.02 * s**-rho * q.value(s)),
                           UNIT_SV, rho, grid)
    assert rep.verdict == "fail"
    bad = {c.name for c in rep.clauses if c.status == "fail"}
    assert "transform-match" in bad


# -- karamata suite --------------------------------------------------------------


def test_karamata_direct_mode():
    _, _, u = coslog_pair(0.5, 0.002, 2.0)
    grid = GeometricGrid.default(2.0, n_z=6, n_range=(0, 30))
    rep = verify_karamata_suite(u, UNIT_SV, 0.5, "direct", grid)
    assert rep.verdict == "pass", rep.render_text()


def test_karamata_rho0_mode():
    # U = 3 log x is itself slowly varying: ell stays the unit factor,
    # U/ell diverges, and x u(x)/ell -> 3
    u = lambda y: 3.0 / max(y, 1.0)
    grid = GeometricGrid.default(2.0, n_z=6, n_range=(0, 35))
    rep = verify_karamata_suite(u, UNIT_SV, 0.0, "rho0", grid)
    assert rep.verdict == "pass", rep.render_text()
    names = {c.name for c in rep.clauses}
    assert "integral-slowly-varying" in names
    assert "integral-dominates-ell" in names


def test_karamata_rho_negative_mode():
    # U = x^-1/2 p(x) decays, so the density is -U'
    _, _, du = coslog_pair(-0.5, 0.002, 2.0)
    u = lambda x: -du(x)
    grid = GeometricGrid.default(2.0, n_z=6, n_range=(0, 30))
    rep = verify_karamata_suite(u, UNIT_SV, -0.5, "rho-negative", grid)
    assert rep.verdict == "pass", rep.render_text()


def test_karamata_at_zero_mode():
    ell0 = SlowlyVaryingFn(orientation="at-zero")
    _, _, u = coslog_pair(0.5, 0.002, 2.0)
    grid = GeometricGrid.default(2.0, n_z=6, n_range=(0, 30))
    rep = verify_karamata_suite(u, ell0, 0.5, "at-zero", grid)
    assert rep.verdict == "pass", rep.render_text()


def test_karamata_mode_validation():
    grid = GeometricGrid.default(2.0, n_z=4, n_range=(0, 4))
    with pytest.raises(ValueError):
        verify_karamata_suite(lambda x: 1.0, UNIT_SV, 0.5, "backwards", grid)
    with pytest.raises(ValueError):
        verify_karamata_suite(lambda x: 1.0, UNIT_SV, 0.5, "rho-negative", grid)


# -- monotone density -------------------------------------------------------------


def test_monotone_density_recovers_density_modulation():
    rho, r, amp = 0.5, 2.0, 0.002
    p, U, u = coslog_pair(rho, amp, r)
    grid = GeometricGrid.default(r, n_z=8, n_range=(0, 25))
    rep = verify_monotone_density(U, u, UNIT_SV, rho, grid)
    assert rep.verdict == "pass", rep.render_text()


def test_monotone_density_corrupted_density_fails():
    rho, r, amp = 0.5, 2.0, 0.002
    p, U, u = coslog_pair(rho, amp, r)
    grid = GeometricGrid.default(r, n_z=8, n_range=(0, 25))
    rep = verify_monotone_density(U, lambda x: 1.03 * u(x), UNIT_SV, rho, grid)
    assert rep.verdict == "fail"
    bad = {c.name for c in rep.clauses if c.status == "fail"}
    assert "integral-consistency" in bad


def test_monotone_density_rejects_negative_rho():
    grid = GeometricGrid.default(2.0, n_z=4, n_range=(0, 4))
    with pytest.raises(ValueError):
        verify_monotone_density(lambda x: x, lambda x: 1.0, UNIT_SV, -0.5, grid)


# -- bd equivalence ---------------------------------------------------------------


def test_bd_m0_st_petersburg():
    model = StPetersburg(0.5)
    grid = GeometricGrid.default(model.r, n_z=8, n_range=(0, 25))
    rep = bd_equivalence_suite(model.measure, 0, 0.5, grid)
    assert rep.verdict == "pass", rep.render_text()
    names = {c.name for c in rep.clauses}
    assert "remainder-routes-agree" in names
    assert "tail-transform-consistency" in names


def test_bd_m1_geometric_tail():
    # alpha = 1.5: finite mean, geometric atoms at 4^n with mass 8^-n
    F = StieltjesMeasure(generators=(
        AtomGenerator.geometric(1.0, 4.0, 1.0, 0.125),))
    # the alternating-sum remainder f_1 ~ s^1.5 cancels against rounding
    # noise below s ~ 4^-12, so stay shallow
    grid = GeometricGrid.default(4.0, n_z=8, n_range=(0, 10))
    rep = bd_equivalence_suite(F, 1, 0.5, grid)
    assert rep.verdict == "pass", rep.render_text()
    names = {c.name for c in rep.clauses}
    assert "remainder-derivative-identity" in names


def test_bd_degenerate_when_all_moments_finite():
    F = StieltjesMeasure(atoms=((1.0, 1.0),))
    grid = GeometricGrid.default(2.0, n_z=6, n_range=(0, 20))
    rep = bd_equivalence_suite(F, 0, 0.5, grid)
    assert rep.verdict == "pass"
    assert rep.params.get("status") == "degenerate"


def test_bd_beta_one_with_log_factor():
    F = StieltjesMeasure(densities=(DensitySegment(1.0, math.inf,
                                                   lambda y: 3.0 * y**-2),))
    # the transform constant approaches 3 only like 1/log(1/s):
    # beta = 1 needs a deep lattice (the kernel route has no cancellation)
    grid = GeometricGrid.default(2.0, n_z=6, n_range=(0, 60))
    rep = bd_equivalence_suite(F, 0, 1.0, grid, ell=LOG_ELL)
    assert rep.verdict == "pass", rep.render_text()
    names = {c.name for c in rep.clauses}
    assert "truncated-moment-constant" in names


def test_bd_argument_validation():
    grid = GeometricGrid.default(2.0, n_z=4, n_range=(0, 4))
    F = StieltjesMeasure(atoms=((1.0, 1.0),))
    with pytest.raises(ValueError):
        bd_equivalence_suite(F, 2, 0.5, grid)
    with pytest.raises(ValueError):
        bd_equivalence_suite(F, 0, 1.5, grid)
    # infinite mean: the m = 1 moment diverges
    with pytest.raises(ArithmeticError):
        bd_equivalence_suite(StPetersburg(0.5).measure, 1, 0.0, grid)


# -- report plumbing ---------------------------------------------------------------


def test_report_render_and_verdict():
    _, _, u = coslog_pair(0.5, 0.002, 2.0)
    grid = GeometricGrid.default(2.0, n_z=6, n_range=(0, 30))
    rep = verify_karamata_suite(u, UNIT_SV, 0.5, "direct", grid)
    text = rep.render_text()
    assert "karamata" in text
    assert "PASS" in text
    doc = rep.to_json()
    assert doc["verdict"] == "pass"
    assert isinstance(doc["clauses"], list) and doc["clauses"]
