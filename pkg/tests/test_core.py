"""Period functions, class membership, and grids."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from logtail.core import (
    GeometricGrid,
    PeriodicFn,
    QClassFn,
    RegLogPeriodic,
    SlowlyVaryingFn,
    UNIT_SV,
    check_class_membership,
    classify_regularity,
    compute_star_limits,
    reduce_log_to_period,
    reduce_to_period,
)

PERIODS = st.sampled_from([2.0, 4.0, 16.0, math.e])
POSITIVE_X = st.floats(min_value=1e-8, max_value=1e8)


def coslog_unit(r, amplitude=0.25):
    return PeriodicFn.coslog(1.0, amplitude, r)


# -- reduction ---------------------------------------------------------------


@given(POSITIVE_X, PERIODS)
def test_reduce_to_period_lands_in_window(x, r):
    n, z = reduce_to_period(x, r)
    assert 1.0 <= z < r
    assert x == pytest.approx(r**n * z, rel=1e-12)


@given(st.floats(min_value=-600, max_value=600), PERIODS)
def test_reduce_log_matches_linear_reduction(log_x, r):
    # the pair itself is ambiguous within one ulp of a period edge, so
    # compare the recomposition rather than (n, z)
    n, z = reduce_log_to_period(log_x, r)
    assert 1.0 <= z < r
    assert n * math.log(r) + math.log(z) == pytest.approx(log_x, rel=1e-9, abs=1e-9)


def test_reduce_log_survives_huge_exponents():
    n, z = reduce_log_to_period(1e5, 2.0)
    assert 1.0 <= z < 2.0
    assert n == int(1e5 / math.log(2.0))


# -- periodicity of all constructors ----------------------------------------


@given(POSITIVE_X, PERIODS)
def test_coslog_is_multiplicatively_periodic(x, r):
    p = coslog_unit(r)
    assert p.value(r * x) == pytest.approx(p.value(x), rel=1e-12, abs=1e-12)


@given(POSITIVE_X, PERIODS, st.integers(min_value=-8, max_value=8))
def test_periodicity_across_many_periods(x, r, k):
    p = coslog_unit(r)
    assert p.value(r**k * x) == pytest.approx(p.value(x), rel=1e-9, abs=1e-12)


@given(POSITIVE_X)
def test_table_step_is_periodic(x):
    z = np.array([1.0, 1.3, 2.1, 3.0])
    v = np.array([0.5, 1.5, 0.75, 1.25])
    p = PeriodicFn.from_samples(z, v, 4.0, mode="step")
    assert p.value(4.0 * x) == p.value(x)


@given(st.floats(min_value=-600.0, max_value=600.0), PERIODS)
def test_value_from_log_matches_value(log_x, r):
    p = coslog_unit(r)
    assert p.value_from_log(log_x) == pytest.approx(
        p.value(math.exp(log_x)), rel=1e-9, abs=1e-12)


def test_constant_and_power_values():
    c = PeriodicFn.constant(2.5, 2.0)
    assert c.value(1.7) == 2.5
    # scale * z**exponent on [1, r), wrapped outside
    p = PeriodicFn.power(3.0, 0.5, 4.0)
    assert p.value(2.0) == pytest.approx(3.0 * math.sqrt(2.0))
    assert p.value(8.0) == pytest.approx(3.0 * math.sqrt(2.0))


def test_coslog_min_max_brackets_offset():
    p = PeriodicFn.coslog(2.0, 0.3, 4.0)
    lo, hi = p.min_max()
    assert lo == pytest.approx(1.7, abs=1e-6)
    assert hi == pytest.approx(2.3, abs=1e-6)


# -- jumps and continuity ----------------------------------------------------


def test_step_table_reports_jumps():
    p = PeriodicFn.from_samples([1.0, 2.0], [1.0, 3.0], 4.0, mode="step")
    js = p.jumps()
    assert len(js) == 2  # interior jump at 2.0 plus the wrap jump
    locs = sorted(b for b, _ in js)
    assert locs[0] == pytest.approx(1.0)
    assert locs[1] == pytest.approx(2.0)
    assert not p.is_continuous()


def test_linear_table_wraps_continuously():
    z = np.array([1.0, 1.5, 2.5, 3.5])
    v = np.array([1.0, 2.0, 0.5, 1.4])
    p = PeriodicFn.from_samples(z, v, 4.0, mode="linear")
    assert p.is_continuous()
    # approach the wrap from the left: must come back to v[0]
    assert p.value(3.999999) == pytest.approx(1.0, abs=1e-4)


def test_smooth_constructors_are_continuous():
    assert coslog_unit(2.0).is_continuous()
    assert PeriodicFn.constant(1.0, 2.0).is_continuous()
    assert not PeriodicFn.power(1.0, 0.5, 2.0).is_continuous()  # wrap jump


def test_deriv_matches_finite_difference():
    p = PeriodicFn.coslog(1.0, 0.3, 4.0, phase=0.7)
    for z in (1.1, 1.9, 3.2):
        h = 1e-7
        fd = (p.value(z + h) - p.value(z - h)) / (2 * h)
        assert p.deriv_in_period(z) == pytest.approx(fd, rel=1e-5)


# -- serialization -----------------------------------------------------------


@pytest.mark.parametrize("p", [
    PeriodicFn.constant(1.5, 2.0),
    PeriodicFn.power(2.0, -0.5, 4.0),
    PeriodicFn.coslog(1.0, 0.2, 16.0, phase=1.1, harmonic=2),
    PeriodicFn.from_samples([1.0, 1.5, 3.0], [1.0, 0.5, 2.0], 4.0, mode="step"),
    PeriodicFn.from_samples([1.0, 1.5, 3.0], [1.0, 0.5, 2.0], 4.0, mode="linear"),
])
def test_periodic_json_roundtrip(p):
    doc = json.loads(json.dumps(p.to_json()))
    q = PeriodicFn.from_json(doc)
    for z in np.exp(np.linspace(0, math.log(p.r), 37, endpoint=False)):
        assert q.value(float(z)) == pytest.approx(p.value(float(z)), rel=1e-12, abs=1e-12)


def test_callable_segment_not_serializable():
    p = PeriodicFn.from_callable(lambda z: 1.0 + 0.1 * z, 2.0)
    with pytest.raises(ValueError):
        p.to_json()


# -- slowly varying factors --------------------------------------------------


def test_slowly_varying_kinds():
    assert UNIT_SV(12345.0) == 1.0
    ell = SlowlyVaryingFn(kind="log-power", exponent=2.0, base=2.0)
    assert ell(8.0) == pytest.approx(9.0)
    assert ell.log_value(math.log(8.0)) == pytest.approx(math.log(9.0))
    at0 = SlowlyVaryingFn(kind="log-power", orientation="at-zero")
    assert at0(1e-3) == pytest.approx(math.log(1e3))


def test_slowly_varying_probe_and_validation():
    # log converges only like 1/log x, so the probe needs a loose rtol
    probe = SlowlyVaryingFn(kind="log-power").probe_check(rtol=0.1)
    assert probe["passed"] and probe["worst_deviation"] < 0.07
    assert SlowlyVaryingFn().probe_check()["passed"]  # constants are exact
    with pytest.raises(ValueError):
        SlowlyVaryingFn(kind="nope")
    with pytest.raises(ValueError):
        SlowlyVaryingFn(kind="constant", value=0.0)
    with pytest.raises(ValueError):
        SlowlyVaryingFn(kind="custom")


def test_slowly_varying_json_roundtrip():
    ell = SlowlyVaryingFn(kind="log-power", exponent=0.5, base=10.0,
                          orientation="at-zero")
    back = SlowlyVaryingFn.from_json(json.loads(json.dumps(ell.to_json())))
    assert back(1e-6) == pytest.approx(ell(1e-6), rel=1e-12)


# -- composite f = x^rho ell(x) p(x) ----------------------------------------


def test_rlp_value_and_log_value_agree():
    f = RegLogPeriodic(rho=-0.5, ell=SlowlyVaryingFn(kind="log-power"),
                       p=coslog_unit(2.0, 0.1))
    for x in (3.0, 1e4, 1e8):
        assert f.log_value(math.log(x)) == pytest.approx(
            math.log(f.value(x)), rel=1e-10)


def test_rlp_log_value_handles_extreme_scales():
    f = RegLogPeriodic(rho=-0.5, ell=UNIT_SV, p=coslog_unit(2.0, 0.1))
    lv = f.log_value(2000.0)  # x = e^2000 overflows in linear space
    assert lv == pytest.approx(-0.5 * 2000.0 + math.log(f.p.value_from_log(2000.0)))


def test_rlp_json_roundtrip():
    f = RegLogPeriodic(rho=1.5, ell=UNIT_SV, p=PeriodicFn.coslog(1.0, 0.2, 4.0))
    g = RegLogPeriodic.from_json(json.loads(json.dumps(f.to_json())))
    assert g.value(7.3) == pytest.approx(f.value(7.3), rel=1e-12)


# -- class membership --------------------------------------------------------


def test_p_r_membership_accepts_and_rejects():
    assert check_class_membership(coslog_unit(2.0, 0.3), "P_r").passed
    bad = PeriodicFn.coslog(1.0, 1.5, 2.0)  # dips below zero
    rep = check_class_membership(bad, "P_r")
    assert not rep.passed
    assert any("positive" in c.name or "inf" in c.name for c in rep.failing())


def test_p_r_rho_monotonicity_gate():
    # x^rho p(x) monotone iff the modulation is gentle enough
    ok = PeriodicFn.coslog(1.0, 0.03, 2.0)
    assert check_class_membership(ok, "P_r_rho", rho=-0.5).passed
    wild = PeriodicFn.coslog(1.0, 0.4, 2.0)
    assert not check_class_membership(wild, "P_r_rho", rho=-0.5).passed


def test_q_r_rho_complete_monotonicity_probe():
    from logtail.operators import apply_A, apply_B

    # a genuine A_rho B_rho image passes the probe
    q = apply_A(0.5, apply_B(0.5, PeriodicFn.coslog(1.0, 0.05, 2.0)))
    assert q.membership(tol=1e-7).passed
    # a raw large oscillation does not correspond to any CM transform
    fake = QClassFn(0.5, PeriodicFn.coslog(1.0, 0.9, 2.0))
    assert not fake.membership(tol=1e-7).passed


def test_qclassfn_rejects_negative_rho():
    with pytest.raises(ValueError):
        QClassFn(-0.1, PeriodicFn.constant(1.0, 2.0))


def test_membership_unknown_class():
    with pytest.raises(ValueError):
        check_class_membership(coslog_unit(2.0), "P_q")


# -- star limits and regularity classification -------------------------------


def test_star_limits_constant_p_is_pure_power():
    f = RegLogPeriodic(rho=0.7, ell=UNIT_SV, p=PeriodicFn.constant(2.0, 2.0))
    s = compute_star_limits(f, 3.0)
    assert s.upper == pytest.approx(3.0**0.7, rel=1e-9)
    assert s.lower == pytest.approx(3.0**0.7, rel=1e-9)


def test_star_limits_bracket_modulation():
    p = PeriodicFn.coslog(1.0, 0.2, 2.0)
    f = RegLogPeriodic(rho=0.0, ell=UNIT_SV, p=p)
    s = compute_star_limits(f, 1.4142135623730951)
    assert s.upper == pytest.approx(1.2 / 0.8, rel=1e-3)
    assert s.lower == pytest.approx(0.8 / 1.2, rel=1e-3)
    assert s.lower <= 1.0 <= s.upper


def test_star_limits_at_period_are_trivial():
    p = PeriodicFn.coslog(1.0, 0.2, 2.0)
    f = RegLogPeriodic(rho=0.3, ell=UNIT_SV, p=p)
    s = compute_star_limits(f, 2.0)  # lambda = r: p cancels exactly
    assert s.upper == pytest.approx(2.0**0.3, rel=1e-9)
    assert s.lower == pytest.approx(2.0**0.3, rel=1e-9)


def test_classify_regularity_three_way():
    const = RegLogPeriodic(0.5, UNIT_SV, PeriodicFn.constant(1.0, 2.0))
    assert classify_regularity(const).classification == "regularly-varying"

    smooth = RegLogPeriodic(0.5, UNIT_SV, coslog_unit(2.0, 0.1))
    rep = classify_regularity(smooth)
    assert rep.classification == "extended-rv"
    assert rep.p_lipschitz and not rep.p_constant

    step = RegLogPeriodic(0.5, UNIT_SV, PeriodicFn.from_samples(
        [1.0, 1.5], [1.0, 2.0], 2.0, mode="step"))
    assert classify_regularity(step).classification == "o-rv"


# -- grids -------------------------------------------------------------------


def test_geometric_grid_default_shape():
    g = GeometricGrid.default(2.0, n_z=16, n_range=(0, 10))
    assert g.n_min == 0 and g.n_max == 10
    zs = np.asarray(g.z_points)
    assert zs.min() >= 1.0 and zs.max() < 2.0
    assert len(zs) >= 16


def test_geometric_grid_includes_breakpoint_neighborhoods():
    p = PeriodicFn.from_samples([1.0, 1.5], [1.0, 2.0], 2.0, mode="step")
    g = GeometricGrid.default(2.0, fns=(p,), n_z=8)
    zs = np.asarray(g.z_points)
    assert any(abs(z - 1.5) < 1e-8 and z < 1.5 for z in zs)
    assert any(abs(z - 1.5) < 1e-8 and z > 1.5 for z in zs)


def test_geometric_grid_rejects_bad_period():
    with pytest.raises(ValueError):
        GeometricGrid.default(1.0)


@settings(max_examples=25)
@given(PERIODS, st.integers(min_value=1, max_value=6))
def test_grid_points_stay_inside_period(r, n_z):
    g = GeometricGrid.default(r, n_z=n_z)
    assert all(1.0 <= z < r for z in g.z_points)
