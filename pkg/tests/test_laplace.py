"""Stieltjes measures, transforms, moments, remainder routes."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import expn, gamma as Gamma

from logtail.core import GeometricGrid, PeriodicFn
from logtail.laplace import (
    AtomGenerator,
    DensitySegment,
    DivergenceError,
    SelfSimilarPart,
    StieltjesMeasure,
    ls_transform,
    ls_transform_with_bound,
    moment,
    moment_remainders,
    sample_on_grid,
    selfsimilar_integral,
    truncated_moment,
    weighted_transform,
)
from logtail.models.stpetersburg import StPetersburg


def geometric_measure(x0=1.0, loc_ratio=4.0, m0=1.0, mass_ratio=0.125):
    # alpha = -log(mass_ratio)/log(loc_ratio) = 1.5 for the defaults
    return StieltjesMeasure(generators=(
        AtomGenerator.geometric(x0, loc_ratio, m0, mass_ratio),))


# -- transforms of atomic measures -------------------------------------------


def test_finite_atoms_transform_is_exact():
    mu = StieltjesMeasure(atoms=((1.0, 0.3), (2.0, 0.7)))
    for s in (0.1, 1.0, 10.0):
        want = 0.3 * math.exp(-s) + 0.7 * math.exp(-2 * s)
        assert ls_transform(mu, s) == pytest.approx(want, rel=1e-14)


def test_geometric_generator_transform_matches_partial_sum():
    mu = geometric_measure()
    s = 0.01
    direct = sum(0.125**n * math.exp(-s * 4.0**n) for n in range(200))
    assert ls_transform(mu, s) == pytest.approx(direct, rel=1e-12)


def test_transform_with_bound_brackets_truth():
    mu = geometric_measure()
    s = 0.05
    val, bound = ls_transform_with_bound(mu, s)
    direct = sum(0.125**n * math.exp(-s * 4.0**n) for n in range(200))
    assert abs(val - direct) <= bound + 1e-15
    assert bound < 1e-8 * abs(val)


@given(st.floats(min_value=1e-4, max_value=10.0),
       st.floats(min_value=1e-4, max_value=10.0))
def test_transform_is_decreasing_in_s(s1, s2):
    mu = StieltjesMeasure(atoms=((0.5, 1.0), (3.0, 2.0)))
    lo, hi = sorted((s1, s2))
    assert ls_transform(mu, hi) <= ls_transform(mu, lo) + 1e-15


# -- moments ------------------------------------------------------------------


def test_geometric_moment_closed_form():
    mu = geometric_measure()  # sum 0.125^n (4^n)^k = 1/(1 - 4^(k-1.5))
    for k in (0.0, 0.5, 1.0, 1.4):
        want = 1.0 / (1.0 - 4.0 ** (k - 1.5))
        assert moment(mu, k) == pytest.approx(want, rel=1e-12)


def test_moment_diverges_at_tail_index():
    mu = geometric_measure()
    with pytest.raises(DivergenceError):
        moment(mu, 1.5)
    with pytest.raises(DivergenceError):
        moment(mu, 2.0)


def test_truncated_moment_geometric():
    mu = geometric_measure()
    # atoms at 4^n with mass 8^-n; truncation at 4^2 keeps n <= 2 below
    below = truncated_moment(mu, 1.0, 16.0, side="below")
    assert below == pytest.approx(sum(0.125**n * 4.0**n for n in range(3)), rel=1e-12)
    above = truncated_moment(mu, 1.0, 16.0, side="above")
    assert above == pytest.approx(sum(0.5**n for n in range(3, 60)), rel=1e-12)
    with pytest.raises(DivergenceError):
        truncated_moment(mu, 1.5, 16.0, side="above")


def test_truncated_moment_respects_atom_at_cut():
    mu = StieltjesMeasure(atoms=((2.0, 1.0), (4.0, 1.0)))
    assert truncated_moment(mu, 0.0, 2.0, side="below") == pytest.approx(1.0)
    assert truncated_moment(mu, 0.0, 2.0, side="above") == pytest.approx(1.0)


def test_stp_truncated_moment_matches_tail():
    model = StPetersburg(0.5)
    for x in (3.0, 17.0, 1000.0):
        assert truncated_moment(model.measure, 0.0, x, side="above") == \
            pytest.approx(model.tail(x), rel=1e-12)


# -- density segments ----------------------------------------------------------


def test_density_transform_matches_exponential_integral():
    mu = StieltjesMeasure(densities=(DensitySegment(1.0, math.inf, lambda y: y**-2),))
    assert moment(mu, 0.0) == pytest.approx(1.0, rel=1e-10)
    for s in (0.5, 1.0, 2.0):
        assert ls_transform(mu, s) == pytest.approx(float(expn(2, s)), rel=1e-9)
    assert truncated_moment(mu, 0.0, 7.0, side="above") == pytest.approx(1 / 7, rel=1e-9)


# -- self-similar parts --------------------------------------------------------


def test_selfsimilar_density_closed_forms():
    w = PeriodicFn.constant(1.0, 2.0)
    s = 0.37
    # int (1 - e^-sy) y^(-3/2) dy = 2 sqrt(pi s)
    got = selfsimilar_integral(s, 2.0, -0.5, w, (), kernel="one_minus_exp", power=0.0)
    assert got == pytest.approx(2.0 * math.sqrt(math.pi * s), rel=1e-9)
    # int e^-sy y^(-1/2) dy = sqrt(pi / s)
    got = selfsimilar_integral(s, 2.0, -0.5, w, (), kernel="exp", power=1.0)
    assert got == pytest.approx(math.sqrt(math.pi / s), rel=1e-9)


def test_selfsimilar_atom_lattice_matches_bilateral_sum():
    s = 0.73
    got = selfsimilar_integral(s, 2.0, -0.5, None, ((1.0, 1.0),),
                               kernel="one_minus_exp", power=0.0)
    want = sum(2.0 ** (-0.5 * k) * -math.expm1(-s * 2.0**k) for k in range(-80, 80))
    assert got == pytest.approx(want, rel=1e-10)


def test_selfsimilar_divergent_kernels_raise():
    w = PeriodicFn.constant(1.0, 2.0)
    with pytest.raises(DivergenceError):
        selfsimilar_integral(1.0, 2.0, -0.5, w, (), kernel="exp", power=0.0)
    with pytest.raises(DivergenceError):
        selfsimilar_integral(1.0, 2.0, 0.5, w, (), kernel="one_minus_exp", power=0.0)


def test_selfsimilar_validation():
    with pytest.raises(ValueError):
        SelfSimilarPart(2.0, -0.5, w=PeriodicFn.constant(1.0, 4.0))
    with pytest.raises(ValueError):
        SelfSimilarPart(2.0, -0.5, atoms=((2.5, 1.0),))
    mu = StieltjesMeasure(selfsimilar=SelfSimilarPart(2.0, -0.5, atoms=((1.0, 1.0),)))
    assert not mu.finite_total_mass()


# -- weighted transforms -------------------------------------------------------


def test_weighted_transform_sheds_divergent_powers():
    # sum m_k x_k^power diverges for power >= alpha, but the e^-sx kernel
    # keeps the weighted transform finite; check against the direct series
    model = StPetersburg(0.5)
    for s in (1e-2, 1e-3, 1e-4):
        got = weighted_transform(model.measure, 1.0, s)
        want = sum(2.0**-k * 4.0**k * math.exp(-s * 4.0**k) for k in range(1, 400))
        assert got == pytest.approx(want, rel=1e-9)


def test_weighted_transform_power_zero_is_transform():
    mu = geometric_measure()
    s = 0.2
    assert weighted_transform(mu, 0.0, s) == pytest.approx(ls_transform(mu, s), rel=1e-12)


# -- moment remainder routes ---------------------------------------------------


def test_remainder_routes_agree_at_m0():
    model = StPetersburg(0.5)
    for s in (1e-1, 1e-3, 1e-6):
        rem = moment_remainders(model.measure, 0, s)
        assert rem.f == pytest.approx(rem.g, rel=1e-10)
        assert rem.moments[0] == pytest.approx(1.0, rel=1e-12)


def test_remainder_m1_derivative_identity():
    # d/ds f_1 = g_1 for finite-mean measures
    mu = geometric_measure()
    s, h = 0.05, 1e-6
    hi = moment_remainders(mu, 1, s + h)
    lo = moment_remainders(mu, 1, s - h)
    mid = moment_remainders(mu, 1, s)
    assert (hi.f - lo.f) / (2 * h) == pytest.approx(mid.g, rel=1e-5)


def test_remainder_rejects_negative_order():
    with pytest.raises(ValueError):
        moment_remainders(geometric_measure(), -1, 0.1)


@settings(max_examples=20)
@given(st.floats(min_value=0.01, max_value=2.0))
def test_remainder_m0_positive_and_below_mass(s):
    mu = StieltjesMeasure(atoms=((0.5, 1.0), (3.0, 0.25)))
    rem = moment_remainders(mu, 0, s)
    assert 0.0 < rem.f < 1.25
    assert rem.f == pytest.approx(rem.g, rel=1e-12)


# -- construction errors -------------------------------------------------------


def test_atom_generator_validation():
    with pytest.raises(ValueError):
        AtomGenerator.geometric(1.0, 0.9, 1.0, 0.5)
    with pytest.raises(ValueError):
        AtomGenerator.geometric(1.0, 2.0, 1.0, 1.1)


def test_measure_rejects_bad_atoms():
    with pytest.raises(ValueError):
        StieltjesMeasure(atoms=((-1.0, 0.5),))
    with pytest.raises(ValueError):
        StieltjesMeasure(atoms=((1.0, -0.5),))


def test_truncated_moment_argument_validation():
    mu = geometric_measure()
    with pytest.raises(ValueError):
        truncated_moment(mu, 0.0, 1.0, side="sideways")
    with pytest.raises(ValueError):
        truncated_moment(mu, 0.0, -1.0)


# -- grid sampling --------------------------------------------------------------


def test_sample_on_grid_tail_side():
    grid = GeometricGrid.default(2.0, n_z=4, n_range=(0, 3))
    gs = sample_on_grid(lambda x: x**-0.5, grid, side="tail")
    assert gs.values.shape == (len(gs.z_points), len(gs.n_values))
    assert gs.ok.all()
    i, j = 1, 2
    x = 2.0 ** gs.n_values[j] * gs.z_points[i]
    assert gs.values[i, j] == pytest.approx(x**-0.5, rel=1e-12)
    header, rows = gs.to_rows()
    assert header[0] == "z" and len(rows) == len(gs.z_points)


def test_sample_on_grid_log_domain_fallback():
    # abscissae beyond the log limit are routed through log_fn, and the cell
    # then carries the log itself
    grid = GeometricGrid(r=2.0, z_points=(1.0, 1.5), n_min=0, n_max=2000)
    gs = sample_on_grid(lambda x: x**-0.5, grid, side="tail",
                        log_fn=lambda lx: -0.5 * lx)
    assert gs.ok.all()
    j = list(gs.n_values).index(2000)
    assert gs.values[0, j] == pytest.approx(-0.5 * 2000 * math.log(2.0), rel=1e-12)
    assert np.isfinite(gs.log_values[0, 0])  # shallow cells keep a real log


def test_sample_on_grid_deep_cells_skipped_without_log_fn():
    grid = GeometricGrid(r=2.0, z_points=(1.0,), n_min=0, n_max=2000)
    gs = sample_on_grid(lambda x: x**-0.5, grid, side="tail")
    assert not gs.ok[0, -1]
    assert np.isnan(gs.values[0, -1])
    assert gs.ok[0, 0]


def test_sample_on_grid_rejects_bad_side():
    grid = GeometricGrid.default(2.0, n_z=2, n_range=(0, 1))
    with pytest.raises(ValueError):
        sample_on_grid(lambda x: x, grid, side="up")
