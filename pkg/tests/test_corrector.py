import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ionmirror import corrector as corr
from ionmirror import geometry as geo

N = 1.5219
QUARTER_WAVE = 493.4e-6 / 4


# --- analytic plate ---------------------------------------------------------

def test_schmidt_vertex_is_zero():
    for k in (0.0, 2.0, -1.0):
        assert corr.schmidt_sag(0.0, 20.0, N, k) == 0.0


def test_schmidt_rim_value():
    assert corr.schmidt_sag(10.0, 20.0, N, 0.0) == pytest.approx(0.59879, abs=5e-5)


def test_schmidt_with_neutral_zone_term():
    r, k = 5.0, 2.0
    expected = (r**4 - k * r**2) / (4 * (N - 1) * 20.0**3)
    assert corr.schmidt_sag(r, 20.0, N, k) == pytest.approx(expected, rel=1e-15)


def test_schmidt_vectorised():
    r = np.linspace(0, 10, 11)
    z = corr.schmidt_sag(r, 20.0, N)
    assert z.shape == r.shape
    assert np.allclose(z, corr.schmidt_coefficient(20.0, N) * r**4, rtol=1e-14)


def test_quartic_curve_is_analytic(layout, quartic):
    assert quartic.source == corr.ANALYTIC_SCHMIDT
    assert quartic.coefficients[4] == pytest.approx(corr.schmidt_coefficient(20.0, layout.n_corrector))
    assert quartic.sag(-3.0) == quartic.sag(3.0)


# --- synthesis --------------------------------------------------------------

def test_zero_aperture_gives_flat_plate():
    curve = corr.derive_corrector(corr.Layout(aperture_radius=0.0))
    assert curve.converged
    assert np.all(curve.z == 0.0)


def test_default_layout_converges(numeric_curve):
    c = numeric_curve
    assert c.converged and c.source == corr.ITERATIVE_NUMERIC
    assert c.iterations_used <= 20
    assert c.history[-1] < QUARTER_WAVE
    assert len(c.history) == c.iterations_used
    assert all(b < a for a, b in zip(c.history, c.history[1:]))


def test_curve_invariants(numeric_curve):
    r, z = numeric_curve.r, numeric_curve.z
    assert z[0] == 0.0
    dr = np.diff(r)
    assert np.all(dr > 0)
    assert np.allclose(dr, dr[0], rtol=1e-9)
    assert r.size == corr.DEFAULT_N_GRID


def test_one_more_iteration_stays_within_quarter_wave(layout, numeric_curve):
    tighter = corr.derive_corrector(layout, tol=numeric_curve.history[-1] * 0.5)
    assert tighter.iterations_used == numeric_curve.iterations_used + 1
    assert np.max(np.abs(tighter.z - numeric_curve.z)) < QUARTER_WAVE


def test_grid_independence(layout, numeric_curve):
    fine = corr.derive_corrector(layout, n_grid=2 * corr.DEFAULT_N_GRID - 1)
    assert np.allclose(fine.r[::2], numeric_curve.r, rtol=0, atol=1e-12)
    assert np.max(np.abs(fine.z[::2] - numeric_curve.z)) < 493.4e-6 / 10


def test_numeric_curve_departs_from_quartic(layout, numeric_curve):
    q = corr.schmidt_sag(numeric_curve.r, layout.mirror_radius, layout.n_corrector)
    diff = numeric_curve.z - q
    assert np.all(np.abs(diff[:20]) < 1e-4)
    # the departure grows smoothly toward the rim
    assert abs(diff[-1]) > 1e-3


def test_slopes_are_odd_in_r(layout, numeric_curve):
    surface = layout.corrector_back(numeric_curve)
    _, pos = corr._rays_in_plate(layout, 64)
    neg = [geo.MeridionalRay(ray.z, -ray.r, -ray.u) for ray in pos]
    rho_p, s_p = corr.required_slopes(pos, surface, layout.n_corrector)
    rho_n, s_n = corr.required_slopes(neg, surface, layout.n_corrector)
    assert np.max(np.abs(rho_p + rho_n)) < 1e-12
    assert np.max(np.abs(s_p + s_n)) < 1e-12
    assert numeric_curve.sag(-2.5) == numeric_curve.sag(2.5)


def test_non_convergence_reports_history(layout):
    with pytest.raises(corr.NonConvergence) as info:
        corr.derive_corrector(layout, tol=1e-12, max_iter=2)
    assert len(info.value.history) == 2
    assert info.value.curve is not None
    assert "2 iterations" in str(info.value)


def test_caustic_is_detected():
    wide = corr.Layout(aperture_radius=11.6, mirror_half_width=12.5)
    with pytest.raises(corr.CausticError):
        corr.derive_corrector(wide)


def test_proportional_slope_variant(layout):
    k = 1e-3
    curve = corr.derive_corrector(layout, target_slope=lambda r: k * r)
    heights, fan = layout.fan(64)
    sys_ = layout.system(curve)
    for ray in fan[1:]:
        out = geo.trace(sys_, ray).ray
        dz, dr = out.direction
        assert math.atan2(dr, -dz) == pytest.approx(math.atan(k * out.r), abs=2e-5)


# --- collimation ------------------------------------------------------------

def test_collimation_ordering(layout, numeric_curve, quartic):
    conv = corr.collimation_residual(numeric_curve, layout)
    q = corr.collimation_residual(quartic, layout)
    flat = corr.collimation_residual("flat", layout)
    assert conv < 1e-5
    assert q > conv
    assert flat > q


def test_flat_plate_leaves_mirror_aberration(layout):
    flat = corr.collimation_residual("flat", layout)
    bare = corr.collimation_residual(None, layout)
    # a parallel plate never changes ray direction
    _, fan = layout.fan(corr.DEFAULT_N_RAYS)
    mirror_only = corr.output_angles(geo.OpticalSystem((layout.mirror(),)), fan)
    assert flat == pytest.approx(bare, abs=1e-12)
    assert flat == pytest.approx(np.max(np.abs(mirror_only)), abs=1e-12)


def test_numeric_curve_collimates_symmetric_fan(layout, numeric_curve):
    assert corr.collimation_residual(numeric_curve, layout, 101, symmetric=True) < 1e-5


# --- fits -------------------------------------------------------------------

def test_fit_recovers_quartic(layout):
    q = corr.quartic_curve(layout, np.linspace(0, 6.5, 257))
    fit = corr.fit_polynomial(corr.CorrectorCurve(q.r, q.z, corr.ANALYTIC_SCHMIDT), corr.EVEN_ONLY)
    c4 = q.coefficients[4]
    assert fit.coefficients[4] == pytest.approx(c4, rel=1e-10)
    others = np.delete(fit.coefficients, 4)
    assert np.all(np.abs(others) < 1e-12)


def test_fit_bases(fits):
    even, odd, full = fits[corr.EVEN_ONLY], fits[corr.ODD_ONLY], fits[corr.FULL]
    assert np.all(even.coefficients[1::2] == 0.0)
    assert np.all(odd.coefficients[0::2] == 0.0)
    for f in (even, odd, full):
        assert len(f.coefficients) == 11
        assert f.max_order <= 10
        assert f.sag(0.0) == 0.0


def test_deviation_profile_on_curve_grid(fits, numeric_curve):
    for f in fits.values():
        assert np.array_equal(f.deviation_r, numeric_curve.r)
        assert np.allclose(f.deviation, f.sag(numeric_curve.r) - numeric_curve.z, atol=1e-12)
        assert f.max_abs_deviation == pytest.approx(np.max(np.abs(f.deviation)))


def test_full_fit_is_best(fits):
    full = fits[corr.FULL].max_abs_deviation
    assert full <= fits[corr.EVEN_ONLY].max_abs_deviation
    assert full <= fits[corr.ODD_ONLY].max_abs_deviation


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(corr.BASES), st.integers(1, 10), st.sampled_from([-0.01, 0.01]))
def test_least_squares_optimality(fits, numeric_curve, basis, j, delta):
    f = fits[basis]
    if f.coefficients[j] == 0.0:
        return
    ss = np.sum(f.deviation**2)
    c = f.coefficients.copy()
    c[j] *= 1.0 + delta
    dev = np.polynomial.polynomial.polyval(numeric_curve.r, c) - numeric_curve.z
    assert np.sum(dev**2) >= ss * (1 - 1e-12)


def test_fit_errors():
    r = np.linspace(0, 1, 8)
    with pytest.raises(corr.InsufficientSamples):
        corr.fit_polynomial(corr.CorrectorCurve(r, r**4, corr.ITERATIVE_NUMERIC))
    zero = np.zeros(12)
    with pytest.raises(corr.RankDeficient):
        corr.fit_polynomial(corr.CorrectorCurve(zero, zero, corr.ITERATIVE_NUMERIC))
    with pytest.raises(ValueError):
        corr.fit_polynomial(corr.CorrectorCurve(np.linspace(0, 1, 20), np.zeros(20), "x"), "Weird")


def test_fit_surfaces_trace(layout, fits):
    for f in fits.values():
        assert corr.collimation_residual(f, layout, 64) < corr.collimation_residual("flat", layout, 64)
