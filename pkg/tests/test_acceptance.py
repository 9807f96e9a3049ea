"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Criteria 3, 4 and 5 are expected to fail at the default 9 mm aperture; the
reasons are recorded in the project notes. They are run at their stated
tolerances regardless.
"""

import filecmp
import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ionmirror import cli
from ionmirror import corrector as corr
from ionmirror import evaluation as ev
from ionmirror import geometry as geo
from ionmirror import trap as T
from ionmirror.materials import BK7, index

import oracles

QUARTER_WAVE_MM = 493.4e-6 / 4
TENTH_WAVE_MM = 493.4e-6 / 10


@pytest.fixture
def report(capsys):
    def _report(n, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {n:2d}] {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail
    return _report


def test_c01_quartic_coefficient(report):
    n = index(BK7, 493.4)
    c4 = corr.schmidt_coefficient(20.0, n)
    err = abs(c4 - 5.98785e-5) / 5.98785e-5
    report(1, err < 5e-3, f"c4 = {c4:.6e} mm^-3 (n = {n:.6f}), relative error {err:.2e} < 5e-3")


def test_c02_convergence(report, layout):
    t0 = time.perf_counter()
    curve = corr.derive_corrector(layout)
    dt = time.perf_counter() - t0
    ok = curve.converged and curve.history[-1] < QUARTER_WAVE_MM and curve.iterations_used <= 20 and dt < 10
    report(2, ok, f"{curve.iterations_used} iterations, last change {curve.history[-1] * 1e6:.3g} nm "
                  f"(< 123.35 nm), {dt:.2f} s")


def test_c03_fit_deviation_scale(report, fits):
    t0 = time.perf_counter()
    full = fits[corr.FULL].max_abs_deviation * 1e3
    even = fits[corr.EVEN_ONLY].max_abs_deviation * 1e3
    odd = fits[corr.ODD_ONLY].max_abs_deviation * 1e3
    ok = 5.0 <= full <= 40.0 and odd >= even and odd >= full and time.perf_counter() - t0 < 5
    report(3, ok, f"max |dev| full {full:.4g} um (need 5-40), even {even:.4g} um, odd {odd:.4g} um "
                  f"(need odd >= even and odd >= full)")


def test_c04_spot_ratio(report, layout, quartic, fits):
    rows = ev.defocus_sweep(layout, {"quartic": quartic, "full": fits[corr.FULL]}, [0.0])
    q, f = rows[0].rms_um, rows[1].rms_um
    ratio = q / f
    report(4, 2.0 <= ratio <= 4.5, f"rms quartic {q:.4g} um / full {f:.4g} um = {ratio:.3g} (need 2-4.5)")


def test_c05_off_axis(report, layout, fits):
    full = {"full": fits[corr.FULL]}
    on = ev.defocus_sweep(layout, full, [0.0])[0].rms_um
    off = ev.defocus_sweep(layout, full, [0.0], radial_offset=100.0)[0].rms_um
    growth = off / on - 1.0
    report(5, growth < 0.05, f"full fit rms {on:.4g} um on axis, {off:.4g} um at 100 um off axis, "
                             f"growth {growth * 100:.3g}% (need < 5%)")


@settings(max_examples=300, deadline=None)
@given(st.floats(-9.0, 9.0))
def test_c06_parabola_property(h):
    layout = corr.Layout()
    mirror = layout.mirror(parabolic=True)
    out = geo.trace(geo.OpticalSystem((mirror,)), layout.aim(h, parabolic=True)).ray
    dz, dr = out.direction
    assert abs(math.atan2(dr, -dz)) < 1e-10


def test_c06_parabola_baseline(report, layout):
    t0 = time.perf_counter()
    _, fan = layout.fan(1001, symmetric=True, parabolic=True)
    ang = corr.output_angles(geo.OpticalSystem((layout.mirror(parabolic=True),)), fan)
    worst = float(np.max(np.abs(ang)))
    dt = time.perf_counter() - t0
    report(6, worst < 1e-10 and dt < 1, f"max collimation residual {worst:.2e} rad over 1001 rays "
                                        f"(< 1e-10), {dt:.2f} s")


def test_c07_collection_efficiency(report):
    hi = ev.collection_efficiency(ev.CircularNA(0.9))
    lo = ev.collection_efficiency(ev.CircularNA(0.25))
    ratio = hi / lo
    square = ev.collection_efficiency(ev.mirror_square_aperture()) / lo
    ok = abs(hi - 0.282) <= 1e-3 and abs(lo - 0.0159) <= 5e-4 and abs(ratio - 17.8) <= 0.2
    report(7, ok, f"NA 0.9: {hi:.4f}, NA 0.25: {lo:.5f}, circular ratio {ratio:.3f}, "
                  f"square-mirror ratio {square:.2f} (reference ~15)")


def test_c08_trap_anchor(report, orbit_sweep):
    rms = {d: orbit_sweep[d].rms_displacement for d in (3.0, 5.0, 8.0, 12.0)}
    vals = list(rms.values())
    ok = 0.05 < rms[5.0] < 1.0 and all(b < a for a, b in zip(vals, vals[1:]))
    report(8, ok, "rms displacement " + ", ".join(f"{d:g} mm: {v:.4g} um" for d, v in rms.items()))


def test_c09_oracle_equivalence(report, orbit_sweep):
    rel = {d: abs(r.rms_displacement - r.equilibrium_shift) / r.equilibrium_shift
           for d, r in orbit_sweep.items()}
    ok = all(v < 0.2 for v in rel.values())
    report(9, ok, "orbit vs pseudopotential " + ", ".join(f"{d:g} mm: {v * 100:.3f}%" for d, v in rel.items()))


def test_c10_calibration_closure(report, trap_default):
    t0 = time.perf_counter()
    f_sim = T.simulated_secular_frequency(trap_default)
    f_mathieu = T.mathieu_secular_frequency(trap_default)
    dt = time.perf_counter() - t0
    e1 = abs(f_sim - 1e6) / 1e6
    e2 = abs(f_sim - f_mathieu) / f_mathieu
    report(10, e1 < 0.05 and e2 < 0.05 and dt < 30,
           f"simulated {f_sim / 1e6:.5f} MHz, Mathieu {f_mathieu / 1e6:.5f} MHz, "
           f"errors {e1 * 100:.2f}% / {e2 * 100:.2f}%, {dt:.1f} s")


def _snell_residuals(system, rays):
    worst = 0.0
    for ray in rays:
        for surf in system.surfaces:
            out = geo.interact(ray, surf)
            if not surf.is_mirror:
                ti, tt = geo.incidence_angles(ray, out, surf)
                worst = max(worst, abs(surf.n_before * math.sin(ti) - surf.n_after * math.sin(tt)))
            ray = out
    return worst


def test_c11_kernel_properties(report, layout, numeric_curve, fits, quartic):
    t0 = time.perf_counter()
    _, fan = layout.fan(64, symmetric=True)
    systems = [layout.system(c) for c in (numeric_curve, quartic, *fits.values(), "flat")]
    snell = max(_snell_residuals(s, fan) for s in systems)

    rev = 0.0
    for s in systems:
        for ray in fan[::4]:
            out = geo.trace(s, ray).ray.propagate(2.0)
            back = geo.trace(s.reversed(), out.reversed()).ray
            dz, dr = back.direction
            end = back.propagate((ray.z - back.z) / dz)
            rev = max(rev, abs(end.r - ray.r), abs(math.remainder(end.u - ray.u - math.pi, 2 * math.pi)))

    nv, nc = layout.n_viewport, layout.n_corrector
    full = fits[corr.FULL]
    surfs = [oracles.sphere3d(layout.mirror_vertex_z, -layout.mirror_radius),
             oracles.flat3d(-layout.viewport_distance, 1.0, nv),
             oracles.flat3d(-layout.viewport_distance - layout.viewport_thickness, nv, 1.0),
             oracles.flat3d(layout.corrector_front_z, 1.0, nc),
             oracles.poly3d(layout.corrector_back_z, -full.coefficients, nc, 1.0)]
    sys_full = layout.system(full)
    agree = 0.0
    for phi in (0.0, 1.1):
        for ray in fan[::2]:
            out = geo.trace(sys_full, ray).ray
            dz, dr = ray.direction
            p, d = oracles.trace3d(surfs, *oracles.from_plane(ray.z, ray.r, dz, dr, phi))
            z, r, dz3, dr3 = oracles.to_plane(p, d, phi)
            odz, odr = out.direction
            agree = max(agree, abs(out.z - z), abs(out.r - r), abs(odz - dz3), abs(odr - dr3))

    fine = corr.derive_corrector(layout, n_grid=2 * corr.DEFAULT_N_GRID - 1)
    grid = float(np.max(np.abs(fine.z[::2] - numeric_curve.z)))
    dt = time.perf_counter() - t0
    ok = snell < 1e-12 and rev < 1e-9 and agree < 1e-10 and grid < TENTH_WAVE_MM and dt < 30
    report(11, ok, f"Snell {snell:.1e} (< 1e-12), reversibility {rev:.1e} (< 1e-9), "
                   f"2D vs 3D {agree:.1e} (< 1e-10), grid doubling {grid * 1e6:.2f} nm (< 49.34 nm), {dt:.1f} s")


COMMANDS = (["corrector", "derive"], ["corrector", "fit"], ["spot", "sweep"], ["trap", "sweep"])


def test_c12_determinism(report, tmp_path):
    t0 = time.perf_counter()
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        for cmd in COMMANDS:
            assert cli.main(["--out", str(out), *cmd]) == 0
    dt = time.perf_counter() - t0
    names = sorted(p.name for p in outs[0].glob("*.csv"))
    same, diff, _ = filecmp.cmpfiles(outs[0], outs[1], names, shallow=False)
    ok = not diff and len(same) == len(names) == 8 and dt < 2 * 180
    report(12, ok, f"{len(same)}/{len(names)} CSV files byte-identical across two runs; "
                   f"two full pipelines in {dt:.1f} s")
