"""Command line front end.

    ionmirror [--config PATH] [--out DIR] [--set key=value ...] COMMAND

Commands: ``corrector derive``, ``corrector fit``, ``spot sweep``,
``trap sweep``, ``efficiency``. Exit status is 0 on success, 2 for input or
validation errors and 3 for numerical failures.
"""

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import corrector as corr
from . import evaluation as ev
from . import trap as trapmod
from .output import line_plot, read_csv, write_csv, write_svg

log = logging.getLogger("ionmirror")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3

BASIS_NAMES = {"even": corr.EVEN_ONLY, "odd": corr.ODD_ONLY, "full": corr.FULL}
FIT_VARIANTS = tuple(BASIS_NAMES)
BUILTIN_VARIANTS = ("quartic", "none", "parabola", "flat")
ALL_VARIANTS = ("quartic", "even", "odd", "full", "numeric", "none", "parabola", "flat")


class CommandError(Exception):
    def __init__(self, message, code=EXIT_INPUT):
        super().__init__(message)
        self.code = code


def _out_dir(cfg):
    path = Path(cfg.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _tolerance(cfg):
    s = cfg.synthesis
    return corr.quarter_wave_mm(cfg.layout.wavelength_nm) if s.tolerance_mm is None else s.tolerance_mm


def cmd_corrector_derive(cfg):
    out = _out_dir(cfg)
    s = cfg.synthesis
    try:
        curve = corr.derive_corrector(cfg.layout, n_grid=s.n_grid, tol=_tolerance(cfg),
                                      max_iter=s.max_iter, n_rays=s.n_rays)
    except corr.NonConvergence as exc:
        write_csv(out / "convergence.csv", ["iteration", "max_sag_change_mm"],
                  [(i + 1, c) for i, c in enumerate(exc.history)])
        raise CommandError(str(exc), EXIT_NUMERIC) from exc
    write_csv(out / "corrector_numeric.csv", ["r_mm", "z_mm"], zip(curve.r, curve.z))
    write_csv(out / "convergence.csv", ["iteration", "max_sag_change_mm"],
              [(i + 1, c) for i, c in enumerate(curve.history)])
    print(f"converged after {curve.iterations_used} iterations; "
          f"last change {curve.history[-1]:.3e} mm; edge sag {curve.z[-1]:.6f} mm")
    if curve.r.size < 11:
        print(f"warning: {curve.r.size} grid points are too few for a 10th-order fit",
              file=sys.stderr)
    return curve


def _load_numeric(out):
    path = out / "corrector_numeric.csv"
    if not path.exists():
        raise CommandError(f"missing {path}; run `corrector derive` first")
    _, rows = read_csv(path)
    arr = np.array(rows, dtype=float)
    return corr.CorrectorCurve(arr[:, 0], arr[:, 1], corr.ITERATIVE_NUMERIC)


def _load_fit(out, name):
    path = out / f"fit_{name}.csv"
    if not path.exists():
        raise CommandError(f"missing {path}; run `corrector fit` first")
    _, rows = read_csv(path)
    coeffs = np.zeros(11)
    for order, c in rows:
        coeffs[int(order)] = c
    return corr.FitResult(BASIS_NAMES[name], coeffs, np.array([]), np.array([]), float("nan"))


def cmd_corrector_fit(cfg, bases=None):
    out = _out_dir(cfg)
    curve = _load_numeric(out)
    bases = list(cfg.evaluation.bases if bases is None else bases)
    unknown = [b for b in bases if b not in BASIS_NAMES]
    if unknown:
        raise CommandError(f"unknown basis {unknown}; choose from {sorted(BASIS_NAMES)}")
    try:
        fits = {b: corr.fit_polynomial(curve, BASIS_NAMES[b]) for b in bases}
    except (corr.InsufficientSamples, corr.RankDeficient) as exc:
        raise CommandError(f"{type(exc).__name__}: {exc}") from exc
    for b, f in fits.items():
        write_csv(out / f"fit_{b}.csv", ["order", "coefficient"],
                  [(j, float(c)) for j, c in enumerate(f.coefficients)])
        print(f"{b:5s} fit: max |deviation| = {f.max_abs_deviation * 1e3:.4f} um")
    write_csv(out / "deviations.csv", ["basis", "r_mm", "deviation_mm"],
              [(b, float(r), float(d)) for b, f in fits.items()
               for r, d in zip(f.deviation_r, f.deviation)])
    q = corr.quartic_curve(cfg.layout, curve.r)
    profiles = [("quartic (analytic)", curve.r, q.z), ("numeric", curve.r, curve.z)]
    profiles += [(f"{b} fit", curve.r, f.sag(curve.r)) for b, f in fits.items()]
    devs = [(f"{b} fit", f.deviation_r, f.deviation * 1e3) for b, f in fits.items()]
    svg_a = line_plot(profiles, "r (mm)", "thickness z (mm)", "Corrector profiles")
    svg_b = line_plot(devs, "r (mm)", "fit - numeric (um)", "Fit deviations")
    write_svg(out / "figure2.svg", _stack_svgs([svg_a, svg_b]))
    return fits


def _stack_svgs(svgs, height=420, width=640):
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
             f'height="{height * len(svgs)}">']
    for i, s in enumerate(svgs):
        inner = s.split("\n", 1)[1].rsplit("</svg>", 1)[0]
        parts.append(f'<g transform="translate(0 {i * height})">\n{inner}</g>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _variant_corrector(cfg, out, name):
    if name == "quartic":
        return corr.quartic_curve(cfg.layout)
    if name in ("none", "parabola"):
        return None
    if name == "flat":
        return "flat"
    if name == "numeric":
        return _load_numeric(out)
    if name in FIT_VARIANTS:
        return _load_fit(out, name)
    raise CommandError(f"unknown variant {name!r}; choose from {ALL_VARIANTS}")


def cmd_spot_sweep(cfg, variants=None, off_axis=None):
    out = _out_dir(cfg)
    e = cfg.evaluation
    variants = list(e.variants if variants is None else variants)
    off_axis = e.off_axis_um if off_axis is None else off_axis
    chosen = {name: _variant_corrector(cfg, out, name) for name in variants}
    stage = ev.ImagingStage(e.focal_length_mm)
    try:
        rows = ev.defocus_sweep(cfg.layout, chosen, e.offsets_um, stage, e.fan_size)
        on_axis = {(r.variant, r.offset_um): r.rms_um for r in rows}
        if off_axis:
            rows += ev.defocus_sweep(cfg.layout, chosen, e.offsets_um, stage, e.fan_size,
                                     radial_offset=off_axis)
    except ev.AllRaysVignetted as exc:
        raise CommandError(str(exc), EXIT_NUMERIC) from exc
    table = []
    for r in rows:
        base = on_axis[(r.variant, r.offset_um)]
        rel = r.rms_um / base if base > 0 else float("nan")
        table.append((r.variant, r.offset_um, r.radial_offset_um, r.rms_um, r.vignetted_count,
                      rel, r.warning))
    write_csv(out / "figure3.csv",
              ["variant", "offset_um", "radial_offset_um", "rms_um", "vignetted_count",
               "relative_to_on_axis", "warning"], table)
    diff = ev.diffraction_limit(cfg.layout.wavelength_nm, 0.2)
    series = []
    for name in variants:
        pts = [(r.offset_um, r.rms_um) for r in rows if r.variant == name and r.radial_offset_um == 0]
        series.append((name, [p[0] for p in pts], [max(p[1], 1e-3) for p in pts]))
    svg = line_plot(series, "ion displacement from focus (um)", "rms spot radius (um)",
                    "Spot size vs axial source offset", hlines=[("diffraction ref", diff)],
                    logy=True)
    write_svg(out / "figure3.svg", svg)
    for name in variants:
        r0 = on_axis.get((name, 0.0))
        if r0 is not None:
            print(f"{name:9s} rms at zero offset: {r0:10.4f} um")
    print(f"diffraction reference (NA 0.2, {cfg.layout.wavelength_nm} nm): {diff:.3f} um")
    return table


def cmd_trap_sweep(cfg):
    out = _out_dir(cfg)
    s = cfg.sweep
    trap = cfg.trap
    try:
        trapmod.check_stability(trap)
    except trapmod.UnstableTrap as exc:
        raise CommandError(f"unstable trap: {exc}", EXIT_NUMERIC) from exc
    distances = sorted(s.distances_mm)
    try:
        results = trapmod.displacement_orbits(trap, distances, s.duration_cycles, s.damping,
                                              s.steps_per_cycle, s.window_cycles)
    except (trapmod.UnstableOrbit, trapmod.NoStableMinimum) as exc:
        raise CommandError(str(exc), EXIT_NUMERIC) from exc
    except (trapmod.StepTooLarge, ValueError) as exc:
        raise CommandError(str(exc)) from exc
    table = []
    for d, res in zip(distances, results):
        rf, selfi = trapmod.shift_contributions(trap.with_plane(d))
        table.append((d, res.rms_displacement, res.equilibrium_shift,
                      float(np.linalg.norm(rf)), float(np.linalg.norm(selfi))))
    write_csv(out / "figure1.csv",
              ["distance_mm", "rms_displacement_um", "equilibrium_shift_um",
               "rf_image_shift_um", "self_image_shift_um"], table)
    svg = line_plot([("orbit rms", [t[0] for t in table], [t[1] for t in table]),
                     ("pseudopotential shift", [t[0] for t in table], [t[2] for t in table])],
                    "distance to grounded plane (mm)", "displacement (um)",
                    "Ion displacement vs plane distance", hlines=[("1 um", 1.0)], logy=True)
    write_svg(out / "figure1.svg", svg)
    for row in table:
        print(f"d = {row[0]:6.2f} mm   rms = {row[1]:.5g} um   shift = {row[2]:.5g} um")
    return table


def cmd_efficiency(cfg, nas=(0.9, 0.25)):
    rows = []
    for na in nas:
        rows.append((f"circular NA {na}", ev.collection_efficiency(ev.CircularNA(na))))
    sq = ev.mirror_square_aperture(cfg.layout)
    sq_eff = ev.collection_efficiency(sq)
    rows.append((f"square mirror {2 * sq.half_width:g} mm at {sq.distance:.3f} mm", sq_eff))
    c_hi = ev.collection_efficiency(ev.CircularNA(nas[0]))
    c_lo = ev.collection_efficiency(ev.CircularNA(nas[1]))
    print(f"{'aperture':40s} {'fraction of 4pi':>16s}")
    for name, val in rows:
        print(f"{name:40s} {val:16.5f}")
    print(f"{'ratio circular ' + str(nas[0]) + ' / ' + str(nas[1]):40s} {c_hi / c_lo:16.3f}")
    print(f"{'ratio square mirror / circular ' + str(nas[1]):40s} {sq_eff / c_lo:16.3f}")
    print(f"{'reference solid-angle ratio':40s} {'~15':>16s}")
    return rows, c_hi / c_lo, sq_eff / c_lo


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="configuration file")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--set", action="append", default=argparse.SUPPRESS, metavar="KEY=VALUE",
                        help="override a config key, e.g. layout.aperture_radius=8")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="ionmirror", parents=[common], description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="group", required=True)

    pc = sub.add_parser("corrector", help="corrector synthesis and fits")
    csub = pc.add_subparsers(dest="action", required=True)
    csub.add_parser("derive", parents=[common], help="iterative numeric corrector")
    pf = csub.add_parser("fit", parents=[common], help="polynomial fits of the numeric corrector")
    pf.add_argument("--basis", action="append", choices=sorted(BASIS_NAMES),
                    help="fit only these bases (repeatable)")

    ps = sub.add_parser("spot", help="spot-size evaluation")
    ssub = ps.add_subparsers(dest="action", required=True)
    pss = ssub.add_parser("sweep", parents=[common], help="rms spot vs axial source offset")
    pss.add_argument("--variant", action="append", choices=ALL_VARIANTS)
    pss.add_argument("--off-axis", type=float, metavar="UM", help="also sweep at this radial offset")

    pt = sub.add_parser("trap", help="trap perturbation")
    tsub = pt.add_subparsers(dest="action", required=True)
    tsub.add_parser("sweep", parents=[common], help="orbit displacement vs plane distance")

    pe = sub.add_parser("efficiency", parents=[common], help="collection efficiency table")
    pe.add_argument("--na", nargs=2, type=float, default=(0.9, 0.25), metavar=("HIGH", "LOW"),
                    help="numerical apertures to compare")
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING)
    try:
        cfg = cfgmod.load(getattr(args, "config", None), getattr(args, "set", []) or [])
        if getattr(args, "out", None):
            cfg = replace(cfg, out_dir=args.out)
        if args.group == "corrector" and args.action == "derive":
            cmd_corrector_derive(cfg)
        elif args.group == "corrector":
            cmd_corrector_fit(cfg, args.basis)
        elif args.group == "spot":
            cmd_spot_sweep(cfg, args.variant, args.off_axis)
        elif args.group == "trap":
            cmd_trap_sweep(cfg)
        else:
            cmd_efficiency(cfg, tuple(args.na))
    except cfgmod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except trapmod.UnstableTrap as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ev.InvalidAperture as exc:
        print(f"invalid aperture: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
