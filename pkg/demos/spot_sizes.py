"""Spot sizes for each corrector variant through a 25 mm objective.

Each variant gets its own best image plane for a source on axis. The source
is then moved along the axis and, for the full polynomial fit, 100 um
sideways to see how the image degrades.

Run from the repository root:  python3 demos/spot_sizes.py
"""

from ionmirror import corrector as corr
from ionmirror import evaluation as ev

layout = corr.Layout()
curve = corr.derive_corrector(layout)
fits = {b: corr.fit_polynomial(curve, b) for b in corr.BASES}

variants = {
    "none": "flat",
    "quartic": corr.quartic_curve(layout),
    "even": fits[corr.EVEN_ONLY],
    "odd": fits[corr.ODD_ONLY],
    "full": fits[corr.FULL],
    "numeric": curve,
    "parabola": "flat",
}

offsets = [-20.0, -10.0, 0.0, 10.0, 20.0]
rows = ev.defocus_sweep(layout, variants, offsets)

print("rms spot radius (um) vs axial source offset (um)")
print("variant   " + "".join(f"{o:>10g}" for o in offsets))
for name in variants:
    vals = [r.rms_um for r in rows if r.variant == name]
    print(f"{name:9s} " + "".join(f"{v:10.3f}" for v in vals))

print(f"\ndiffraction limit at NA 0.2: {ev.diffraction_limit(layout.wavelength_nm, 0.2):.2f} um")

# Off-axis source with the full fit
full = {"full": fits[corr.FULL]}
on = ev.defocus_sweep(layout, full, [0.0])[0].rms_um
for shift in (25.0, 50.0, 100.0):
    off = ev.defocus_sweep(layout, full, [0.0], radial_offset=shift)[0].rms_um
    print(f"full fit, source {shift:5.0f} um off axis: {off:8.3f} um ({off / on:.1f}x on-axis)")
