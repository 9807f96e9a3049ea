"""Designing an aspheric corrector for a spherical collection mirror.

A point source sits at the centre of a short spherical mirror, so the
reflected beam is far from collimated. This walk-through compares the
textbook fourth-order plate with a plate derived by tracing rays, then
fits the derived profile with polynomials of up to tenth order.

Run from the repository root:  python3 demos/corrector_design.py
"""

import numpy as np

from ionmirror import corrector as corr
from ionmirror.materials import BK7, index

layout = corr.Layout()
n = index(BK7, layout.wavelength_nm)
print(f"BK7 index at {layout.wavelength_nm} nm: {n:.6f}")

# The lowest-order answer: thickness grows as r**4 / (4 (n - 1) R**3)
c4 = corr.schmidt_coefficient(layout.mirror_radius, n)
print(f"fourth-order coefficient: {c4:.6e} mm^-3")

# Trace a fan, ask each ray what slope it needs at the plate, integrate,
# and repeat until the profile stops moving.
curve = corr.derive_corrector(layout)
print(f"\nnumeric profile: {len(curve.r)} samples out to r = {curve.r[-1]:.3f} mm")
for i, change in enumerate(curve.history, 1):
    print(f"  iteration {i}: max sag change {change * 1e6:10.4f} nm")

quartic = corr.quartic_curve(layout)
edge = curve.r[-1]
print(f"edge sag, numeric  {curve.z[-1] * 1e3:8.3f} um")
print(f"edge sag, quartic  {np.interp(edge, quartic.r, quartic.z) * 1e3:8.3f} um")

# How well does each profile collimate the beam?
for name, c in (("quartic", quartic), ("numeric", curve)):
    worst = np.max(np.abs(corr.collimation_residual(c, layout)))
    print(f"worst output angle ({name}): {worst:.3e} rad")

# Polynomial fits to the numeric profile
print("\nfit        max |deviation| (um)")
for basis in corr.BASES:
    fit = corr.fit_polynomial(curve, basis)
    print(f"{basis:10s} {fit.max_abs_deviation * 1e3:10.4f}")
