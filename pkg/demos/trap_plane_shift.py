"""How far a grounded plane pulls a trapped ion off the RF null.

The plane's image charges break the trap symmetry, so the ion settles
slightly toward the plane. The shift is found two ways: from the minimum of
the time-averaged pseudopotential, and by integrating the full RF motion
with damping and averaging the late-time offset.

Run from the repository root:  python3 demos/trap_plane_shift.py
"""

from ionmirror import trap as T

trap = T.TrapSystem()
a, q = T.check_stability(trap)
print(f"Mathieu a = {a:.4g}, q = {q:.4f}")
print(f"calibrated RF amplitude: {T.calibrated_rf_amplitude(trap):.1f} V")
print(f"secular frequency, pseudopotential: {T.mathieu_secular_frequency(trap) / 1e6:.4f} MHz")
print(f"secular frequency, simulated:       {T.simulated_secular_frequency(trap, n_cycles=300) / 1e6:.4f} MHz")

distances = [3.0, 5.0, 8.0, 12.0, 100.0]
print("\nplane (mm)   orbit (um)   pseudopotential (um)   RF images   self image")
for d, res in zip(distances, T.displacement_orbits(trap, distances)):
    rf, selfi = T.shift_contributions(trap.with_plane(d))
    print(f"{d:10g} {res.rms_displacement:12.4f} {res.equilibrium_shift:22.4f} "
          f"{abs(rf[1]):11.4f} {abs(selfi[1]):12.2e}")
