"""Single ion in a linear RF quadrupole trap next to a grounded plane.

The four rods are infinite line charges at the corners of a square in the
transverse (x, y) plane, diagonal pairs carrying +lambda cos(Omega t) and
-lambda cos(Omega t). A grounded plane with normal ``plane_normal`` at
``plane_distance`` from the trap centre is represented by image lines of
opposite sign, plus the image of the ion itself. Axial confinement is an
ideal harmonic term at the axial frequency together with the transverse
defocusing that Laplace's equation demands of it.

Public functions take positions in mm and return fields in V/mm; the
dynamics run in SI units.
"""

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import root

E_CHARGE = 1.602176634e-19
EPS0 = 8.8541878128e-12
AMU = 1.66053906660e-27
COULOMB_K = 1.0 / (4.0 * math.pi * EPS0)

MATHIEU_Q_LIMIT = 0.908
UNSTABLE_RADIUS = 0.5e-3  # m


class InsideElectrode(ValueError):
    pass


class PointBeyondPlane(ValueError):
    pass


class NoStableMinimum(RuntimeError):
    pass


class UnstableOrbit(RuntimeError):
    pass


class StepTooLarge(ValueError):
    pass


class UnstableTrap(ValueError):
    """Mathieu parameters outside the first stability region."""

    def __init__(self, message, q=None, a=None):
        super().__init__(message)
        self.q = q
        self.a = a


@dataclass(frozen=True)
class TrapSystem:
    rod_spacing: float = 1.4            # mm, opposite rod centres
    rod_radius: float = 0.25            # mm
    rf_frequency: float = 22e6          # Hz
    secular_frequency: float = 1.0e6    # Hz, calibration target
    axial_frequency: float = 1.0e5      # Hz
    endcap_spacing: float = 2.0         # mm
    endcap_voltage: float = 100.0       # V
    ion_mass_amu: float = 138.0
    ion_charge: int = 1
    rf_amplitude: float = None          # V between rod pairs; None = calibrate
    plane_distance: float = None        # mm; None = no plane
    plane_normal: tuple = (0.0, 1.0, 0.0)
    include_self_image: bool = True
    include_rf_images: bool = True

    def __post_init__(self):
        n = np.asarray(self.plane_normal, dtype=float)
        norm = np.linalg.norm(n)
        if norm == 0:
            raise ValueError("plane_normal must be nonzero")
        n = n / norm
        if abs(n[2]) > 1e-12:
            raise ValueError("plane_normal must be transverse (no z component)")
        object.__setattr__(self, "plane_normal", tuple(float(x) for x in n))
        if self.plane_distance is not None and self.plane_distance <= self.rod_spacing / 2 + self.rod_radius:
            raise ValueError("plane must lie outside the electrode structure")

    @property
    def mass(self):
        return self.ion_mass_amu * AMU

    @property
    def charge(self):
        return self.ion_charge * E_CHARGE

    @property
    def omega_rf(self):
        return 2.0 * math.pi * self.rf_frequency

    @property
    def rod_positions(self):
        """Rod centres (mm) and their RF sign, +1 for one diagonal pair."""
        b = self.rod_spacing / (2.0 * math.sqrt(2.0))
        pos = np.array([[b, b], [-b, -b], [b, -b], [-b, b]])
        sign = np.array([1.0, 1.0, -1.0, -1.0])
        return pos, sign

    def with_plane(self, distance):
        return replace(self, plane_distance=distance)

    def without_plane(self):
        return replace(self, plane_distance=None)


# --- electrostatics in SI -------------------------------------------------

def _line_sources(trap, with_images):
    """Transverse positions (m) and relative line densities of all lines."""
    pos, sign = trap.rod_positions
    pos = pos * 1e-3
    if with_images and trap.plane_distance is not None and trap.include_rf_images:
        n = np.asarray(trap.plane_normal[:2])
        d = trap.plane_distance * 1e-3
        img = pos - 2.0 * ((pos @ n) - d)[:, None] * n[None, :]
        pos = np.vstack([pos, img])
        sign = np.concatenate([sign, -sign])
    return pos, sign


def _unit_field(trap, xy, with_images=True):
    """Transverse field (V/m) per unit line density (C/m) at points xy (m)."""
    pos, sign = _line_sources(trap, with_images)
    d = xy[..., None, :] - pos
    r2 = np.sum(d * d, axis=-1)
    return np.sum((sign / (2.0 * math.pi * EPS0))[..., None] * d / r2[..., None], axis=-2)


def _unit_potential(trap, xy, with_images=True):
    pos, sign = _line_sources(trap, with_images)
    d = xy[..., None, :] - pos
    r = np.sqrt(np.sum(d * d, axis=-1))
    return np.sum(-(sign / (2.0 * math.pi * EPS0)) * np.log(r), axis=-1)


def _unit_gradient(trap):
    """|dE/dx| at the centre of the unperturbed trap, per unit line density."""
    h = 1e-7
    e = _unit_field(trap, np.array([h, 0.0]), with_images=False)
    return float(np.linalg.norm(e) / h)


def _unit_voltage(trap):
    """Potential difference between the two rod pairs' inner surfaces per unit density."""
    pos, sign = trap.rod_positions
    pts = []
    for i in (0, 2):
        p = pos[i]
        pts.append((p - p / np.linalg.norm(p) * trap.rod_radius) * 1e-3)
    phi = _unit_potential(trap, np.array(pts), with_images=False)
    return float(phi[0] - phi[1])


def line_density(trap):
    """Peak RF line-charge density (C/m) on each rod.

    With ``rf_amplitude`` unset, the density is chosen so the pseudopotential
    secular frequency (including axial defocusing) equals
    ``secular_frequency``.
    """
    if trap.rf_amplitude is not None:
        return trap.rf_amplitude / _unit_voltage(trap)
    w_sec = 2.0 * math.pi * trap.secular_frequency
    w_ax = 2.0 * math.pi * trap.axial_frequency
    wp2 = w_sec**2 + 0.5 * w_ax**2
    # pseudopotential frequency e G / (sqrt(2) m Omega)
    return math.sqrt(2.0 * wp2) * trap.mass * trap.omega_rf / (trap.charge * _unit_gradient(trap))


def calibrated_rf_amplitude(trap):
    return line_density(replace(trap, rf_amplitude=None)) * _unit_voltage(trap)


def mathieu_parameters(trap):
    """(a, q) for the transverse principal axes."""
    G = line_density(trap) * _unit_gradient(trap)
    q = 2.0 * trap.charge * G / (trap.mass * trap.omega_rf**2)
    w_ax = 2.0 * math.pi * trap.axial_frequency
    a = -2.0 * w_ax**2 / trap.omega_rf**2
    return a, q


def check_stability(trap):
    a, q = mathieu_parameters(trap)
    if not 0.0 < q < MATHIEU_Q_LIMIT or a + 0.5 * q * q <= 0.0:
        raise UnstableTrap(f"Mathieu q = {q:.4f}, a = {a:.3g} outside the first stability region "
                           f"(need 0 < q < {MATHIEU_Q_LIMIT})", q, a)
    return a, q


def mathieu_secular_frequency(trap):
    """Lowest-order secular frequency (Omega/2) sqrt(a + q^2/2) in Hz."""
    a, q = mathieu_parameters(trap)
    return trap.rf_frequency / 2.0 * math.sqrt(a + 0.5 * q * q)


def _check_point(trap, xy_mm):
    pos, _ = trap.rod_positions
    d = np.linalg.norm(np.asarray(xy_mm)[..., None, :] - pos, axis=-1)
    if np.any(d <= trap.rod_radius):
        raise InsideElectrode(f"point {xy_mm} lies inside a rod")
    if trap.plane_distance is not None:
        s = np.asarray(xy_mm) @ np.asarray(trap.plane_normal[:2])
        if np.any(s > trap.plane_distance + 1e-12):
            raise PointBeyondPlane(f"point {xy_mm} is behind the grounded plane")


def _static_field_si(trap, x):
    """Axial harmonic confinement field (V/m) at x (m), shape (..., 3)."""
    k = trap.mass * (2.0 * math.pi * trap.axial_frequency) ** 2 / trap.charge
    out = np.empty_like(x)
    out[..., 0] = 0.5 * k * x[..., 0]
    out[..., 1] = 0.5 * k * x[..., 1]
    out[..., 2] = -k * x[..., 2]
    return out


def _self_image_force_si(trap, x):
    """Attraction (N) of the ion toward its image in the plane."""
    if trap.plane_distance is None or not trap.include_self_image:
        return np.zeros_like(x)
    n = np.array([*trap.plane_normal[:2], 0.0])
    gap = trap.plane_distance * 1e-3 - x @ n
    return (COULOMB_K * trap.charge**2 / (2.0 * gap) ** 2)[..., None] * n


def _field_si(trap, x, t, with_images):
    lam = line_density(trap)
    e = np.zeros_like(x)
    e[..., :2] = lam * math.cos(trap.omega_rf * t) * _unit_field(trap, x[..., :2], with_images)
    return e + _static_field_si(trap, x)


def field(trap, point, t=0.0):
    """Electric field (V/mm) of the unperturbed trap at ``point`` (mm).

    Four rod lines driven at the RF phase ``Omega t`` plus the static axial
    term. The plane, if any, is ignored here; see image_field().
    """
    p = np.asarray(point, dtype=float)
    _check_point(trap.without_plane(), p[..., :2])
    return _field_si(trap, p * 1e-3, t, with_images=False) * 1e-3


def image_field(trap, point, t=0.0, ion_position=None):
    """Total field (V/mm) with the grounded plane's image charges included.

    Adds the mirrored, sign-flipped rod lines and, when ``ion_position``
    (mm) is given, the field of the ion's own image charge.
    """
    p = np.asarray(point, dtype=float)
    _check_point(trap, p[..., :2])
    e = _field_si(trap, p * 1e-3, t, with_images=True)
    if ion_position is not None and trap.plane_distance is not None and trap.include_self_image:
        n = np.array([*trap.plane_normal[:2], 0.0])
        ion = np.asarray(ion_position, dtype=float) * 1e-3
        img = ion - 2.0 * (ion @ n - trap.plane_distance * 1e-3) * n
        d = p * 1e-3 - img
        r = np.linalg.norm(d, axis=-1)[..., None]
        e = e - COULOMB_K * trap.charge * d / r**3
    return e * 1e-3


def potential(trap, point, t=0.0):
    """RF electrode potential (V) at ``point`` (mm), images included.

    Only defined up to the arbitrary constant of 2D line charges when there is
    no plane; with a plane the constant is fixed by phi = 0 on the plane.
    """
    p = np.asarray(point, dtype=float)
    lam = line_density(trap)
    return lam * math.cos(trap.omega_rf * t) * _unit_potential(trap, p[..., :2] * 1e-3, with_images=True)


# --- pseudopotential oracle ----------------------------------------------

def _unit_field_jacobian(trap, xy, with_images=True):
    """d E_i / d x_j (V/m^2) per unit line density at a single point xy (m)."""
    pos, sign = _line_sources(trap, with_images)
    d = xy[None, :] - pos
    r2 = np.sum(d * d, axis=-1)
    k = sign / (2.0 * math.pi * EPS0)
    eye = np.eye(2)[None]
    outer = d[:, :, None] * d[:, None, :]
    return np.sum(k[:, None, None] * (eye / r2[:, None, None] - 2.0 * outer / (r2**2)[:, None, None]),
                  axis=0)


def secular_force(trap, x):
    """Time-averaged force (N) on the ion at x (m, shape (3,)).

    Pseudopotential q^2 |E0|^2 / (4 m Omega^2) of the RF amplitude field,
    plus the static axial term and the self-image attraction.
    """
    x = np.asarray(x, dtype=float)
    lam = line_density(trap)
    q, m, W = trap.charge, trap.mass, trap.omega_rf
    e0 = lam * _unit_field(trap, x[:2])
    jac = lam * _unit_field_jacobian(trap, x[:2])
    force = np.zeros(3)
    force[:2] = -q * q / (2.0 * m * W * W) * (jac.T @ e0)
    force += q * _static_field_si(trap, x)
    force += _self_image_force_si(trap, x)
    return force


def _secular_stiffness(trap):
    return trap.mass * (2.0 * math.pi * trap.secular_frequency) ** 2


def equilibrium_shift(trap):
    """Displacement (um) of the pseudopotential minimum from the trap centre."""
    check_stability(trap)
    if trap.plane_distance is None:
        return np.zeros(3)
    k = _secular_stiffness(trap)
    scale = 1e-6

    def f(u):
        return secular_force(trap, u * scale) / (k * scale)

    sol = root(f, np.zeros(3), method="hybr", options={"xtol": 1e-13})
    if not np.all(np.isfinite(sol.x)) or np.max(np.abs(f(sol.x))) > 1e-9:
        raise NoStableMinimum(sol.message)
    return sol.x * scale * 1e6


def shift_contributions(trap):
    """Equilibrium shift (um) split into RF-image and self-image parts."""
    rf = equilibrium_shift(replace(trap, include_self_image=False))
    selfi = equilibrium_shift(replace(trap, include_rf_images=False))
    return rf, selfi


# --- dynamics -------------------------------------------------------------

@dataclass
class OrbitResult:
    t: np.ndarray                 # s
    positions: np.ndarray         # um, shape (n, 3)
    rms_displacement: float       # um
    equilibrium_shift: float      # um
    reference: np.ndarray = None

    @property
    def trajectory(self):
        return np.column_stack([self.t, self.positions])


def _stack_acceleration(traps):
    """Vectorised acceleration over ions sharing geometry but not planes."""
    lams = np.array([line_density(tr) for tr in traps])
    srcs = [_line_sources(tr, True) for tr in traps]
    n_src = max(len(s[1]) for s in srcs)
    pos = np.zeros((len(traps), n_src, 2))
    sgn = np.zeros((len(traps), n_src))
    for i, (p, s) in enumerate(srcs):
        pos[i, :len(s)] = p
        # padding lines are placed far away with zero density
        pos[i, len(s):] = 1.0
        sgn[i, :len(s)] = s
    coef = (lams[:, None] * sgn / (2.0 * math.pi * EPS0))
    tr0 = traps[0]
    W = tr0.omega_rf
    qm = np.array([tr.charge / tr.mass for tr in traps])
    kz = (2.0 * math.pi * np.array([tr.axial_frequency for tr in traps])) ** 2
    planes = [(np.array([*tr.plane_normal[:2], 0.0]), tr.plane_distance * 1e-3)
              if tr.plane_distance is not None and tr.include_self_image else None for tr in traps]
    img_k = np.array([COULOMB_K * tr.charge**2 / tr.mass for tr in traps])

    def acc(x, t):
        d = x[:, None, :2] - pos
        r2 = np.einsum("kij,kij->ki", d, d)
        exy = np.einsum("ki,kij->kj", coef / r2, d) * math.cos(W * t)
        a = np.empty_like(x)
        a[:, :2] = qm[:, None] * exy + 0.5 * kz[:, None] * x[:, :2]
        a[:, 2] = -kz * x[:, 2]
        for i, pl in enumerate(planes):
            if pl is not None:
                n, dist = pl
                gap = dist - x[i] @ n
                a[i] += img_k[i] / (2.0 * gap) ** 2 * n
        return a

    return acc


def integrate(traps, x0, v0, n_cycles, steps_per_cycle=400, damping=0.0, sample_every=1):
    """Velocity-Verlet integration of independent ions, one per trap.

    Damping is applied as an exact velocity decay exp(-gamma dt / 2) on
    either side of each Verlet step, so gamma = 0 leaves the scheme
    symplectic. Returns sample times (s), positions (m) with shape
    (n_samples, k, 3) and final velocities.
    """
    if steps_per_cycle < 200:
        raise StepTooLarge("timestep must be at most one RF period / 200")
    traps = list(traps)
    W = traps[0].omega_rf
    if any(tr.omega_rf != W for tr in traps):
        raise ValueError("all traps in a batch must share the RF frequency")
    acc = _stack_acceleration(traps)
    dt = 2.0 * math.pi / W / steps_per_cycle
    n_steps = int(n_cycles * steps_per_cycle)
    decay = math.exp(-0.5 * damping * dt)
    x = np.array(x0, dtype=float).reshape(len(traps), 3)
    v = np.array(v0, dtype=float).reshape(len(traps), 3)
    a = acc(x, 0.0)
    n_samples = n_steps // sample_every + 1
    ts = np.empty(n_samples)
    xs = np.empty((n_samples,) + x.shape)
    ts[0] = 0.0
    xs[0] = x
    j = 1
    for step in range(1, n_steps + 1):
        v *= decay
        v += 0.5 * dt * a
        x += dt * v
        a = acc(x, step * dt)
        v += 0.5 * dt * a
        v *= decay
        if step % sample_every == 0:
            if np.any(np.linalg.norm(x[:, :2], axis=1) > UNSTABLE_RADIUS):
                raise UnstableOrbit(f"ion left the trap after {step * dt * 1e6:.3f} us")
            ts[j] = step * dt
            xs[j] = x
            j += 1
    return ts[:j], xs[:j], v


DEFAULT_DAMPING = 5e5       # 1/s
DEFAULT_CYCLES = 600
DEFAULT_WINDOW_CYCLES = 100


def _rms_over_window(x, ref, n_samples):
    d = x[-n_samples:] - ref[-n_samples:]
    return float(np.sqrt(np.mean(np.sum(d * d, axis=-1))))


def integrate_orbit(trap, duration=DEFAULT_CYCLES, damping=DEFAULT_DAMPING,
                    steps_per_cycle=400, window=DEFAULT_WINDOW_CYCLES, x0_um=(0.0, 0.0, 0.0),
                    sample_every=4):
    """Full RF dynamics with the plane; compares against the plane-free orbit.

    The ion starts at rest at ``x0_um`` in both the perturbed and reference
    traps. After the damping transient, the rms separation of the two
    orbits over the last ``window`` RF cycles is the orbit displacement.
    """
    return displacement_orbits(trap, [trap.plane_distance], duration, damping, steps_per_cycle,
                               window, x0_um, sample_every)[0]


def displacement_orbits(trap, distances, duration=DEFAULT_CYCLES, damping=DEFAULT_DAMPING,
                        steps_per_cycle=400, window=DEFAULT_WINDOW_CYCLES, x0_um=(0.0, 0.0, 0.0),
                        sample_every=4):
    """integrate_orbit() for several plane distances in one vectorised run."""
    if duration < 200:
        raise ValueError("duration must be at least 200 RF cycles")
    if steps_per_cycle % sample_every:
        raise ValueError("sample_every must divide steps_per_cycle")
    check_stability(trap)
    reference = trap.without_plane()
    traps = [reference] + [trap.with_plane(d) if d is not None else reference for d in distances]
    k = len(traps)
    x0 = np.tile(np.asarray(x0_um, dtype=float) * 1e-6, (k, 1))
    t, xs, _ = integrate(traps, x0, np.zeros((k, 3)), duration, steps_per_cycle, damping,
                         sample_every)
    ref = xs[:, 0]
    out = []
    for i, tr in enumerate(traps[1:], start=1):
        rms = _rms_over_window(xs[:, i], ref, window * steps_per_cycle // sample_every)
        shift = float(np.linalg.norm(equilibrium_shift(tr)))
        out.append(OrbitResult(t, xs[:, i] * 1e6, rms * 1e6, shift, ref * 1e6))
    return out


def displacement_sweep(trap, distances, **kwargs):
    """Rows of (distance_mm, rms_displacement_um, equilibrium_shift_um)."""
    distances = [float(d) for d in distances]
    if any(d <= 0 for d in distances):
        raise ValueError("distances must be positive")
    if distances != sorted(distances):
        raise ValueError("distances must be sorted")
    results = displacement_orbits(trap, distances, **kwargs)
    return [(d, r.rms_displacement, r.equilibrium_shift) for d, r in zip(distances, results)]


def simulated_secular_frequency(trap, n_cycles=1000, start_um=10.0, steps_per_cycle=400):
    """Secular frequency (Hz) from the spectral peak of an undamped orbit.

    The ion starts at rest ``start_um`` from the centre along the principal
    axis (x + y)/sqrt(2). The peak of the Hann-windowed spectrum of that
    coordinate is refined by parabolic interpolation of log power.
    """
    check_stability(trap)
    s = start_um * 1e-6 / math.sqrt(2.0)
    t, xs, _ = integrate([trap], [[s, s, 0.0]], [[0.0, 0.0, 0.0]], n_cycles, steps_per_cycle)
    u = (xs[:, 0, 0] + xs[:, 0, 1]) / math.sqrt(2.0)
    u = u - u.mean()
    dt = t[1] - t[0]
    n_fft = 8 * len(u)
    spec = np.abs(np.fft.rfft(u * np.hanning(len(u)), n_fft)) ** 2
    freqs = np.fft.rfftfreq(n_fft, dt)
    # ignore micromotion sidebands near the drive
    band = freqs < 0.5 * trap.rf_frequency
    i = int(np.argmax(np.where(band, spec, 0.0)))
    y0, y1, y2 = np.log(spec[i - 1:i + 2])
    delta = 0.5 * (y0 - y2) / (y0 - 2 * y1 + y2)
    return float(freqs[i] + delta * (freqs[1] - freqs[0]))
