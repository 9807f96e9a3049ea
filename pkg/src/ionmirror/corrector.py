"""Corrector plate synthesis for the spherical collection mirror.

Coordinate frame: the ion (point source) sits at z = 0, the paraxial focus
of a concave mirror of radius ``R`` whose vertex is at z = +R/2. Reflected
light travels toward -z through a flat vacuum viewport and then the
corrector plate, whose flat face meets the light first and whose aspheric
exit face carries the correction. Sag values of a corrector are plate
thickness added at radius r; the exit surface sits at
``z = back_vertex_z - thickness_sag(r)``.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline, PchipInterpolator

from . import geometry as geo
from .materials import DEFAULT_WAVELENGTH_NM, index

ANALYTIC_SCHMIDT = "AnalyticSchmidt"
ITERATIVE_NUMERIC = "IterativeNumeric"
POLYNOMIAL_FIT = "PolynomialFit"

EVEN_ONLY = "EvenOnly"
ODD_ONLY = "OddOnly"
FULL = "Full"
BASES = (EVEN_ONLY, ODD_ONLY, FULL)

DEFAULT_MAX_ITER = 50
DEFAULT_N_GRID = 513
DEFAULT_N_RAYS = 256


class NonConvergence(RuntimeError):
    def __init__(self, message, history=(), curve=None):
        super().__init__(message)
        self.history = list(history)
        self.curve = curve


class CausticError(NonConvergence):
    """Fan rays cross before the corrector, so no single-valued plate exists."""


class InsufficientSamples(ValueError):
    pass


class RankDeficient(ValueError):
    pass


def quarter_wave_mm(wavelength_nm=DEFAULT_WAVELENGTH_NM):
    return wavelength_nm * 1e-6 / 4.0


@dataclass(frozen=True)
class Layout:
    """Geometry of the collection optics. Distances in mm from the focus."""

    mirror_radius: float = 20.0
    mirror_conic: float = 0.0
    mirror_half_width: float = 10.0
    aperture_radius: float = 9.0
    viewport_distance: float = 17.0
    viewport_thickness: float = 3.1
    viewport_material: str = "FusedSilica"
    viewport_radius: float = 19.05
    corrector_distance: float = 22.0
    corrector_thickness: float = 3.0
    corrector_material: str = "BK7"
    corrector_radius: float = 12.7
    wavelength_nm: float = DEFAULT_WAVELENGTH_NM

    @property
    def mirror_vertex_z(self):
        return 0.5 * self.mirror_radius

    @property
    def n_corrector(self):
        return index(self.corrector_material, self.wavelength_nm)

    @property
    def n_viewport(self):
        return index(self.viewport_material, self.wavelength_nm)

    @property
    def corrector_front_z(self):
        return -self.corrector_distance

    @property
    def corrector_back_z(self):
        return -(self.corrector_distance + self.corrector_thickness)

    def mirror(self, parabolic=False):
        # The parabola with the same vertex radius has its focus at the source.
        return geo.spherical_mirror(
            self.mirror_vertex_z, -self.mirror_radius, self.mirror_half_width,
            conic=-1.0 if parabolic else self.mirror_conic,
            label="parabolic mirror" if parabolic else "mirror",
        )

    def viewport(self):
        nv = self.n_viewport
        z0 = -self.viewport_distance
        return (
            geo.flat_interface(z0, 1.0, nv, self.viewport_radius, "viewport in"),
            geo.flat_interface(z0 - self.viewport_thickness, nv, 1.0, self.viewport_radius, "viewport out"),
        )

    def corrector_front(self):
        return geo.flat_interface(
            self.corrector_front_z, 1.0, self.n_corrector, self.corrector_radius, "corrector in"
        )

    def corrector_back(self, thickness_sag=None):
        """Exit face. ``thickness_sag`` is a curve/fit, or None for a flat face."""
        z0 = self.corrector_back_z
        n = self.n_corrector
        if thickness_sag is None:
            return geo.flat_interface(z0, n, 1.0, self.corrector_radius, "corrector out")
        if isinstance(thickness_sag, FitResult):
            coeffs = -np.asarray(thickness_sag.coefficients)
            return geo.aspheric_interface(z0, n, 1.0, self.corrector_radius, coefficients=coeffs,
                                          label="corrector out")
        if isinstance(thickness_sag, CorrectorCurve):
            if thickness_sag.source == ANALYTIC_SCHMIDT and thickness_sag.coefficients is not None:
                coeffs = -np.asarray(thickness_sag.coefficients)
                return geo.aspheric_interface(z0, n, 1.0, self.corrector_radius, coefficients=coeffs,
                                              label="corrector out")
            return geo.aspheric_interface(z0, n, 1.0, self.corrector_radius,
                                          table=(thickness_sag.r, -thickness_sag.z),
                                          label="corrector out")
        raise TypeError(f"cannot build a corrector surface from {type(thickness_sag).__name__}")

    def front_system(self, parabolic=False):
        """Mirror, viewport and the corrector's flat entrance face."""
        return geo.OpticalSystem(
            (self.mirror(parabolic), *self.viewport(), self.corrector_front()), self.wavelength_nm
        )

    def system(self, corrector="flat", parabolic=False):
        """Full collection system.

        ``corrector`` is a CorrectorCurve or FitResult, ``"flat"`` for an
        uncorrected plate, or None to take the plate out entirely.
        """
        surfaces = [self.mirror(parabolic), *self.viewport()]
        if corrector is not None:
            back = self.corrector_back(None if isinstance(corrector, str) else corrector)
            surfaces += [self.corrector_front(), back]
        return geo.OpticalSystem(tuple(surfaces), self.wavelength_nm)

    def aim(self, height, source_z=0.0, source_r=0.0, parabolic=False):
        """Ray from the source toward the mirror point at radial ``height``."""
        m = self.mirror(parabolic)
        zm = m.vertex_z + m.sag(height)
        return geo.MeridionalRay.from_direction(source_z, source_r, zm - source_z, height - source_r)

    def fan(self, n_rays, symmetric=False, source_z=0.0, source_r=0.0, parabolic=False,
            aperture_radius=None):
        """Rays uniform in mirror height over [0, a], or [-a, a] if symmetric."""
        a = self.aperture_radius if aperture_radius is None else aperture_radius
        heights = np.linspace(-a if symmetric else 0.0, a, n_rays)
        return heights, [self.aim(h, source_z, source_r, parabolic) for h in heights]

    @property
    def numerical_aperture(self):
        m = self.mirror()
        a = self.aperture_radius
        return a / math.hypot(a, m.vertex_z + m.sag(a))


@dataclass
class CorrectorCurve:
    r: np.ndarray
    z: np.ndarray
    source: str
    iterations_used: int = 0
    converged: bool = True
    history: list = field(default_factory=list)
    # Polynomial form, when the curve is analytic.
    coefficients: np.ndarray = None

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.z = np.asarray(self.z, dtype=float)
        if self.r.shape != self.z.shape or self.r.ndim != 1:
            raise ValueError("r and z must be 1-D arrays of equal length")

    @property
    def aperture_radius(self):
        return float(self.r[-1])

    def sag(self, r):
        if self.coefficients is not None:
            return np.polynomial.polynomial.polyval(np.abs(r), self.coefficients)
        return CubicSpline(self.r, self.z, bc_type=((1, 0.0), "not-a-knot"))(np.abs(r))


@dataclass
class FitResult:
    basis: str
    coefficients: np.ndarray
    deviation_r: np.ndarray
    deviation: np.ndarray
    max_abs_deviation: float

    def sag(self, r):
        return np.polynomial.polynomial.polyval(np.abs(r), self.coefficients)

    @property
    def max_order(self):
        nz = np.flatnonzero(self.coefficients)
        return int(nz[-1]) if nz.size else 0


def schmidt_sag(r, R, n, k=0.0):
    """Lowest-order Schmidt corrector thickness (r^4 - k r^2) / (4 (n-1) R^3).

    The normalisation factor that multiplies the bracket is 1 in millimetre
    units, which is what makes BK7 and R = 20 mm give 5.98785e-5 mm^-3.
    """
    if not n > 1.0:
        raise ValueError("n must exceed 1")
    if not R > 0.0:
        raise ValueError("R must be positive")
    r = np.asarray(r, dtype=float)
    out = (r**4 - k * r**2) / (4.0 * (n - 1.0) * R**3)
    return float(out) if out.ndim == 0 else out


def schmidt_coefficient(R, n):
    return 1.0 / (4.0 * (n - 1.0) * R**3)


def quartic_curve(layout=Layout(), r=None, n_grid=DEFAULT_N_GRID):
    """The analytic k = 0 Schmidt plate sampled like a derived curve."""
    if r is None:
        r = np.linspace(0.0, layout.corrector_radius, n_grid)
    c4 = schmidt_coefficient(layout.mirror_radius, layout.n_corrector)
    coeffs = np.zeros(5)
    coeffs[4] = c4
    return CorrectorCurve(r, schmidt_sag(r, layout.mirror_radius, layout.n_corrector),
                          ANALYTIC_SCHMIDT, coefficients=coeffs)


def _rays_in_plate(layout, n_rays, aperture_radius=None, symmetric=False):
    heights, fan = layout.fan(n_rays, symmetric=symmetric, aperture_radius=aperture_radius)
    front = layout.front_system()
    inside = [geo.trace(front, ray).ray for ray in fan]
    return heights, inside


def _arrival_radius(ray, z_plane):
    dz, dr = ray.direction
    return ray.r + (z_plane - ray.z) / dz * dr


def required_slopes(rays, surface, n_glass, target_slope=None):
    """Sag slope the exit face needs where each in-plate ray arrives.

    Returns (arrival radii, d(thickness)/dr). ``target_slope(r)`` gives the
    desired exit dr/d|z|; None means collimated.
    """
    rho = np.empty(len(rays))
    slope = np.empty(len(rays))
    for i, ray in enumerate(rays):
        _, r, _ = geo.intersect(ray, surface)
        dz, dr = ray.direction
        t = 0.0 if target_slope is None else float(target_slope(r))
        h = math.hypot(1.0, t)
        oz, orr = -1.0 / h, t / h
        # n1 d_in - n2 d_out is along the surface normal (1, thickness').
        nz = n_glass * dz - oz
        nr = n_glass * dr - orr
        rho[i] = r
        slope[i] = nr / nz
    return rho, slope


def derive_corrector(layout=Layout(), n_grid=DEFAULT_N_GRID, tol=None,
                     max_iter=DEFAULT_MAX_ITER, n_rays=DEFAULT_N_RAYS, target_slope=None):
    """Iteratively synthesise the exit-face profile that collimates the fan.

    Each pass traces the fan to the current exit face, solves the vector
    form of Snell's law for the surface slope that sends every ray parallel
    to the axis (or along ``target_slope(r)``), resamples those slopes onto
    a uniform grid with monotone cubic interpolation and integrates them
    with the trapezoid rule. The pass repeats with the new surface until the
    largest sag change drops below ``tol`` (default a quarter wave).

    The grid spans r = 0 to where the marginal ray crosses the flat exit
    vertex plane on the first pass.

    Raises NonConvergence after ``max_iter`` passes and CausticError if the
    arrival radii stop increasing with mirror height.
    """
    if tol is None:
        tol = quarter_wave_mm(layout.wavelength_nm)
    if n_grid < 2:
        raise InsufficientSamples("n_grid must be at least 2")
    _, rays = _rays_in_plate(layout, n_rays)
    edge = max(abs(_arrival_radius(ray, layout.corrector_back_z)) for ray in rays)
    if edge < 1e-12:
        # a zero-aperture fan is the axial ray alone, already collimated
        r = np.linspace(0.0, layout.corrector_radius, n_grid)
        return CorrectorCurve(r, np.zeros_like(r), ITERATIVE_NUMERIC, 0, True, [])

    grid = np.linspace(0.0, edge, n_grid)
    sag = np.zeros(n_grid)
    history = []
    n_glass = layout.n_corrector
    for it in range(1, max_iter + 1):
        current = CorrectorCurve(grid, sag, ITERATIVE_NUMERIC, it - 1, False, list(history))
        surface = layout.corrector_back(None if it == 1 else current)
        rho, slope = required_slopes(rays, surface, n_glass, target_slope)
        if np.any(np.diff(rho) <= 0.0):
            raise CausticError(
                "arrival radii are not increasing with mirror height; the fan "
                "crosses itself before the corrector", history, current)
        slope_grid = PchipInterpolator(rho, slope, extrapolate=True)(grid)
        new = cumulative_trapezoid(slope_grid, grid, initial=0.0)
        change = float(np.max(np.abs(new - sag)))
        history.append(change)
        sag = new
        if change < tol:
            return CorrectorCurve(grid, sag, ITERATIVE_NUMERIC, it, True, history)
    raise NonConvergence(
        f"no convergence after {max_iter} iterations; last max sag change "
        f"{history[-1]:.3e} mm (tol {tol:.3e} mm)",
        history, CorrectorCurve(grid, sag, ITERATIVE_NUMERIC, max_iter, False, history))


def output_angles(system, rays):
    """Angle of each traced ray to the -z axis, as an array."""
    out = np.empty(len(rays))
    for i, ray in enumerate(rays):
        final = geo.trace(system, ray).ray
        dz, dr = final.direction
        out[i] = math.atan2(dr, -dz)
    return out


def collimation_residual(curve, layout=Layout(), n_rays=DEFAULT_N_RAYS, symmetric=False):
    """Worst |exit angle| (rad) over the fan with ``curve`` as the exit face.

    ``curve`` may be a CorrectorCurve, a FitResult, ``"flat"`` or None (no
    plate).
    """
    _, fan = layout.fan(n_rays, symmetric=symmetric)
    return float(np.max(np.abs(output_angles(layout.system(curve), fan))))


def _basis_powers(basis, max_order):
    if basis == EVEN_ONLY:
        return list(range(2, max_order + 1, 2))
    if basis == ODD_ONLY:
        return list(range(1, max_order + 1, 2))
    if basis == FULL:
        return list(range(1, max_order + 1))
    raise ValueError(f"unknown basis {basis!r}; expected one of {BASES}")


def fit_polynomial(curve, basis=FULL, max_order=10):
    """Least-squares polynomial fit of a sampled thickness profile.

    The constant term is left out of every basis so the fit passes through
    the vertex (fit(0) = 0), like the numeric curve. Powers are fitted in
    r / r_max for conditioning and rescaled to mm units afterwards.
    """
    powers = _basis_powers(basis, max_order)
    r, z = curve.r, curve.z
    if r.size < max_order + 1:
        raise InsufficientSamples(f"{r.size} samples; need at least {max_order + 1}")
    scale = float(np.max(np.abs(r)))
    if scale == 0.0:
        raise RankDeficient("all samples at r = 0")
    x = r / scale
    A = np.stack([x**p for p in powers], axis=1)
    sol, _, rank, _ = np.linalg.lstsq(A, z, rcond=None)
    if rank < len(powers):
        raise RankDeficient(f"design matrix rank {rank} < {len(powers)}")
    coeffs = np.zeros(max_order + 1)
    for p, c in zip(powers, sol):
        coeffs[p] = c / scale**p
    dev = A @ sol - z
    return FitResult(basis, coeffs, r.copy(), dev, float(np.max(np.abs(dev))))
