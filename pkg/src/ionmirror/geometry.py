"""Exact ray tracing in the meridional (z, r) plane.

All lengths are millimetres and all angles radians. A ray direction is
stored as the angle ``u`` from the +z axis, so a ray moving along the axis
toward -z has ``u = pi``. The radial coordinate is signed; rays may cross
the axis freely.

Surfaces are rotationally symmetric profiles ``z = vertex_z + sag(|r|)``.
"""

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

SPHERICAL_MIRROR = "SphericalMirror"
FLAT_INTERFACE = "FlatInterface"
ASPHERIC_INTERFACE = "AsphericInterface"
SURFACE_KINDS = (SPHERICAL_MIRROR, FLAT_INTERFACE, ASPHERIC_INTERFACE)

MAX_SAG_ORDER = 10
NEWTON_TOL = 1e-12
NEWTON_MAXITER = 50
# Smallest path length that counts as "ahead of the ray". Rays leaving a
# surface start exactly on it, so s = 0 must be rejected.
MIN_PATH = 1e-9


class TraceError(Exception):
    """Base class for kernel failures; ``surface_index`` is set by trace()."""

    surface_index = None


class NoIntersection(TraceError):
    pass


class Vignetted(TraceError):
    pass


class TotalInternalReflection(TraceError):
    pass


def _wrap_angle(u):
    u = math.remainder(u, 2.0 * math.pi)
    if u <= -math.pi:
        u += 2.0 * math.pi
    return u


@dataclass(frozen=True)
class MeridionalRay:
    z: float
    r: float
    u: float

    def __post_init__(self):
        if not (math.isfinite(self.z) and math.isfinite(self.r) and math.isfinite(self.u)):
            raise ValueError(f"non-finite ray {self}")
        object.__setattr__(self, "u", _wrap_angle(float(self.u)))

    @classmethod
    def from_direction(cls, z, r, dz, dr):
        return cls(z, r, math.atan2(dr, dz))

    @property
    def direction(self):
        return math.cos(self.u), math.sin(self.u)

    def propagate(self, s):
        dz, dr = self.direction
        return MeridionalRay(self.z + s * dz, self.r + s * dr, self.u)

    def reversed(self):
        return MeridionalRay(self.z, self.r, self.u + math.pi)

    @property
    def slope(self):
        """dr/dz along the ray (infinite for a ray perpendicular to the axis)."""
        dz, dr = self.direction
        return dr / dz if dz != 0.0 else math.copysign(math.inf, dr)


@dataclass(frozen=True, eq=False)
class SurfaceElement:
    """One rotationally symmetric optical surface.

    ``curvature_radius`` places the centre of curvature at
    ``vertex_z + curvature_radius`` (mirrors only); ``conic`` = -1 turns the
    sphere into a paraboloid. Aspheres carry either ``sag_coefficients``
    (c_0..c_10 of sag(r) = sum c_j |r|^j) or a tabulated ``sag_table`` of
    (r, z) samples interpolated with a cubic spline.
    """

    kind: str
    vertex_z: float
    aperture_radius: float
    n_before: float = 1.0
    n_after: float = 1.0
    curvature_radius: float = None
    conic: float = 0.0
    sag_coefficients: tuple = None
    sag_table: tuple = None
    label: str = ""

    def __post_init__(self):
        if self.kind not in SURFACE_KINDS:
            raise ValueError(f"unknown surface kind {self.kind!r}")
        if not self.aperture_radius > 0:
            raise ValueError("aperture_radius must be positive")
        if self.kind == SPHERICAL_MIRROR:
            if not self.curvature_radius:
                raise ValueError("mirror needs a nonzero curvature_radius")
            if self.n_after != self.n_before:
                raise ValueError("a mirror has n_after == n_before")
        if self.kind == ASPHERIC_INTERFACE:
            if (self.sag_coefficients is None) == (self.sag_table is None):
                raise ValueError("asphere needs exactly one of sag_coefficients, sag_table")
            if self.sag_coefficients is not None:
                c = tuple(float(x) for x in self.sag_coefficients)
                if len(c) > MAX_SAG_ORDER + 1:
                    raise ValueError(f"sag polynomial order exceeds {MAX_SAG_ORDER}")
                object.__setattr__(self, "sag_coefficients", c)
            else:
                r, z = (np.asarray(a, dtype=float) for a in self.sag_table)
                object.__setattr__(self, "sag_table", (r, z))

    @property
    def is_mirror(self):
        return self.kind == SPHERICAL_MIRROR

    @cached_property
    def _spline(self):
        r, z = self.sag_table
        # a symmetric profile has zero slope on axis
        bc = ((1, 0.0), "not-a-knot") if r[0] == 0.0 else "not-a-knot"
        return CubicSpline(r, z, bc_type=bc, extrapolate=True)

    @cached_property
    def _poly_deriv(self):
        return P.polyder(self.sag_coefficients)

    def sag(self, r):
        a = abs(r)
        if self.kind == FLAT_INTERFACE:
            return 0.0
        if self.kind == SPHERICAL_MIRROR:
            c = 1.0 / self.curvature_radius
            arg = 1.0 - (1.0 + self.conic) * c * c * a * a
            if arg < 0.0:
                raise NoIntersection(f"r={r} beyond the conic's extent")
            return c * a * a / (1.0 + math.sqrt(arg))
        if self.sag_coefficients is not None:
            return float(P.polyval(a, self.sag_coefficients))
        return float(self._spline(a))

    def sag_slope(self, r):
        """d(sag)/dr at signed r."""
        a = abs(r)
        sgn = 1.0 if r >= 0 else -1.0
        if self.kind == FLAT_INTERFACE:
            return 0.0
        if self.kind == SPHERICAL_MIRROR:
            c = 1.0 / self.curvature_radius
            arg = 1.0 - (1.0 + self.conic) * c * c * a * a
            if arg <= 0.0:
                raise NoIntersection(f"r={r} beyond the conic's extent")
            return sgn * c * a / math.sqrt(arg)
        if self.sag_coefficients is not None:
            d = float(P.polyval(a, self._poly_deriv)) if len(self._poly_deriv) else 0.0
        else:
            d = float(self._spline(a, 1))
        return sgn * d

    def normal(self, r):
        """Unit normal (nz, nr) of z - vertex_z - sag(r) = 0, pointing to +z."""
        m = self.sag_slope(r)
        h = math.hypot(1.0, m)
        return 1.0 / h, -m / h

    def flipped(self):
        """The same surface met from the other side."""
        return replace(self, n_before=self.n_after, n_after=self.n_before)


def spherical_mirror(vertex_z, curvature_radius, aperture_radius, n=1.0, conic=0.0, label="mirror"):
    return SurfaceElement(
        SPHERICAL_MIRROR, vertex_z, aperture_radius, n, n,
        curvature_radius=curvature_radius, conic=conic, label=label,
    )


def flat_interface(vertex_z, n_before, n_after, aperture_radius, label=""):
    return SurfaceElement(FLAT_INTERFACE, vertex_z, aperture_radius, n_before, n_after, label=label)


def aspheric_interface(vertex_z, n_before, n_after, aperture_radius,
                       coefficients=None, table=None, label=""):
    return SurfaceElement(
        ASPHERIC_INTERFACE, vertex_z, aperture_radius, n_before, n_after,
        sag_coefficients=None if coefficients is None else tuple(coefficients),
        sag_table=table, label=label,
    )


@dataclass(frozen=True)
class OpticalSystem:
    surfaces: tuple = ()
    wavelength_nm: float = 493.4

    def __post_init__(self):
        object.__setattr__(self, "surfaces", tuple(self.surfaces))

    def reversed(self):
        return OpticalSystem(tuple(s.flipped() for s in reversed(self.surfaces)), self.wavelength_nm)


@dataclass(frozen=True)
class TraceResult:
    ray: MeridionalRay
    # (z, r) of the start point and of every intersection, in order.
    trajectory: list = field(default_factory=list)


def _check_aperture(surface, z, r):
    if abs(r) > surface.aperture_radius:
        raise Vignetted(
            f"|r|={abs(r):.6g} mm exceeds aperture {surface.aperture_radius} mm "
            f"of {surface.label or surface.kind} at z={z:.6g}"
        )


def _intersect_flat(ray, surface):
    dz, dr = ray.direction
    if dz == 0.0:
        raise NoIntersection("ray parallel to flat surface")
    return (surface.vertex_z - ray.z) / dz


def _intersect_conic(ray, surface):
    # c (r^2 + (1+k) z'^2) - 2 z' = 0 with z' measured from the vertex.
    c = 1.0 / surface.curvature_radius
    k1 = 1.0 + surface.conic
    dz, dr = ray.direction
    a0 = ray.z - surface.vertex_z
    b0 = ray.r
    A = c * (dr * dr + k1 * dz * dz)
    B = 2.0 * c * (b0 * dr + k1 * a0 * dz) - 2.0 * dz
    C = c * (b0 * b0 + k1 * a0 * a0) - 2.0 * a0
    if abs(A) < 1e-300:
        roots = [] if B == 0.0 else [-C / B]
    else:
        disc = B * B - 4.0 * A * C
        if disc < 0.0:
            raise NoIntersection("ray misses the mirror")
        sq = math.sqrt(disc)
        q = -0.5 * (B + math.copysign(sq, B))
        roots = [q / A] if q == 0.0 else [q / A, C / q]
    for s in sorted(roots):
        if s <= MIN_PATH:
            continue
        zp = a0 + s * dz
        rp = b0 + s * dr
        # keep only the branch that contains the vertex
        arg = 1.0 - k1 * c * c * rp * rp
        if arg < 0.0:
            continue
        principal = c * rp * rp / (1.0 + math.sqrt(arg))
        if abs(zp - principal) <= 1e-6 * max(1.0, abs(surface.curvature_radius)):
            return s
    raise NoIntersection("no forward intersection with the mirror")


def _intersect_asphere(ray, surface):
    dz, dr = ray.direction
    if dz == 0.0:
        raise NoIntersection("ray parallel to the asphere axis plane")

    def f(s):
        return ray.z + s * dz - surface.vertex_z - surface.sag(ray.r + s * dr)

    s = (surface.vertex_z - ray.z) / dz
    for _ in range(NEWTON_MAXITER):
        r = ray.r + s * dr
        fp = dz - surface.sag_slope(r) * dr
        if fp == 0.0:
            break
        step = f(s) / fp
        s -= step
        if abs(step) < NEWTON_TOL:
            if abs(f(s)) <= NEWTON_TOL:
                return s
            break
    # Bisection fallback around the flat-surface seed.
    s0 = (surface.vertex_z - ray.z) / dz
    a = surface.aperture_radius
    span = (abs(surface.sag(a)) + abs(surface.sag(0.5 * a)) + 1.0) / abs(dz)
    lo, hi = s0 - span, s0 + span
    if f(lo) * f(hi) > 0:
        raise NoIntersection("asphere intersection could not be bracketed")
    return brentq(f, lo, hi, xtol=NEWTON_TOL, rtol=4 * np.finfo(float).eps, maxiter=200)


def intersect(ray, surface):
    """Intersection of ``ray`` with ``surface``.

    Returns ``(z, r, s)`` with ``s`` the path length from the ray origin.
    Raises NoIntersection when there is no forward hit and Vignetted when
    the hit lies outside the clear aperture.
    """
    if surface.kind == FLAT_INTERFACE:
        s = _intersect_flat(ray, surface)
    elif surface.kind == SPHERICAL_MIRROR:
        s = _intersect_conic(ray, surface)
    else:
        s = _intersect_asphere(ray, surface)
    if not s > MIN_PATH:
        raise NoIntersection(f"surface lies behind the ray (s={s:.3g})")
    dz, dr = ray.direction
    z, r = ray.z + s * dz, ray.r + s * dr
    _check_aperture(surface, z, r)
    return z, r, s


def reflect(ray, surface):
    z, r, _ = intersect(ray, surface)
    nz, nr = surface.normal(r)
    dz, dr = ray.direction
    dot = dz * nz + dr * nr
    return MeridionalRay.from_direction(z, r, dz - 2.0 * dot * nz, dr - 2.0 * dot * nr)


def refract_direction(dz, dr, nz, nr, n1, n2):
    """Vector Snell refraction of unit direction (dz, dr) at unit normal (nz, nr)."""
    cos_i = dz * nz + dr * nr
    if cos_i < 0.0:
        nz, nr, cos_i = -nz, -nr, -cos_i
    mu = n1 / n2
    k = 1.0 - mu * mu * (1.0 - cos_i * cos_i)
    if k < 0.0:
        raise TotalInternalReflection(
            f"sin(theta_t) = {mu * math.sqrt(max(0.0, 1.0 - cos_i * cos_i)):.6f} > 1"
        )
    g = math.sqrt(k) - mu * cos_i
    tz, tr = mu * dz + g * nz, mu * dr + g * nr
    h = math.hypot(tz, tr)
    return tz / h, tr / h


def refract(ray, surface):
    if surface.is_mirror:
        raise TypeError("refract() called on a mirror")
    z, r, _ = intersect(ray, surface)
    nz, nr = surface.normal(r)
    dz, dr = ray.direction
    tz, tr = refract_direction(dz, dr, nz, nr, surface.n_before, surface.n_after)
    return MeridionalRay.from_direction(z, r, tz, tr)


def interact(ray, surface):
    return reflect(ray, surface) if surface.is_mirror else refract(ray, surface)


def trace(system, ray):
    """Propagate ``ray`` through every surface of ``system`` in order."""
    traj = [(ray.z, ray.r)]
    for i, surface in enumerate(system.surfaces):
        try:
            ray = interact(ray, surface)
        except TraceError as exc:
            exc.surface_index = i
            exc.args = (f"surface {i} ({surface.label or surface.kind}): {exc}",)
            raise
        traj.append((ray.z, ray.r))
    return TraceResult(ray, traj)


def incidence_angles(ray_in, ray_out, surface):
    """Signed angles of the incoming and outgoing ray to the local normal.

    Mostly a diagnostic for checking Snell's law and the law of reflection.
    """
    nz, nr = surface.normal(ray_out.r)
    dz, dr = ray_in.direction
    tz, tr = ray_out.direction
    if dz * nz + dr * nr < 0.0:
        nz, nr = -nz, -nr
    ti = math.atan2(dr * nz - dz * nr, dz * nz + dr * nr)
    if surface.is_mirror:
        nz, nr = -nz, -nr
    tt = math.atan2(tr * nz - tz * nr, tz * nz + tr * nr)
    return ti, tt
