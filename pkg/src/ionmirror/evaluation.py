"""Image-quality and light-collection figures of merit.

The microscope objective behind the corrector is an ideal thin lens: a ray
reaching the principal plane at height h with slope t leaves with slope
t - h/f, so every collimated bundle focuses perfectly on the focal plane.
Spots are therefore a direct measure of how well the mirror + corrector
collimate the ion's light.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from . import geometry as geo
from .corrector import Layout

DEFAULT_FOCAL_LENGTH = 25.0
DEFAULT_LENS_GAP = 5.0
DEFAULT_FAN_SIZE = 256
VIGNETTING_WARN_FRACTION = 0.10
MAX_SOURCE_OFFSET_UM = 200.0


class AllRaysVignetted(RuntimeError):
    pass


class InvalidAperture(ValueError):
    pass


@dataclass(frozen=True)
class ImagingStage:
    objective_focal_length: float = DEFAULT_FOCAL_LENGTH
    objective_principal_plane_z: float = None
    image_plane_z: float = None

    def __post_init__(self):
        if not self.objective_focal_length > 0:
            raise ValueError("focal length must be positive")

    def principal_plane(self, layout):
        if self.objective_principal_plane_z is not None:
            return self.objective_principal_plane_z
        return layout.corrector_back_z - DEFAULT_LENS_GAP

    def image_plane(self, layout):
        """Image plane z; light travels toward -z so it lies below the lens."""
        zl = self.principal_plane(layout)
        z_img = zl - self.objective_focal_length if self.image_plane_z is None else self.image_plane_z
        if not z_img < zl:
            raise ValueError("image plane must lie beyond the objective")
        return z_img


@dataclass(frozen=True)
class SpotMetrics:
    centroid_r: float
    rms_radius: float
    n_rays_traced: int
    n_rays_vignetted: int
    image_plane_z: float

    @property
    def vignetted_fraction(self):
        total = self.n_rays_traced + self.n_rays_vignetted
        return self.n_rays_vignetted / total if total else 0.0

    @property
    def warning(self):
        return self.vignetted_fraction > VIGNETTING_WARN_FRACTION


def _weighted_stats(x, w):
    c = np.sum(w * x) / np.sum(w)
    return c, math.sqrt(max(0.0, float(np.sum(w * (x - c) ** 2) / np.sum(w))))


def spot_rms(x, weights=None):
    """(centroid, rms radius) of image-plane positions ``x``."""
    x = np.asarray(x, dtype=float)
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=float)
    return _weighted_stats(x, w)


@dataclass
class _LensRays:
    heights: np.ndarray     # height on the objective's principal plane
    slopes: np.ndarray      # dr/d(-z) after the objective
    weights: np.ndarray
    n_vignetted: int

    def positions(self, distance):
        return self.heights + distance * self.slopes


def _rays_at_objective(layout, system, stage, axial_um, radial_um, fan_size, parabolic):
    if abs(axial_um) > MAX_SOURCE_OFFSET_UM or abs(radial_um) > MAX_SOURCE_OFFSET_UM:
        raise ValueError(f"source offsets must lie within +-{MAX_SOURCE_OFFSET_UM} um")
    if fan_size < 2:
        raise ValueError("fan_size must be at least 2")
    zl = stage.principal_plane(layout)
    f = stage.objective_focal_length
    heights, fan = layout.fan(fan_size, symmetric=True, source_z=axial_um * 1e-3,
                              source_r=radial_um * 1e-3, parabolic=parabolic)
    # Simpson weights over the uniform fan keep the rms converged at modest
    # fan sizes even when the residual error piles up at the rim
    quad = simpson(np.eye(len(heights)), x=heights, axis=1)
    h_out, t_out, w = [], [], []
    vignetted = 0
    for pupil, qw, ray in zip(heights, quad, fan):
        try:
            final = geo.trace(system, ray).ray
        except geo.Vignetted:
            vignetted += 1
            continue
        dz, dr = final.direction
        t = dr / -dz
        h = final.r + (final.z - zl) * t
        h_out.append(h)
        t_out.append(t - h / f)
        # each meridional ray stands for an annulus of the pupil
        w.append(abs(pupil) * qw)
    if not h_out:
        raise AllRaysVignetted("every ray in the fan was vignetted")
    return _LensRays(np.array(h_out), np.array(t_out), np.array(w), vignetted)


def best_focus_distance(rays):
    """Lens-to-image distance minimising the weighted rms spot.

    Image positions are linear in the distance, so the rms is the square
    root of a quadratic and the minimiser is closed form.
    """
    w = rays.weights / np.sum(rays.weights)
    h = rays.heights - np.sum(w * rays.heights)
    t = rays.slopes - np.sum(w * rays.slopes)
    var_t = np.sum(w * t * t)
    if var_t == 0.0:
        return None
    return float(-np.sum(w * h * t) / var_t)


def spot_size(layout=Layout(), corrector="flat", stage=ImagingStage(), source_axial_offset=0.0,
              source_radial_offset=0.0, fan_size=DEFAULT_FAN_SIZE, parabolic=False,
              best_focus=False):
    """Rms spot of a point source imaged through mirror, plate and objective.

    Offsets are in micrometres (axial positive toward the mirror). The fan is
    uniform in mirror height over [-a, a] in the plane of the radial offset,
    and each ray is weighted by |height| (times a Simpson weight) so the
    meridional fan stands in for the full circular pupil. With ``best_focus`` the image plane is moved to
    the rms minimum; otherwise ``stage`` fixes it (default: focal plane).
    """
    system = layout.system(corrector, parabolic=parabolic)
    rays = _rays_at_objective(layout, system, stage, source_axial_offset, source_radial_offset,
                              fan_size, parabolic)
    zl = stage.principal_plane(layout)
    distance = zl - stage.image_plane(layout)
    if best_focus:
        d = best_focus_distance(rays)
        if d is not None and d > 0:
            distance = d
    c, rms = _weighted_stats(rays.positions(distance), rays.weights)
    return SpotMetrics(float(c), rms, len(rays.heights), rays.n_vignetted, zl - distance)


@dataclass(frozen=True)
class SweepRow:
    variant: str
    offset_um: float
    radial_offset_um: float
    rms_um: float
    vignetted_count: int
    warning: bool


def defocus_sweep(layout, variants, offsets, stage=ImagingStage(), fan_size=DEFAULT_FAN_SIZE,
                  radial_offset=0.0):
    """Rms spot vs axial source offset for each corrector variant.

    ``variants`` maps a name to the ``corrector`` argument of spot_size();
    the name ``"parabola"`` swaps in the exact paraboloid. Each variant's
    image plane is fixed at its own on-axis best focus, then held while the
    source moves. Rows come back ordered by variant, then offset.
    """
    offsets = list(offsets)
    if not offsets:
        raise ValueError("offsets must not be empty")
    rows = []
    for name, corr in variants.items():
        parabolic = name == "parabola"
        focus = spot_size(layout, corr, stage, 0.0, 0.0, fan_size, parabolic, best_focus=True)
        fixed = ImagingStage(stage.objective_focal_length, stage.principal_plane(layout),
                             focus.image_plane_z)
        for off in offsets:
            m = spot_size(layout, corr, fixed, off, radial_offset, fan_size, parabolic)
            rows.append(SweepRow(name, float(off), float(radial_offset), m.rms_radius * 1e3,
                                 m.n_rays_vignetted, m.warning))
    return rows


@dataclass(frozen=True)
class CircularNA:
    na: float


@dataclass(frozen=True)
class SquareMirror:
    half_width: float
    distance: float


def collection_efficiency(aperture):
    """Fraction of 4 pi collected by ``aperture`` from an isotropic source."""
    if isinstance(aperture, CircularNA):
        if not 0.0 < aperture.na <= 1.0:
            raise InvalidAperture(f"numerical aperture must be in (0, 1], got {aperture.na}")
        return 0.5 * (1.0 - math.sqrt(1.0 - aperture.na**2))
    if isinstance(aperture, SquareMirror):
        h, d = aperture.half_width, aperture.distance
        if not (h > 0 and d > 0):
            raise InvalidAperture("square aperture needs positive half-width and distance")
        # solid angle of a 2h x 2h square seen on-axis from distance d
        omega = 4.0 * math.atan(h * h / (d * math.sqrt(2.0 * h * h + d * d)))
        return omega / (4.0 * math.pi)
    raise InvalidAperture(f"unsupported aperture {aperture!r}")


def mirror_square_aperture(layout=Layout()):
    """The ground 20 x 20 mm mirror as a flat square at its edge-midpoint depth."""
    m = layout.mirror()
    h = layout.mirror_half_width
    return SquareMirror(h, m.vertex_z + m.sag(h))


def diffraction_limit(wavelength_nm, effective_na):
    """Airy radius 0.61 lambda / NA in micrometres."""
    if not 0.0 < effective_na < 1.0:
        raise InvalidAperture(f"effective NA must be in (0, 1), got {effective_na}")
    return 0.61 * wavelength_nm * 1e-3 / effective_na
