"""Refractive indices for the handful of materials in the imaging path."""

from dataclasses import dataclass

import numpy as np

DEFAULT_WAVELENGTH_NM = 493.4
MIN_WAVELENGTH_NM = 300.0
MAX_WAVELENGTH_NM = 1000.0


class OutOfDispersionRange(ValueError):
    """Wavelength outside the 300-1000 nm validity window of the fits."""


@dataclass(frozen=True)
class Material:
    name: str
    # (B_i, C_i) pairs, C_i in um^2. Empty for vacuum.
    sellmeier_coefficients: tuple = ()

    def index(self, wavelength_nm=DEFAULT_WAVELENGTH_NM):
        return index(self, wavelength_nm)


VACUUM = Material("Vacuum")

# Schott N-BK7 datasheet three-term Sellmeier fit.
BK7 = Material(
    "BK7",
    (
        (1.03961212, 0.00600069867),
        (0.231792344, 0.0200179144),
        (1.01046945, 103.560653),
    ),
)

# Malitson, J. Opt. Soc. Am. 55, 1205 (1965), fused silica at 20 C.
FUSED_SILICA = Material(
    "FusedSilica",
    (
        (0.6961663, 0.0684043**2),
        (0.4079426, 0.1162414**2),
        (0.8974794, 9.896161**2),
    ),
)

MATERIALS = {m.name: m for m in (VACUUM, BK7, FUSED_SILICA)}


def get_material(name):
    try:
        return MATERIALS[name]
    except KeyError:
        raise KeyError(f"unknown material {name!r}; known: {sorted(MATERIALS)}") from None


def index(material, wavelength_nm=DEFAULT_WAVELENGTH_NM):
    """Refractive index of ``material`` at ``wavelength_nm``.

    Uses n^2 = 1 + sum B_i L^2 / (L^2 - C_i) with L in micrometres. Vacuum
    returns exactly 1.0. Accepts a scalar or an array of wavelengths.
    """
    if isinstance(material, str):
        material = get_material(material)
    wl = np.asarray(wavelength_nm, dtype=float)
    if np.any(wl < MIN_WAVELENGTH_NM) or np.any(wl > MAX_WAVELENGTH_NM):
        raise OutOfDispersionRange(
            f"wavelength {wavelength_nm} nm outside "
            f"[{MIN_WAVELENGTH_NM}, {MAX_WAVELENGTH_NM}] nm"
        )
    if not material.sellmeier_coefficients:
        n = np.ones_like(wl)
    else:
        l2 = (wl * 1e-3) ** 2
        n2 = 1.0 + sum(b * l2 / (l2 - c) for b, c in material.sellmeier_coefficients)
        n = np.sqrt(n2)
    return float(n) if n.ndim == 0 else n
