"""Design and evaluation tools for a spherical-mirror ion-imaging system.

Submodules
----------
materials   Sellmeier refractive indices (vacuum, BK7, fused silica).
geometry    Exact meridional ray tracing kernel.
corrector   Schmidt-type corrector synthesis and polynomial fits.
evaluation  Spot sizes, defocus sweeps, collection efficiency.
trap        Linear Paul trap with a grounded plane (method of images).
config      Run configuration file format.
cli         ``ionmirror`` command line entry point.
"""

__version__ = "0.1.0"
