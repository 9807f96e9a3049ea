import pytest

from ionmirror import corrector as corr


@pytest.fixture(scope="session")
def layout():
    return corr.Layout()


@pytest.fixture(scope="session")
def numeric_curve(layout):
    return corr.derive_corrector(layout)


@pytest.fixture(scope="session")
def fits(numeric_curve):
    return {b: corr.fit_polynomial(numeric_curve, b) for b in corr.BASES}


@pytest.fixture(scope="session")
def quartic(layout):
    return corr.quartic_curve(layout)


SWEEP_DISTANCES = (3.0, 5.0, 8.0, 12.0, 100.0)


@pytest.fixture(scope="session")
def trap_default():
    from ionmirror.trap import TrapSystem
    return TrapSystem()


@pytest.fixture(scope="session")
def orbit_sweep(trap_default):
    """Orbit results for the default trap at SWEEP_DISTANCES, one batched run."""
    from ionmirror.trap import displacement_orbits
    return dict(zip(SWEEP_DISTANCES, displacement_orbits(trap_default, SWEEP_DISTANCES)))
