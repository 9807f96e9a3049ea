import numpy as np
import pytest

from ionmirror import materials as mat
from ionmirror.corrector import schmidt_coefficient

from oracles import MALITSON_SILICA, SCHOTT_NBK7, sellmeier

EQ2_COEFFICIENT = 5.98785e-5


def test_vacuum_is_exactly_one():
    for wl in (300.0, 493.4, 1000.0):
        assert mat.index(mat.VACUUM, wl) == 1.0
    assert np.all(mat.index("Vacuum", np.array([400.0, 700.0])) == 1.0)


def test_bk7_matches_independent_sellmeier():
    assert mat.index(mat.BK7, 493.4) == pytest.approx(sellmeier(SCHOTT_NBK7, 493.4), abs=1e-14)
    assert mat.index("BK7") == pytest.approx(1.521862, abs=5e-6)


def test_fused_silica_golden_value():
    n = mat.index(mat.FUSED_SILICA, 493.4)
    assert n == pytest.approx(sellmeier(MALITSON_SILICA, 493.4), abs=1e-14)
    assert n == pytest.approx(1.462699, abs=5e-6)


def test_bk7_back_substitution_reproduces_quartic_coefficient():
    n = mat.index(mat.BK7, 493.4)
    c4 = schmidt_coefficient(20.0, n)
    assert abs(c4 - EQ2_COEFFICIENT) / EQ2_COEFFICIENT < 5e-3


@pytest.mark.parametrize("glass", [mat.BK7, mat.FUSED_SILICA])
def test_normal_dispersion(glass):
    n450, n550, n650 = (mat.index(glass, wl) for wl in (450.0, 550.0, 650.0))
    assert n450 > n550 > n650
    wl = np.linspace(400.0, 700.0, 301)
    assert np.all(np.diff(mat.index(glass, wl)) < 0.0)


@pytest.mark.parametrize("wl", [299.9, 1000.1, 100.0])
def test_out_of_range(wl):
    with pytest.raises(mat.OutOfDispersionRange):
        mat.index(mat.BK7, wl)


def test_unknown_material():
    with pytest.raises(KeyError):
        mat.get_material("SF11")


def test_material_method_matches_function():
    assert mat.BK7.index(600.0) == mat.index(mat.BK7, 600.0)
