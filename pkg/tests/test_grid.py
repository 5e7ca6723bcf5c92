import numpy as np
import pytest

from qdnls.errors import InvalidDataError
from qdnls.grid import BumpProfile, GaussianProfile, GridFunction


@pytest.mark.parametrize("prof", [GaussianProfile(0.3 - 0.1j, 1.3, 0.2), BumpProfile(0.5j, 1.5, -0.1)])
@pytest.mark.parametrize("order", [1, 2, 3])
def test_profile_derivatives_against_differences(prof, order):
    x = np.linspace(-0.9, 0.9, 7)
    h = 1e-4
    fd = (prof(x + h, order - 1) - prof(x - h, order - 1)) / (2 * h)
    assert np.max(np.abs(fd - prof(x, order))) < 1e-5


def test_bump_vanishes_outside():
    b = BumpProfile(1.0, 1.0)
    assert np.all(b(np.array([-1.0, 1.0, 2.0, -3.0])) == 0)
    assert b(np.array(0.0)) == pytest.approx(1.0)


def test_gaussian_window_meets_tail_threshold():
    g = GridFunction.gaussian(0.3)
    assert g.decay_flag
    assert not g.is_compact
    assert g.tail_bound() < 1e-11


def test_bump_is_compact():
    b = GridFunction.bump(0.3)
    assert b.is_compact and b.tail_bound() == 0.0


def test_reflection_maps_profile():
    g = GridFunction.gaussian(0.3 + 0.2j, width=0.7).with_profile(GaussianProfile(0.3 + 0.2j, 0.7, 0.4))
    f = g.reflected()
    x = np.linspace(-2, 2, 9)
    assert np.allclose(f(x), -g(-x))
    assert np.allclose(f(x, 1), g(-x, 1))


def test_csv_roundtrip(tmp_path):
    g = GridFunction.gaussian(0.3 - 0.1j, n=65)
    p = tmp_path / "q.csv"
    g.write_csv(p, header_comment="test")
    back = GridFunction.read_csv(p)
    assert np.allclose(back.values, g.values, atol=1e-15)
    assert back.x_min == pytest.approx(g.x_min)


def test_nan_samples_rejected():
    x = np.linspace(0, 1, 5)
    v = np.array([0, 1, np.nan, 0, 0])
    with pytest.raises(InvalidDataError):
        GridFunction.from_samples(x, v)


def test_nonuniform_samples_rejected():
    with pytest.raises(InvalidDataError):
        GridFunction.from_samples(np.array([0.0, 0.1, 0.3, 0.4]), np.zeros(4))


def test_mass_of_gaussian():
    g = GridFunction.gaussian(0.3)
    assert g.mass() == pytest.approx(0.09 * np.sqrt(np.pi / 2), rel=1e-10)
