import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from omnisr.geometry import (
    LatLon,
    angular_error,
    angular_error_array,
    dir_to_latlon,
    latlon_to_dir,
    latlon_to_xyz,
    random_directions,
    xyz_to_latlon,
)


@pytest.mark.parametrize(
    "lat, lon, want",
    [(0.0, 0.0, (1, 0, 0)), (math.pi / 2, 0.0, (0, 0, 1)), (0.0, math.pi / 2, (0, 1, 0))],
)
def test_latlon_to_dir_anchors(lat, lon, want):
    assert np.allclose(latlon_to_dir(LatLon(lat, lon)).as_array(), want, atol=1e-15)


def test_dir_to_latlon_anchors():
    assert dir_to_latlon((0.0, 0.0, -1.0)) == LatLon(-math.pi / 2, 0.0)
    assert dir_to_latlon((1.0, 0.0, 0.0)) == LatLon(0.0, 0.0)


def test_pole_longitude_is_zero():
    assert dir_to_latlon((0.0, 0.0, 1.0)).lon == 0.0
    lat, lon = xyz_to_latlon(np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]))
    assert np.all(lon == 0.0)


@pytest.mark.parametrize("bad", [(2.0, 0.0), (-1.6, 0.0), (0.0, math.pi), (0.0, -3.2), (math.nan, 0.0)])
def test_latlon_out_of_range_rejected(bad):
    with pytest.raises(ValueError):
        latlon_to_dir(bad)


def test_zero_and_non_unit_rejected():
    with pytest.raises(ValueError):
        dir_to_latlon((0.0, 0.0, 0.0))
    with pytest.raises(ValueError):
        dir_to_latlon((2.0, 0.0, 0.0))


def test_nearly_unit_is_renormalized():
    ll = dir_to_latlon((1.0 + 5e-10, 0.0, 0.0))
    assert ll == LatLon(0.0, 0.0)


@pytest.mark.parametrize(
    "b, want", [((1, 0, 0), 0.0), ((0, 1, 0), math.pi / 2), ((-1, 0, 0), math.pi)]
)
def test_angular_error_anchors(b, want):
    assert angular_error((1.0, 0.0, 0.0), b) == pytest.approx(want, abs=1e-15)


@given(st.floats(-math.pi / 2 + 1e-6, math.pi / 2 - 1e-6), st.floats(-math.pi, math.pi, exclude_max=True))
def test_latlon_round_trip(lat, lon):
    back = dir_to_latlon(latlon_to_dir((lat, lon)))
    assert abs(back.lat - lat) < 1e-12
    dlon = (back.lon - lon + math.pi) % (2 * math.pi) - math.pi
    assert abs(dlon) < 1e-12


@given(st.floats(-math.pi / 2, math.pi / 2), st.floats(-math.pi, math.pi, exclude_max=True))
def test_latlon_to_dir_is_unit(lat, lon):
    assert abs(np.linalg.norm(latlon_to_dir((lat, lon)).as_array()) - 1.0) < 1e-12


def test_dir_round_trip_random(rng):
    d = random_directions(10_000, rng)
    lat, lon = xyz_to_latlon(d)
    assert np.all((lon >= -math.pi) & (lon < math.pi))
    err = angular_error_array(latlon_to_xyz(lat, lon), d)
    assert err.max() < 1e-12


def test_angular_error_matches_acos_form(rng):
    a, b = random_directions(1000, rng), random_directions(1000, rng)
    ref = np.arccos(np.clip(np.sum(a * b, axis=1), -1, 1))
    assert np.allclose(angular_error_array(a, b), ref, atol=1e-7)
