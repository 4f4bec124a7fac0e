"""Unit-sphere coordinate types and conversions.

Frame: +X through (lat 0, lon 0), +Y through lon +pi/2, +Z through the
north pole. All angles are radians.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

_UNIT_TOL = 1e-9


class SphereDir(NamedTuple):
    """Unit direction vector."""

    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)


class LatLon(NamedTuple):
    lat: float
    lon: float


def latlon_to_dir(p: LatLon | tuple[float, float]) -> SphereDir:
    lat, lon = p
    if not (-math.pi / 2 <= lat <= math.pi / 2):
        raise ValueError(f"latitude {lat!r} outside [-pi/2, pi/2]")
    if not (-math.pi <= lon < math.pi):
        raise ValueError(f"longitude {lon!r} outside [-pi, pi)")
    d = latlon_to_xyz(np.float64(lat), np.float64(lon))
    return SphereDir(float(d[0]), float(d[1]), float(d[2]))


def dir_to_latlon(d: SphereDir | tuple[float, float, float]) -> LatLon:
    v = np.asarray(d, dtype=np.float64)
    n = float(np.linalg.norm(v))
    if n == 0.0 or not math.isfinite(n):
        raise ValueError("direction must be a finite nonzero vector")
    if abs(n - 1.0) > _UNIT_TOL:
        raise ValueError(f"direction is not unit length (norm {n!r})")
    lat, lon = xyz_to_latlon(v / n)
    return LatLon(float(lat), float(lon))


def angular_error(a, b) -> float:
    """Great-circle angle between two unit directions, in [0, pi]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(angular_error_array(a, b))


# -- vectorized forms ---------------------------------------------------------

def latlon_to_xyz(lat, lon) -> np.ndarray:
    """Stack (..., 3) unit vectors from broadcastable lat/lon arrays."""
    lat = np.asarray(lat, dtype=np.float64)
    lon = np.asarray(lon, dtype=np.float64)
    c = np.cos(lat)
    return np.stack(np.broadcast_arrays(c * np.cos(lon), c * np.sin(lon), np.sin(lat)), axis=-1)


def xyz_to_latlon(d) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`latlon_to_xyz` for (..., 3) arrays (need not be unit).

    Longitude is folded into [-pi, pi) and set to 0 at the poles.
    """
    d = np.asarray(d, dtype=np.float64)
    x, y, z = d[..., 0], d[..., 1], d[..., 2]
    rho = np.hypot(x, y)
    lat = np.arctan2(z, rho)
    lon = np.arctan2(y, x)
    lon = np.where(lon >= np.pi, lon - 2 * np.pi, lon)
    lon = np.where(rho == 0.0, 0.0, lon)
    return lat, lon


def normalize(d) -> np.ndarray:
    d = np.asarray(d, dtype=np.float64)
    return d / np.linalg.norm(d, axis=-1, keepdims=True)


def angular_error_array(a, b) -> np.ndarray:
    # atan2 form keeps precision near 0 and pi where acos(a.b) does not
    cross = np.linalg.norm(np.cross(a, b), axis=-1)
    dot = np.sum(a * b, axis=-1)
    return np.arctan2(cross, dot)


def random_directions(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniformly distributed unit vectors, shape (n, 3)."""
    v = rng.standard_normal((n, 3))
    return normalize(v)
