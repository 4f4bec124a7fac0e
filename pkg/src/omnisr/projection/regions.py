"""Per-face raster <-> sphere mappings.

Every region maps raster points to directions through a smooth formula
that stays valid a few pixels past the region's own boundary. Resampling
relies on that extension to fetch kernel taps across seams.
"""

from __future__ import annotations

import math

import numpy as np

from omnisr.geometry import latlon_to_xyz, normalize, xyz_to_latlon

_EPS = 1e-9


def _rect_distance(bbox, x, y):
    x0, y0, x1, y1 = bbox
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return np.maximum(np.maximum(x0 - x, x - x1), np.maximum(y0 - y, y - y1))


def _polygon_distance(vertices, x, y):
    """Signed distance to a convex polygon (exact inside, a lower bound outside)."""
    v = np.asarray(vertices, dtype=np.float64)
    center = v.mean(axis=0)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    out = np.full(np.broadcast(x, y).shape, -np.inf)
    for i in range(len(v)):
        p, q = v[i], v[(i + 1) % len(v)]
        n = np.array([q[1] - p[1], p[0] - q[0]])
        n /= np.hypot(*n)
        if np.dot(center - p, n) > 0:
            n = -n
        out = np.maximum(out, (x - p[0]) * n[0] + (y - p[1]) * n[1])
    return out


class Region:
    """One face of a layout. Subclasses implement the three hooks."""

    name = "region"

    def contains(self, x, y) -> np.ndarray:
        raise NotImplementedError

    def to_sphere(self, x, y) -> np.ndarray:
        raise NotImplementedError

    def from_sphere(self, d) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def signed_distance(self, x, y) -> np.ndarray:
        """Raster distance to the region outline, negative inside."""
        raise NotImplementedError

    # (x0, y0, x1, y1) raster bounding box
    bbox: tuple[float, float, float, float]

    # True when straight raster lines map to great circles (gnomonic faces)
    geodesic = False


class LatLonRegion(Region):
    """Rectangle with longitude linear in x and latitude linear in y."""

    def __init__(self, x0, y0, w, h, lat_top=math.pi / 2, lat_bottom=-math.pi / 2, name="erp"):
        self.x0, self.y0, self.w, self.h = float(x0), float(y0), float(w), float(h)
        self.lat_top, self.lat_bottom = lat_top, lat_bottom
        self.bbox = (self.x0, self.y0, self.x0 + self.w, self.y0 + self.h)
        self.name = name

    def contains(self, x, y):
        x0, y0, x1, y1 = self.bbox
        return (x >= x0 - _EPS) & (x <= x1 + _EPS) & (y >= y0 - _EPS) & (y <= y1 + _EPS)

    def signed_distance(self, x, y):
        return _rect_distance(self.bbox, x, y)

    def to_sphere(self, x, y):
        lon = 2.0 * np.pi * ((np.asarray(x) - self.x0) / self.w - 0.5)
        lat = self.lat_top - (np.asarray(y) - self.y0) / self.h * (self.lat_top - self.lat_bottom)
        return latlon_to_xyz(lat, lon)

    def from_sphere(self, d):
        lat, lon = xyz_to_latlon(d)
        x = self.x0 + (lon / (2.0 * np.pi) + 0.5) * self.w
        y = self.y0 + (self.lat_top - lat) / (self.lat_top - self.lat_bottom) * self.h
        return x, y


class CubeFaceRegion(Region):
    """Square cube face; optionally equi-angular along both axes."""

    def __init__(self, x0, y0, size, normal, right, down, equiangular=False, name="face"):
        self.x0, self.y0, self.s = float(x0), float(y0), float(size)
        self.n = np.asarray(normal, dtype=np.float64)
        self.r = np.asarray(right, dtype=np.float64)
        self.dn = np.asarray(down, dtype=np.float64)
        self.equiangular = equiangular
        self.bbox = (self.x0, self.y0, self.x0 + self.s, self.y0 + self.s)
        self.geodesic = not equiangular
        self.name = name

    def contains(self, x, y):
        x0, y0, x1, y1 = self.bbox
        return (x >= x0 - _EPS) & (x <= x1 + _EPS) & (y >= y0 - _EPS) & (y <= y1 + _EPS)

    def signed_distance(self, x, y):
        return _rect_distance(self.bbox, x, y)

    def to_sphere(self, x, y):
        u = 2.0 * (np.asarray(x, dtype=np.float64) - self.x0) / self.s - 1.0
        v = 2.0 * (np.asarray(y, dtype=np.float64) - self.y0) / self.s - 1.0
        if self.equiangular:
            u, v = np.tan(np.pi / 4 * u), np.tan(np.pi / 4 * v)
        d = self.n + u[..., None] * self.r + v[..., None] * self.dn
        return normalize(d)

    def from_sphere(self, d):
        d = np.asarray(d, dtype=np.float64)
        depth = d @ self.n
        u = (d @ self.r) / depth
        v = (d @ self.dn) / depth
        if self.equiangular:
            u, v = 4.0 / np.pi * np.arctan(u), 4.0 / np.pi * np.arctan(v)
        return self.x0 + (u + 1.0) * 0.5 * self.s, self.y0 + (v + 1.0) * 0.5 * self.s


class PyramidRegion(Region):
    """Back face or one trapezoidal side face of a truncated square pyramid.

    The back square (side ``ratio``) sits centered in a square of half-size
    ``half``; the four trapezoids between it and the outer border each carry
    one full cube face. ``kind`` is one of back/top/bottom/left/right.
    """

    def __init__(self, kind, cx, cy, half, ratio):
        self.kind = kind
        self.name = kind
        self.cx, self.cy, self.half, self.ratio = float(cx), float(cy), float(half), float(ratio)
        self.bbox = (self.cx - self.half, self.cy - self.half, self.cx + self.half, self.cy + self.half)
        self.geodesic = kind == "back"

    def _ab(self, x, y):
        return (np.asarray(x, dtype=np.float64) - self.cx) / self.half, (
            np.asarray(y, dtype=np.float64) - self.cy
        ) / self.half

    def contains(self, x, y):
        a, b = self._ab(x, y)
        e = _EPS / self.half
        inside = (np.abs(a) <= 1 + e) & (np.abs(b) <= 1 + e)
        k, r = self.kind, self.ratio
        if k == "back":
            return inside & (np.abs(a) <= r + e) & (np.abs(b) <= r + e)
        if k == "top":
            return inside & (-b >= r - e) & (np.abs(a) <= -b + e)
        if k == "bottom":
            return inside & (b >= r - e) & (np.abs(a) <= b + e)
        if k == "left":
            return inside & (-a >= r - e) & (np.abs(b) <= -a + e)
        return inside & (a >= r - e) & (np.abs(b) <= a + e)

    def outline(self) -> np.ndarray:
        r = self.ratio
        corners = {
            "back": [(-r, -r), (r, -r), (r, r), (-r, r)],
            "top": [(-1, -1), (1, -1), (r, -r), (-r, -r)],
            "bottom": [(-r, r), (r, r), (1, 1), (-1, 1)],
            "left": [(-1, -1), (-r, -r), (-r, r), (-1, 1)],
            "right": [(r, -r), (1, -1), (1, 1), (r, r)],
        }[self.kind]
        return np.array([(self.cx + a * self.half, self.cy + b * self.half) for a, b in corners])

    def signed_distance(self, x, y):
        return _polygon_distance(self.outline(), x, y)

    def to_sphere(self, x, y):
        a, b = self._ab(x, y)
        r = self.ratio
        k = self.kind
        if k == "back":
            d = np.stack(np.broadcast_arrays(-1.0, a / r, -b / r), axis=-1)
            return normalize(d)
        # m: distance of the point from the center along the face's axis
        m = {"top": -b, "bottom": b, "left": -a, "right": a}[k]
        lateral = {"top": a, "bottom": a, "left": b, "right": b}[k]
        p = 2.0 * (m - r) / (1.0 - r) - 1.0
        q = lateral / m
        if k == "top":
            d = (p, q, np.ones_like(p))
        elif k == "bottom":
            d = (p, q, -np.ones_like(p))
        elif k == "left":
            d = (p, -np.ones_like(p), -q)
        else:
            d = (p, np.ones_like(p), -q)
        return normalize(np.stack(d, axis=-1))

    def from_sphere(self, d):
        d = np.asarray(d, dtype=np.float64)
        dx, dy, dz = d[..., 0], d[..., 1], d[..., 2]
        r = self.ratio
        k = self.kind
        if k == "back":
            a = r * dy / (-dx)
            b = -r * dz / (-dx)
        else:
            if k == "top":
                p, q = dx / dz, dy / dz
            elif k == "bottom":
                p, q = dx / -dz, dy / -dz
            elif k == "left":
                p, q = dx / -dy, dz / dy
            else:
                p, q = dx / dy, -dz / dy
            m = r + (p + 1.0) * 0.5 * (1.0 - r)
            lateral = q * m
            if k == "top":
                a, b = lateral, -m
            elif k == "bottom":
                a, b = lateral, m
            elif k == "left":
                a, b = -m, lateral
            else:
                a, b = m, lateral
        return self.cx + a * self.half, self.cy + b * self.half


class CapRegion(Region):
    """Polar cap as an azimuthal-equidistant disk inscribed in a square."""

    def __init__(self, cx, cy, radius, cap_latitude, north=True):
        self.cx, self.cy, self.radius = float(cx), float(cy), float(radius)
        self.span = math.pi / 2 - cap_latitude
        self.north = north
        self.name = "north" if north else "south"
        self.bbox = (self.cx - self.radius, self.cy - self.radius, self.cx + self.radius, self.cy + self.radius)

    def contains(self, x, y):
        return np.hypot(np.asarray(x) - self.cx, np.asarray(y) - self.cy) <= self.radius + _EPS

    def signed_distance(self, x, y):
        return np.hypot(np.asarray(x) - self.cx, np.asarray(y) - self.cy) - self.radius

    def to_sphere(self, x, y):
        dx = np.asarray(x, dtype=np.float64) - self.cx
        dy = np.asarray(y, dtype=np.float64) - self.cy
        colat = np.hypot(dx, dy) / self.radius * self.span
        if self.north:
            lon = np.arctan2(dx, dy)
            lat = np.pi / 2 - colat
        else:
            lon = np.arctan2(dx, -dy)
            lat = colat - np.pi / 2
        return latlon_to_xyz(lat, lon)

    def from_sphere(self, d):
        lat, lon = xyz_to_latlon(d)
        colat = np.pi / 2 - lat if self.north else lat + np.pi / 2
        rho = colat / self.span * self.radius
        x = self.cx + rho * np.sin(lon)
        y = self.cy + (rho * np.cos(lon) if self.north else -rho * np.cos(lon))
        return x, y


class TriangleRegion(Region):
    """Gnomonic projection of a polyhedron face onto a raster triangle."""

    geodesic = True

    def __init__(self, vertices, raster, name="tri"):
        self.V = np.asarray(vertices, dtype=np.float64)  # (3, 3), rows are face corners
        self.R = np.asarray(raster, dtype=np.float64)  # (3, 2)
        self.V_inv = np.linalg.inv(self.V)
        edge = np.stack([self.R[1] - self.R[0], self.R[2] - self.R[0]], axis=1)  # (2, 2)
        self.E_inv = np.linalg.inv(edge)
        self.center = normalize(self.V.mean(axis=0))
        self.name = name
        lo, hi = self.R.min(axis=0), self.R.max(axis=0)
        self.bbox = (lo[0], lo[1], hi[0], hi[1])
        # barycentric tolerance equivalent to _EPS pixels
        self._tol = _EPS / max(hi[0] - lo[0], hi[1] - lo[1])

    def barycentric(self, x, y):
        p = np.stack(np.broadcast_arrays(np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)), axis=-1)
        lam = (p - self.R[0]) @ self.E_inv.T
        return np.concatenate([1.0 - lam.sum(axis=-1, keepdims=True), lam], axis=-1)

    def contains(self, x, y):
        return np.all(self.barycentric(x, y) >= -self._tol, axis=-1)

    def signed_distance(self, x, y):
        return _polygon_distance(self.R, x, y)

    def to_sphere(self, x, y):
        return normalize(self.barycentric(x, y) @ self.V)

    def from_sphere(self, d):
        w = np.asarray(d, dtype=np.float64) @ self.V_inv
        w = w / w.sum(axis=-1, keepdims=True)
        p = w @ self.R
        return p[..., 0], p[..., 1]
