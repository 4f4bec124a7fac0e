"""Face layouts for the seven formats.

Cube bases (CMP/EAC, also the TSP front face). ``u`` grows to the right and
``v`` downward inside each face; a face point is ``n + u*right + v*down``.

    slot     face    n     right   down
    (0, 0)   Left    -Y    +X      -Z
    (1, 0)   Front   +X    +Y      -Z
    (2, 0)   Right   +Y    -X      -Z
    (0, 1)   Down    -Z    +Y      -X
    (1, 1)   Back    -X    -Y      -Z
    (2, 1)   Up      +Z    +Y      +X

Triangle unfoldings. ISP uses 4 rows of 5 slots: north-cap triangles
pointing up, upper-band triangles pointing down, lower-band triangles
pointing up, south-cap triangles pointing down. OHP uses 2 rows of 4 slots
(north faces up, south faces down), so each column forms a rhombus. The
space between triangles is inactive.
"""

from __future__ import annotations

import math
from functools import cached_property, lru_cache

import numpy as np

from omnisr.geometry import latlon_to_xyz
from omnisr.projection.grid import ProjectionFormat, ProjectionGrid
from omnisr.projection.regions import (
    CapRegion,
    CubeFaceRegion,
    LatLonRegion,
    PyramidRegion,
    Region,
    TriangleRegion,
)

_X, _Y, _Z = np.eye(3)

# (name, column, row, normal, right, down)
CUBE_FACES = (
    ("left", 0, 0, -_Y, _X, -_Z),
    ("front", 1, 0, _X, _Y, -_Z),
    ("right", 2, 0, _Y, -_X, -_Z),
    ("down", 0, 1, -_Z, _Y, -_X),
    ("back", 1, 1, -_X, -_Y, -_Z),
    ("up", 2, 1, _Z, _Y, _X),
)


class Layout:
    """Regions of one grid plus the rule that assigns directions to them."""

    def __init__(self, grid: ProjectionGrid, regions: list[Region], assign):
        self.grid = grid
        self.regions = regions
        self._assign = assign

    def __len__(self):
        return len(self.regions)

    def label_points(self, x, y) -> np.ndarray:
        """Index of the first region containing each point, -1 if none."""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        labels = np.full(np.broadcast(x, y).shape, -1, dtype=np.int64)
        for k, region in enumerate(self.regions):
            x0, y0, x1, y1 = region.bbox
            cand = (labels < 0) & (x >= x0 - 1e-6) & (x <= x1 + 1e-6) & (y >= y0 - 1e-6) & (y <= y1 + 1e-6)
            if not cand.any():
                continue
            idx = np.nonzero(cand)
            hit = region.contains(np.broadcast_to(x, labels.shape)[idx], np.broadcast_to(y, labels.shape)[idx])
            sel = tuple(i[hit] for i in idx)
            labels[sel] = k
        return labels

    def to_sphere(self, labels, x, y) -> np.ndarray:
        """Directions of raster points through each point's region formula.

        ``labels`` selects the region per point and may name a region that
        does not contain the point (seam extension). Label -1 yields NaN.
        """
        labels = np.asarray(labels)
        x = np.broadcast_to(np.asarray(x, dtype=np.float64), labels.shape)
        y = np.broadcast_to(np.asarray(y, dtype=np.float64), labels.shape)
        out = np.full(labels.shape + (3,), np.nan)
        for k in np.unique(labels):
            if k < 0:
                continue
            m = labels == k
            out[m] = self.regions[k].to_sphere(x[m], y[m])
        return out

    def assign(self, d) -> np.ndarray:
        return self._assign(np.asarray(d, dtype=np.float64))

    def project(self, d) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Raster position and owning region for (..., 3) directions."""
        d = np.asarray(d, dtype=np.float64)
        labels = self.assign(d)
        x = np.empty(labels.shape)
        y = np.empty(labels.shape)
        for k in np.unique(labels):
            m = labels == k
            x[m], y[m] = self.regions[k].from_sphere(d[m])
        np.clip(x, 0.0, self.grid.width, out=x)
        np.clip(y, 0.0, self.grid.height, out=y)
        return x, y, labels

    def unproject(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        labels = self.label_points(x, y)
        return self.to_sphere(labels, x, y), labels

    @cached_property
    def pixel_labels(self) -> np.ndarray:
        """(H, W) region index of every pixel center, -1 for inactive pixels."""
        h, w = self.grid.height, self.grid.width
        ys, xs = np.mgrid[0:h, 0:w] + 0.5
        labels = self.label_points(xs, ys)
        labels.setflags(write=False)
        return labels

    @cached_property
    def mask(self) -> np.ndarray:
        m = self.pixel_labels >= 0
        m.setflags(write=False)
        return m

    @cached_property
    def nearest_active(self) -> tuple[np.ndarray, np.ndarray]:
        """Row/column index of the closest active pixel, for every pixel."""
        from scipy import ndimage

        _, (iy, ix) = ndimage.distance_transform_edt(~self.mask, return_indices=True)
        return iy, ix


def _argmax_assign(centers: np.ndarray):
    centers = np.asarray(centers, dtype=np.float64)

    def assign(d):
        # np.argmax returns the first maximum, giving the lowest face on ties
        return np.argmax(d @ centers.T, axis=-1)

    return assign


def _erp(grid):
    region = LatLonRegion(0, 0, grid.width, grid.height)
    return Layout(grid, [region], lambda d: np.zeros(d.shape[:-1], dtype=np.int64))


def _cube(grid, equiangular):
    s = grid.width // 3
    regions = [
        CubeFaceRegion(c * s, r * s, s, n, rt, dn, equiangular=equiangular, name=name)
        for name, c, r, n, rt, dn in CUBE_FACES
    ]
    return Layout(grid, regions, _argmax_assign([f[3] for f in CUBE_FACES]))


def _tsp(grid):
    s = grid.height
    half = s / 2.0
    cx, cy = 1.5 * s, half
    regions: list[Region] = [CubeFaceRegion(0, 0, s, _X, _Y, -_Z, name="front")]
    regions += [PyramidRegion(k, cx, cy, half, grid.back_ratio) for k in ("back", "top", "bottom", "left", "right")]
    normals = [_X, -_X, _Z, -_Z, -_Y, _Y]
    return Layout(grid, regions, _argmax_assign(normals))


def _ssp(grid):
    h = grid.height
    side = h / 2.0
    band_w = grid.width - side
    cap = grid.cap_latitude
    regions = [
        LatLonRegion(0, 0, band_w, h, lat_top=cap, lat_bottom=-cap, name="band"),
        CapRegion(band_w + side / 2, side / 2, side / 2, cap, north=True),
        CapRegion(band_w + side / 2, h - side / 2, side / 2, cap, north=False),
    ]

    def assign(d):
        lat = np.arctan2(d[..., 2], np.hypot(d[..., 0], d[..., 1]))
        labels = np.zeros(d.shape[:-1], dtype=np.int64)
        labels[lat > cap] = 1
        labels[lat < -cap] = 2
        return labels

    return Layout(grid, regions, assign)


def icosahedron_faces() -> list[tuple[np.ndarray, int, int, bool]]:
    """Faces as (3x3 vertex rows, slot column, slot row, points_up)."""
    ring = math.atan(0.5)
    north = np.array([0.0, 0.0, 1.0])
    south = -north
    upper = [latlon_to_xyz(ring, math.radians(-180 + 72 * k)) for k in range(5)]
    lower = [latlon_to_xyz(-ring, math.radians(-144 + 72 * k)) for k in range(5)]
    faces = []
    for k in range(5):
        k1 = (k + 1) % 5
        # raster order of vertices: up triangles (apex, base-left, base-right),
        # down triangles (top-left, top-right, bottom)
        faces.append((np.stack([north, upper[k], upper[k1]]), k, 0, True))
    for k in range(5):
        k1 = (k + 1) % 5
        faces.append((np.stack([upper[k], upper[k1], lower[k]]), k, 1, False))
    for k in range(5):
        k1 = (k + 1) % 5
        faces.append((np.stack([upper[k1], lower[k], lower[k1]]), k, 2, True))
    for k in range(5):
        k1 = (k + 1) % 5
        faces.append((np.stack([lower[k], lower[k1], south]), k, 3, False))
    return faces


def octahedron_faces() -> list[tuple[np.ndarray, int, int, bool]]:
    north = np.array([0.0, 0.0, 1.0])
    ring = [latlon_to_xyz(0.0, math.radians(-180 + 90 * k)) for k in range(4)]
    faces = []
    for k in range(4):
        faces.append((np.stack([north, ring[k], ring[(k + 1) % 4]]), k, 0, True))
    for k in range(4):
        faces.append((np.stack([ring[k], ring[(k + 1) % 4], -north]), k, 1, False))
    return faces


def _triangles(grid, faces, cols, rows):
    sx = grid.width / cols
    sy = grid.height / rows
    regions = []
    for idx, (verts, c, r, up) in enumerate(faces):
        x0, x1, xm = c * sx, (c + 1) * sx, (c + 0.5) * sx
        y0, y1 = r * sy, (r + 1) * sy
        if up:
            raster = [(xm, y0), (x0, y1), (x1, y1)]
        else:
            raster = [(x0, y0), (x1, y0), (xm, y1)]
        regions.append(TriangleRegion(verts, raster, name=f"face{idx}"))
    return Layout(grid, regions, _argmax_assign([reg.center for reg in regions]))


def _build(grid: ProjectionGrid) -> Layout:
    f = grid.format
    if f is ProjectionFormat.ERP:
        return _erp(grid)
    if f is ProjectionFormat.CMP:
        return _cube(grid, equiangular=False)
    if f is ProjectionFormat.EAC:
        return _cube(grid, equiangular=True)
    if f is ProjectionFormat.TSP:
        return _tsp(grid)
    if f is ProjectionFormat.SSP:
        return _ssp(grid)
    if f is ProjectionFormat.ISP:
        return _triangles(grid, icosahedron_faces(), 5, 4)
    if f is ProjectionFormat.OHP:
        return _triangles(grid, octahedron_faces(), 4, 2)
    raise ValueError(f"unsupported format {f!r}")  # pragma: no cover


@lru_cache(maxsize=64)
def get_layout(grid: ProjectionGrid) -> Layout:
    return _build(grid)
