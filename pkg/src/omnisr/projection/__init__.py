"""Sphere <-> raster mappings for ERP, CMP, EAC, ISP, OHP, TSP and SSP."""

from __future__ import annotations

import math

import numpy as np

from omnisr.geometry import SphereDir
from omnisr.projection.grid import (
    ALL_FORMATS,
    ISP_ASPECT,
    OHP_ASPECT,
    ImagePoint,
    ProjectionFormat,
    ProjectionGrid,
)
from omnisr.projection.layout import Layout, get_layout

FILL_VALUE = 128

__all__ = [
    "ALL_FORMATS",
    "FILL_VALUE",
    "ImagePoint",
    "Layout",
    "ProjectionFormat",
    "ProjectionGrid",
    "active_mask",
    "default_grid",
    "eac_remap",
    "eac_unmap",
    "get_layout",
    "project",
    "project_array",
    "unproject",
    "unproject_array",
]


def eac_remap(u):
    """Equi-angular face coordinate for a cube-face coordinate in [-1, 1]."""
    arr = np.asarray(u, dtype=np.float64)
    if np.any(np.abs(arr) > 1.0) or np.any(np.isnan(arr)):
        raise ValueError("face coordinate must lie in [-1, 1]")
    out = 4.0 / np.pi * np.arctan(arr)
    return float(out) if out.ndim == 0 else out


def eac_unmap(u):
    """Inverse of :func:`eac_remap`."""
    arr = np.asarray(u, dtype=np.float64)
    if np.any(np.abs(arr) > 1.0) or np.any(np.isnan(arr)):
        raise ValueError("face coordinate must lie in [-1, 1]")
    out = np.tan(np.pi / 4.0 * arr)
    return float(out) if out.ndim == 0 else out


def unproject(grid: ProjectionGrid, p) -> SphereDir | None:
    """Direction seen at raster point ``p``, or None on inactive pixels."""
    x, y = p
    if not (0.0 <= x <= grid.width and 0.0 <= y <= grid.height):
        raise ValueError(f"point {tuple(p)} outside the {grid.width}x{grid.height} raster")
    d, label = get_layout(grid).unproject(np.array([x], dtype=np.float64), np.array([y], dtype=np.float64))
    if label[0] < 0:
        return None
    return SphereDir(*map(float, d[0]))


def project(grid: ProjectionGrid, d) -> ImagePoint:
    v = np.asarray(d, dtype=np.float64).reshape(1, 3)
    n = np.linalg.norm(v)
    if not np.isfinite(n) or n == 0.0:
        raise ValueError("direction must be a finite nonzero vector")
    x, y, _ = get_layout(grid).project(v / n)
    return ImagePoint(float(x[0]), float(y[0]))


def unproject_array(grid: ProjectionGrid, x, y) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`unproject`: (..., 3) directions (NaN where inactive) and region labels."""
    return get_layout(grid).unproject(x, y)


def project_array(grid: ProjectionGrid, d) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized :func:`project`: x, y and region labels."""
    return get_layout(grid).project(d)


def active_mask(grid: ProjectionGrid) -> np.ndarray:
    """(H, W) boolean raster, True where the pixel center unprojects."""
    return get_layout(grid).mask.copy()


def _even(v: float) -> int:
    return max(2, 2 * int(round(v / 2.0)))


def _candidates(fmt: ProjectionFormat, budget: int) -> list[ProjectionGrid]:
    if fmt in (ProjectionFormat.ERP, ProjectionFormat.TSP):
        h = _even(math.sqrt(budget / 2.0))
        return [ProjectionGrid(fmt, 2 * h, h)]
    if fmt in (ProjectionFormat.CMP, ProjectionFormat.EAC):
        s = _even(math.sqrt(budget / 6.0))
        return [ProjectionGrid(fmt, 3 * s, 2 * s)]
    if fmt is ProjectionFormat.SSP:
        # band (1.5 h * h) plus two inscribed disks of diameter h/2
        h0 = _even(math.sqrt(budget / (1.5 + math.pi / 8.0)))
        return [ProjectionGrid(fmt, 2 * h, h) for h in (h0 - 2, h0, h0 + 2) if h >= 2]
    aspect = ISP_ASPECT if fmt is ProjectionFormat.ISP else OHP_ASPECT
    # triangles cover half of the raster
    h0 = _even(math.sqrt(2.0 * budget / aspect))
    out = []
    for h in (h0 - 2, h0, h0 + 2):
        if h >= 4:
            out.append(ProjectionGrid(fmt, _even(aspect * h), h))
    return out


def default_grid(fmt, pixel_budget: int) -> ProjectionGrid:
    """Grid of ``fmt`` whose active-pixel count is closest to ``pixel_budget``."""
    fmt = ProjectionFormat.parse(fmt)
    if pixel_budget < 128:
        raise ValueError("pixel budget must be at least 128")
    grids = _candidates(fmt, int(pixel_budget))
    if len(grids) == 1:
        return grids[0]
    return min(grids, key=lambda g: (abs(int(get_layout(g).mask.sum()) - pixel_budget), g.height))
