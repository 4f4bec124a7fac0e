"""PSNR, WS-PSNR and SSIM on planar images.

All functions accept :class:`PlanarImage` or ndarrays. ``peak`` is the
maximum sample value of the data as given: 1.0 for normalized images, 255
for raw 8-bit arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from omnisr.image import PlanarImage
from omnisr.projection import ProjectionFormat, ProjectionGrid, get_layout

INF = math.inf

SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5

BT709 = (0.2126, 0.7152, 0.0722)


@dataclass(frozen=True)
class MetricResult:
    metric: str
    value: float
    channel: str = "y"

    @property
    def is_inf(self) -> bool:
        return math.isinf(self.value)

    def format_value(self, digits: int = 3) -> str:
        return format_db(self.value, digits)

    def __str__(self) -> str:
        return f"{self.metric} {self.channel}: {self.format_value(4)}"


def format_db(value: float, digits: int = 3) -> str:
    if math.isinf(value) and value > 0:
        return "inf"
    if math.isnan(value):
        return "nan"
    return f"{value:.{digits}f}"


def _planes(img) -> tuple[np.ndarray, np.ndarray | None]:
    if isinstance(img, PlanarImage):
        return img.data, img.mask
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr, None


def _pair(a, b):
    da, ma = _planes(a)
    db, mb = _planes(b)
    if da.shape != db.shape:
        raise ValueError(f"image shapes differ: {da.shape} vs {db.shape}")
    active = np.ones(da.shape[:2], dtype=bool)
    for m in (ma, mb):
        if m is not None:
            active &= m
    if not active.any():
        raise ValueError("images share no active pixels")
    return da, db, active


def _db(peak: float, mse: float) -> float:
    if mse == 0.0:
        return INF
    return max(0.0, 10.0 * math.log10(peak * peak / mse))


def psnr(a, b, peak: float = 1.0, channel: str = "all") -> MetricResult:
    """PSNR over the intersection of the active sets, all channels pooled."""
    da, db, active = _pair(a, b)
    diff = (da - db)[active]
    return MetricResult("psnr", _db(peak, float(np.mean(diff * diff))), channel)


def ws_psnr(a, b, w, peak: float = 1.0, channel: str = "all") -> MetricResult:
    """PSNR with per-pixel weights ``w`` (an (H, W) array)."""
    da, db, active = _pair(a, b)
    w = np.asarray(w, dtype=np.float64)
    if w.shape != da.shape[:2]:
        raise ValueError(f"weight map {w.shape} does not match image {da.shape[:2]}")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ValueError("weights must be finite and nonnegative")
    w = np.where(active, w, 0.0)
    total = w.sum()
    if total <= 0.0:
        raise ValueError("weights are all zero on the active set")
    err = np.sum((da - db) ** 2, axis=2) / da.shape[2]
    return MetricResult("ws-psnr", _db(peak, float(np.sum(w * err) / total)), channel)


def erp_weights(grid: ProjectionGrid) -> np.ndarray:
    """Cosine-of-latitude weights of an ERP raster, shape (H, W)."""
    if grid.format is not ProjectionFormat.ERP:
        raise ValueError(f"analytic weights need an ERP grid, got {grid.format.name}")
    h = grid.height
    row = np.cos((np.arange(h) + 0.5 - h / 2.0) * np.pi / h)
    return np.repeat(row[:, None], grid.width, axis=1)


# -- solid angles ---------------------------------------------------------------

def triangle_solid_angle(a, b, c) -> np.ndarray:
    """Solid angle of spherical triangles with unit-vector corners (..., 3)."""
    num = np.abs(np.einsum("...i,...i->...", a, np.cross(b, c)))
    den = 1.0 + np.einsum("...i,...i->...", a, b) + np.einsum("...i,...i->...", b, c) + np.einsum(
        "...i,...i->...", c, a
    )
    return 2.0 * np.arctan2(num, den)


def _cell_areas(layout, label, x0, y0, step, n):
    """Solid angles of an n x n lattice of square cells per origin point.

    x0, y0 : (P,) cell-lattice origins; returns (P, n, n).
    """
    t = np.arange(n + 1) * step
    xs = x0[:, None, None] + t[None, None, :]
    ys = y0[:, None, None] + t[None, :, None]
    xs, ys = np.broadcast_arrays(xs, ys)
    labels = np.broadcast_to(np.asarray(label)[..., None, None], xs.shape)
    d = layout.to_sphere(labels, xs, ys)
    c00, c01 = d[:, :-1, :-1], d[:, :-1, 1:]
    c10, c11 = d[:, 1:, :-1], d[:, 1:, 1:]
    return triangle_solid_angle(c00, c01, c11) + triangle_solid_angle(c00, c11, c10)


_INTERIOR_SPLIT = 4
_BOUNDARY_SPLIT = 8
_BATCH = 1 << 14


def solid_angle_weights(grid: ProjectionGrid) -> np.ndarray:
    """Steradians covered by each active pixel; zero on inactive pixels.

    Each pixel is split into sub-cells whose corners are unprojected with
    the formula of the pixel's own face. Pixels next to a face seam or an
    inactive gap are split finer and every sub-cell is shared among the
    faces overlapping it by coverage fraction; a share falling outside the
    owning face's own pixels is credited to that face's nearest pixel, so
    the weights tile the sphere.
    """
    layout = get_layout(grid)
    labels = layout.pixel_labels
    h, w = labels.shape
    out = np.zeros((h, w))

    # raster borders count as boundary: edge rows of non-geodesic faces need the fine split
    padded = np.pad(labels, 1, mode="constant", constant_values=-2)
    boundary = np.zeros_like(labels, dtype=bool)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            boundary |= padded[1 + dy:1 + dy + h, 1 + dx:1 + dx + w] != labels
    interior = ~boundary & (labels >= 0)

    iy, ix = np.nonzero(interior)
    n = _INTERIOR_SPLIT
    for s in range(0, iy.size, _BATCH):
        sl = slice(s, s + _BATCH)
        areas = _cell_areas(layout, labels[iy[sl], ix[sl]], ix[sl].astype(float), iy[sl].astype(float), 1.0 / n, n)
        out[iy[sl], ix[sl]] = areas.sum(axis=(1, 2))

    by, bx = np.nonzero(boundary)
    if by.size:
        _boundary_areas(layout, labels, out, by, bx)
    return out


def _boundary_areas(layout, labels, out, by, bx):
    n = _BOUNDARY_SPLIT
    step = 1.0 / n
    offs = (np.arange(n) + 0.5) * step
    trees = {}
    for k in range(len(layout.regions)):
        ky, kx = np.nonzero(labels == k)
        if ky.size:
            trees[k] = (cKDTree(np.column_stack([kx + 0.5, ky + 0.5])), ky, kx)
    chunk = _BATCH // 4
    for s in range(0, by.size, chunk):
        py, px = by[s:s + chunk], bx[s:s + chunk]
        cx = (px[:, None, None] + offs[None, None, :]).repeat(n, axis=1)
        cy = (py[:, None, None] + offs[None, :, None]).repeat(n, axis=2)
        covers = []
        for k, region in enumerate(layout.regions):
            x0, y0, x1, y1 = region.bbox
            near = (px + 1 >= x0 - 1) & (px <= x1 + 1) & (py + 1 >= y0 - 1) & (py <= y1 + 1)
            if not near.any():
                continue
            cov = np.zeros(cx.shape)
            # fraction of each sub-cell inside the region, from the center's signed distance
            cov[near] = np.clip(0.5 - region.signed_distance(cx[near], cy[near]) / step, 0.0, 1.0)
            covers.append((k, cov))
        total = sum(c for _, c in covers)
        scale = np.where(total > 1.0, 1.0 / np.maximum(total, 1e-300), 1.0)
        for k, cov in covers:
            cov = cov * scale
            p_idx, r_idx, c_idx = np.nonzero(cov > 0.0)
            if p_idx.size == 0:
                continue
            x0 = px[p_idx] + c_idx * step
            y0 = py[p_idx] + r_idx * step
            areas = _cell_areas(layout, np.full(x0.shape, k), x0, y0, step, 1)[:, 0, 0]
            areas *= cov[p_idx, r_idx, c_idx]
            own = labels[py[p_idx], px[p_idx]] == k
            np.add.at(out, (py[p_idx][own], px[p_idx][own]), areas[own])
            if (~own).any():
                tree, ky, kx = trees[k]
                _, nearest = tree.query(np.column_stack([x0[~own] + step / 2, y0[~own] + step / 2]))
                np.add.at(out, (ky[nearest], kx[nearest]), areas[~own])


def metric_weights(grid: ProjectionGrid) -> np.ndarray:
    """Weights WS-PSNR uses on ``grid``: analytic for ERP, solid angle otherwise."""
    if grid.format is ProjectionFormat.ERP:
        return erp_weights(grid)
    return solid_angle_weights(grid)


# -- SSIM -------------------------------------------------------------------------

def _gauss_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    t = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(t * t) / (2.0 * sigma * sigma))
    return g / g.sum()


def _filter_valid(img: np.ndarray, g: np.ndarray) -> np.ndarray:
    from numpy.lib.stride_tricks import sliding_window_view

    k = g.size
    rows = sliding_window_view(img, k, axis=0) @ g
    return sliding_window_view(rows, k, axis=1) @ g


def ssim(a, b, peak: float = 1.0) -> MetricResult:
    """Mean SSIM over window positions free of inactive pixels (single channel)."""
    da, db, active = _pair(a, b)
    if da.shape[2] != 1:
        raise ValueError("ssim expects a single-channel (Y) image")
    x, y = da[:, :, 0], db[:, :, 0]
    if min(x.shape) < SSIM_WINDOW:
        raise ValueError(f"image smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    g = _gauss_window()
    c1 = (SSIM_K1 * peak) ** 2
    c2 = (SSIM_K2 * peak) ** 2
    mx, my = _filter_valid(x, g), _filter_valid(y, g)
    sxx = _filter_valid(x * x, g) - mx * mx
    syy = _filter_valid(y * y, g) - my * my
    sxy = _filter_valid(x * y, g) - mx * my
    smap = ((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2))
    box = np.ones(SSIM_WINDOW) / SSIM_WINDOW
    clean = _filter_valid((~active).astype(np.float64), box) <= 0.0
    if not clean.any():
        raise ValueError("no SSIM window lies entirely on active pixels")
    value = float(np.clip(np.mean(smap[clean]), -1.0, 1.0))
    return MetricResult("ssim", value, "y")


# -- channels --------------------------------------------------------------------

def y_channel(img: PlanarImage) -> PlanarImage:
    """Luma plane: the Y plane of YUV input, BT.709 full-range luma of RGB."""
    if not isinstance(img, PlanarImage):
        raise TypeError("y_channel needs a PlanarImage carrying a color model")
    if img.color == "gray":
        data = img.data
    elif img.color == "yuv":
        data = img.data[:, :, :1]
    elif img.color == "rgb":
        data = img.data @ np.array(BT709)[:, None]
    else:  # pragma: no cover - PlanarImage rejects other tags
        raise ValueError(f"unknown color model {img.color!r}")
    return PlanarImage(data.copy(), color="gray", mask=img.mask, meta=dict(img.meta))


def split_channels(img: PlanarImage) -> list[tuple[str, PlanarImage]]:
    names = {"gray": ("y",), "rgb": ("r", "g", "b"), "yuv": ("y", "u", "v")}[img.color]
    return [
        (name, PlanarImage(img.data[:, :, i:i + 1].copy(), color="gray", mask=img.mask))
        for i, name in enumerate(names)
    ]
