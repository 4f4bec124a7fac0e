"""Sampling-density maps and uniformity statistics of projection grids.

The raw map holds, for every active pixel, the solid angle of its full
square footprint unprojected with its own face's formula. Unlike
:func:`omnisr.metrics.solid_angle_weights` a pixel cut by a face seam or by
the inactive region is not clipped, so the statistics describe how finely a
format samples the sphere rather than how the raster tiles it.

Heatmap files show sampling density (inverse solid angle), normalized per
image: the densest pixel is 255, the sparsest active pixel 0, inactive
pixels 0.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from omnisr.metrics import _cell_areas
from omnisr.projection import ProjectionGrid, get_layout

_SPLIT = 4
_BATCH = 1 << 15


@dataclass(frozen=True)
class DistortionStats:
    """Per-pixel solid-angle statistics over the active pixels (steradians)."""

    min: float
    max: float
    mean: float
    ratio: float
    active_fraction: float


@dataclass(frozen=True)
class DensityMap:
    solid_angle: np.ndarray
    heatmap: np.ndarray
    mask: np.ndarray


def pixel_solid_angles(grid: ProjectionGrid) -> np.ndarray:
    """Unclipped footprint solid angle of every active pixel; 0 elsewhere."""
    layout = get_layout(grid)
    labels = layout.pixel_labels
    out = np.zeros(labels.shape)
    iy, ix = np.nonzero(labels >= 0)
    for s in range(0, iy.size, _BATCH):
        sl = slice(s, s + _BATCH)
        areas = _cell_areas(layout, labels[iy[sl], ix[sl]], ix[sl].astype(float), iy[sl].astype(float),
                            1.0 / _SPLIT, _SPLIT)
        out[iy[sl], ix[sl]] = areas.sum(axis=(1, 2))
    return out


def density_map(grid: ProjectionGrid) -> DensityMap:
    """Raw per-pixel solid angles plus an 8-bit density heatmap."""
    sa = pixel_solid_angles(grid)
    mask = get_layout(grid).mask
    density = np.zeros_like(sa)
    density[mask] = 1.0 / sa[mask]
    lo, hi = density[mask].min(), density[mask].max()
    heat = np.zeros(sa.shape, dtype=np.uint8)
    if hi > lo:
        heat[mask] = np.floor((density[mask] - lo) / (hi - lo) * 255.0 + 0.5).astype(np.uint8)
    else:
        heat[mask] = 255
    return DensityMap(solid_angle=sa, heatmap=heat, mask=mask)


def distortion_stats(grid: ProjectionGrid) -> DistortionStats:
    m = density_map(grid)
    vals = m.solid_angle[m.mask]
    lo, hi = float(vals.min()), float(vals.max())
    return DistortionStats(
        min=lo,
        max=hi,
        mean=float(vals.mean()),
        ratio=hi / lo,
        active_fraction=float(m.mask.mean()),
    )


STATS_COLUMNS = ("format", "width", "height", "min_sr", "max_sr", "mean_sr", "ratio", "active_fraction")


def render_stats(rows, style: str = "csv") -> str:
    """Table of ``(grid, DistortionStats)`` pairs in csv or markdown."""
    body = [
        [
            g.format.name,
            str(g.width),
            str(g.height),
            f"{s.min:.6e}",
            f"{s.max:.6e}",
            f"{s.mean:.6e}",
            f"{s.ratio:.3f}",
            f"{s.active_fraction:.3f}",
        ]
        for g, s in rows
    ]
    style = style.strip().lower()
    if style == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(STATS_COLUMNS)
        writer.writerows(body)
        return buf.getvalue()
    if style in ("markdown", "md"):
        lines = ["| " + " | ".join(STATS_COLUMNS) + " |", "|" + "---|" * len(STATS_COLUMNS)]
        lines += ["| " + " | ".join(r) + " |" for r in body]
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown style {style!r}; expected csv or markdown")
