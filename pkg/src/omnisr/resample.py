"""Conversion between projection grids by inverse mapping through the sphere.

Kernel taps that fall outside the sampled face (another face, an inactive
gap or off the raster) are re-fetched through the sphere: the tap position is
unprojected with the face's own formula, projected back into the source
raster and read bilinearly there.
"""

from __future__ import annotations

from enum import Enum

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from omnisr._validation import check_grid_for, check_image, infer_grid, same_kind
from omnisr.image import PlanarImage
from omnisr.projection import FILL_VALUE, ProjectionGrid, default_grid, get_layout

_CHUNK = 1 << 16


class InterpKernel(str, Enum):
    NEAREST = "nearest"
    BILINEAR = "bilinear"
    BICUBIC = "bicubic"
    LANCZOS3 = "lanczos3"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, value) -> "InterpKernel":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            names = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown kernel {value!r}; expected one of {names}") from None

    @property
    def radius(self) -> int:
        return {"nearest": 0, "bilinear": 1, "bicubic": 2, "lanczos3": 3}[self.value]


def cubic(t, a: float = -0.5) -> np.ndarray:
    """Keys cubic convolution kernel; a = -0.5 is Catmull-Rom."""
    t = np.abs(np.asarray(t, dtype=np.float64))
    t2, t3 = t * t, t * t * t
    near = (a + 2.0) * t3 - (a + 3.0) * t2 + 1.0
    far = a * t3 - 5.0 * a * t2 + 8.0 * a * t - 4.0 * a
    return np.where(t <= 1.0, near, np.where(t < 2.0, far, 0.0))


def lanczos(t, lobes: int = 3) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    return np.where(np.abs(t) < lobes, np.sinc(t) * np.sinc(t / lobes), 0.0)


def kernel_fn(kernel: InterpKernel):
    kernel = InterpKernel.parse(kernel)
    if kernel is InterpKernel.BILINEAR:
        return lambda t: np.clip(1.0 - np.abs(t), 0.0, None)
    if kernel is InterpKernel.BICUBIC:
        return cubic
    if kernel is InterpKernel.LANCZOS3:
        return lanczos
    raise ValueError("nearest has no continuous kernel")


def tap_weights(pos, kernel: InterpKernel) -> tuple[np.ndarray, np.ndarray]:
    """Integer tap indices and normalized weights along one axis.

    ``pos`` is a continuous coordinate in which pixel i spans [i, i + 1).
    Returns arrays of shape (N, taps).
    """
    pos = np.asarray(pos, dtype=np.float64)
    if kernel is InterpKernel.NEAREST:
        return np.floor(pos).astype(np.int64)[:, None], np.ones((pos.size, 1))
    r = kernel.radius
    f = pos - 0.5
    i0 = np.floor(f).astype(np.int64)
    idx = i0[:, None] + np.arange(1 - r, r + 1)
    w = kernel_fn(kernel)(idx - f[:, None])
    w /= w.sum(axis=1, keepdims=True)
    return idx, w


def _gather(data, layout, ix, iy, labels, refetch):
    """Values at integer taps; taps outside their face go through ``refetch``."""
    h, w = data.shape[:2]
    inb = (ix >= 0) & (ix < w) & (iy >= 0) & (iy < h)
    ixc = np.clip(ix, 0, w - 1)
    iyc = np.clip(iy, 0, h - 1)
    ok = inb & (layout.pixel_labels[iyc, ixc] == labels)
    vals = data[iyc, ixc]
    bad = ~ok
    if bad.any():
        vals[bad] = refetch(ix[bad] + 0.5, iy[bad] + 0.5, labels[bad])
    return vals


def _fetch_nearest(data, layout, x, y, labels):
    d = layout.to_sphere(labels, x, y)
    px, py, _ = layout.project(d)
    h, w = data.shape[:2]
    ix = np.clip(np.floor(px).astype(np.int64), 0, w - 1)
    iy = np.clip(np.floor(py).astype(np.int64), 0, h - 1)
    ny, nx = layout.nearest_active
    return data[ny[iy, ix], nx[iy, ix]]


def _fetch_bilinear(data, layout, x, y, labels):
    """Bilinear read at tap positions expressed in face ``labels`` coordinates."""
    d = layout.to_sphere(labels, x, y)
    px, py, pl = layout.project(d)
    return _interp(data, layout, px, py, pl, InterpKernel.BILINEAR,
                   lambda a, b, c: _fetch_nearest(data, layout, a, b, c))


def _interp(data, layout, x, y, labels, kernel, refetch):
    ixs, wx = tap_weights(x, kernel)
    iys, wy = tap_weights(y, kernel)
    ca, cb = (iys.shape[1] - 1) // 2, (ixs.shape[1] - 1) // 2
    ref = _gather(data, layout, ixs[:, cb], iys[:, ca], labels, refetch)
    # accumulate offsets from one tap so constant regions come out exact
    out = np.zeros_like(ref)
    for a in range(iys.shape[1]):
        for b in range(ixs.shape[1]):
            vals = ref if (a, b) == (ca, cb) else _gather(data, layout, ixs[:, b], iys[:, a], labels, refetch)
            out += (wy[:, a] * wx[:, b])[:, None] * (vals - ref)
    return ref + out


def sample_directions(src: PlanarImage, src_grid: ProjectionGrid, d, kernel="bicubic") -> np.ndarray:
    """Interpolated samples of ``src`` at (N, 3) directions; returns (N, C)."""
    kernel = InterpKernel.parse(kernel)
    check_grid_for(src, src_grid)
    layout = get_layout(src_grid)
    data = src.data
    d = np.asarray(d, dtype=np.float64).reshape(-1, 3)
    out = np.empty((d.shape[0], data.shape[2]))
    refetch = lambda a, b, c: _fetch_bilinear(data, layout, a, b, c)  # noqa: E731
    for start in range(0, d.shape[0], _CHUNK):
        sl = slice(start, start + _CHUNK)
        x, y, labels = layout.project(d[sl])
        out[sl] = _interp(data, layout, x, y, labels, kernel, refetch)
    if kernel in (InterpKernel.BICUBIC, InterpKernel.LANCZOS3):
        np.clip(out, 0.0, 1.0, out=out)
    return out


def sample(src: PlanarImage, src_grid: ProjectionGrid, d, kernel="bicubic") -> np.ndarray:
    """Sample vector of ``src`` seen in direction ``d``."""
    v = np.asarray(d, dtype=np.float64).reshape(1, 3)
    v = v / np.linalg.norm(v)
    return sample_directions(src, src_grid, v, kernel)[0]


def convert(src, src_grid: ProjectionGrid, dst_grid: ProjectionGrid, kernel="bicubic") -> PlanarImage:
    """Resample ``src`` from ``src_grid`` onto ``dst_grid``.

    Inactive destination pixels get the gray fill value and are masked out.
    Converting onto an identical grid copies the samples.
    """
    img = check_image(src)
    check_grid_for(img, src_grid)
    dst_layout = get_layout(dst_grid)
    mask = dst_layout.mask
    fill = FILL_VALUE / 255.0
    if src_grid == dst_grid:
        data = img.data.copy()
    else:
        labels = dst_layout.pixel_labels
        iy, ix = np.nonzero(mask)
        d = dst_layout.to_sphere(labels[iy, ix], ix + 0.5, iy + 0.5)
        data = np.empty((dst_grid.height, dst_grid.width, img.channels))
        data[iy, ix] = sample_directions(img, src_grid, d, kernel)
    data[~mask] = fill
    return PlanarImage(data, color=img.color, mask=None if mask.all() else mask.copy(), meta=dict(img.meta))


class ProjectionConverter(TransformerMixin, BaseEstimator):
    """Transformer wrapping :func:`convert` between two formats.

    ``fit`` reads the source raster size and picks the target grid with an
    equal active-pixel budget (or ``target_budget`` when given).
    ``inverse_transform`` maps target-format images back onto the source grid.

    Parameters
    ----------
    source_format, target_format : str or ProjectionFormat
    target_budget : int, optional
    kernel : {"nearest", "bilinear", "bicubic", "lanczos3"}
    """

    def __init__(self, source_format="erp", target_format="eac", target_budget=None, kernel="bicubic"):
        self.source_format = source_format
        self.target_format = target_format
        self.target_budget = target_budget
        self.kernel = kernel

    def fit(self, X, y=None):
        img = check_image(X)
        InterpKernel.parse(self.kernel)
        self.source_grid_ = infer_grid(img, self.source_format)
        budget = self.target_budget
        if budget is None:
            budget = int(get_layout(self.source_grid_).mask.sum())
        self.target_grid_ = default_grid(self.target_format, budget)
        return self

    def transform(self, X):
        check_is_fitted(self, "target_grid_")
        return same_kind(X, convert(check_image(X), self.source_grid_, self.target_grid_, self.kernel))

    def inverse_transform(self, X):
        check_is_fitted(self, "target_grid_")
        return same_kind(X, convert(check_image(X), self.target_grid_, self.source_grid_, self.kernel))
