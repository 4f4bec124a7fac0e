"""Input checking helpers used by the estimator classes."""

from __future__ import annotations

import numpy as np

from omnisr.image import PlanarImage
from omnisr.projection import ProjectionFormat, ProjectionGrid


def check_image(X, color: str | None = None) -> PlanarImage:
    """Coerce ``X`` into a :class:`PlanarImage`.

    ndarrays are taken as normalized samples when floating point and as 8-bit
    samples when integer typed.
    """
    if isinstance(X, PlanarImage):
        return X
    arr = np.asarray(X)
    if arr.ndim not in (2, 3):
        raise ValueError(f"expected an (H, W) or (H, W, C) array, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("empty image")
    if np.issubdtype(arr.dtype, np.integer):
        return PlanarImage.from_uint8(arr, color=color)
    if not np.all(np.isfinite(arr)):
        raise ValueError("image contains NaN or infinite samples")
    if color is None:
        color = "gray" if arr.ndim == 2 or arr.shape[-1] == 1 else "rgb"
    return PlanarImage(arr.astype(np.float64), color=color)


def same_kind(template, img: PlanarImage):
    """Return ``img`` in the container type of ``template`` (ndarray in, ndarray out)."""
    if isinstance(template, PlanarImage):
        return img
    arr = np.asarray(template)
    out = img.to_uint8() if np.issubdtype(arr.dtype, np.integer) else img.data
    return out if arr.ndim == 3 else out[:, :, 0]


def check_grid_for(img: PlanarImage, grid: ProjectionGrid) -> None:
    if (img.height, img.width) != grid.shape:
        raise ValueError(
            f"image is {img.width}x{img.height} but the {grid.format.name} grid is {grid.width}x{grid.height}"
        )


def infer_grid(img: PlanarImage, fmt) -> ProjectionGrid:
    """Grid of format ``fmt`` matching the image dimensions."""
    return ProjectionGrid(ProjectionFormat.parse(fmt), img.width, img.height)


def check_scale(scale, allow_identity: bool = True) -> int:
    allowed = (1, 2, 3, 4) if allow_identity else (2, 3, 4)
    if int(scale) != scale or int(scale) not in allowed:
        raise ValueError(f"scale factor must be one of {allowed}, got {scale!r}")
    return int(scale)
