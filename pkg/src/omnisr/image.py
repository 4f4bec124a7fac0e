"""Planar image container shared by all modules."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

COLOR_MODELS = ("gray", "rgb", "yuv")


@dataclass
class PlanarImage:
    """Raster of normalized samples in [0, 1].

    Attributes
    ----------
    data : (H, W, C) float64 ndarray
        C is 1 for ``gray`` and 3 for ``rgb``/``yuv``. YUV images are held as
        full-resolution (4:4:4) planes.
    color : str, optional
        Color model tag, one of ``gray``, ``rgb``, ``yuv``; inferred from the
        channel count when omitted.
    mask : (H, W) bool ndarray or None
        Active pixels; None means every pixel is active.
    meta : dict
        Free-form annotations (e.g. the true size before padding).
    """

    data: np.ndarray
    color: str | None = None
    mask: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3 or data.shape[2] not in (1, 3):
            raise ValueError(f"image data must be (H, W) or (H, W, 1|3), got {data.shape}")
        if self.color is None:
            self.color = "gray" if data.shape[2] == 1 else "rgb"
        if self.color not in COLOR_MODELS:
            raise ValueError(f"unknown color model {self.color!r}")
        if (data.shape[2] == 1) != (self.color == "gray"):
            raise ValueError(f"{self.color} image cannot have {data.shape[2]} channel(s)")
        self.data = data
        if self.mask is not None:
            mask = np.asarray(self.mask, dtype=bool)
            if mask.shape != data.shape[:2]:
                raise ValueError(f"mask shape {mask.shape} does not match image {data.shape[:2]}")
            self.mask = mask

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def active(self) -> np.ndarray:
        if self.mask is None:
            return np.ones(self.data.shape[:2], dtype=bool)
        return self.mask

    @classmethod
    def from_uint8(cls, arr, color: str | None = None, mask=None) -> "PlanarImage":
        arr = np.asarray(arr)
        if color is None:
            color = "gray" if arr.ndim == 2 or arr.shape[-1] == 1 else "rgb"
        return cls(arr.astype(np.float64) / 255.0, color=color, mask=mask)

    def to_uint8(self) -> np.ndarray:
        """Quantize to 8 bit, rounding half away from zero."""
        return quantize8(self.data)

    def copy(self, **changes) -> "PlanarImage":
        new = replace(self, **changes)
        if "data" not in changes:
            new.data = self.data.copy()
        if "meta" not in changes:
            new.meta = dict(self.meta)
        return new


def quantize8(data) -> np.ndarray:
    v = np.clip(np.asarray(data, dtype=np.float64), 0.0, 1.0) * 255.0
    return np.floor(v + 0.5).astype(np.uint8)
