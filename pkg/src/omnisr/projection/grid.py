from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import NamedTuple


class ProjectionFormat(str, Enum):
    ERP = "erp"
    CMP = "cmp"
    EAC = "eac"
    ISP = "isp"
    OHP = "ohp"
    TSP = "tsp"
    SSP = "ssp"

    def __str__(self) -> str:
        return self.name

    @classmethod
    def parse(cls, value) -> "ProjectionFormat":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            names = ", ".join(f.name for f in cls)
            raise ValueError(f"unknown projection format {value!r}; expected one of {names}") from None


ALL_FORMATS = tuple(ProjectionFormat)

# width / height of the triangle unfoldings with equilateral triangles
ISP_ASPECT = 5.0 / (2.0 * math.sqrt(3.0))
OHP_ASPECT = 4.0 / math.sqrt(3.0)
_TRIANGLE_ASPECT_TOL = 0.05


class ImagePoint(NamedTuple):
    """Continuous raster position; pixel (i, j) has its center at (i + 0.5, j + 0.5)."""

    x: float
    y: float


@dataclass(frozen=True)
class ProjectionGrid:
    """A projection format with raster dimensions and layout parameters.

    Parameters
    ----------
    format : ProjectionFormat
    width, height : int
        Raster size in pixels.
    back_ratio : float
        TSP only. Side of the back face relative to the front face.
    cap_latitude : float
        SSP only. Latitude (radians) where the equatorial band meets the
        polar caps.
    """

    format: ProjectionFormat
    width: int
    height: int
    back_ratio: float = 1.0 / 3.0
    cap_latitude: float = math.pi / 4

    def __post_init__(self):
        object.__setattr__(self, "format", ProjectionFormat.parse(self.format))
        w, h = self.width, self.height
        if int(w) != w or int(h) != h:
            raise ValueError("grid dimensions must be integers")
        object.__setattr__(self, "width", int(w))
        object.__setattr__(self, "height", int(h))
        if self.width < 2 or self.height < 2:
            raise ValueError(f"grid must be at least 2x2, got {self.width}x{self.height}")
        if not 0.0 < self.back_ratio < 1.0:
            raise ValueError("back_ratio must lie in (0, 1)")
        if not 0.0 < self.cap_latitude < math.pi / 2:
            raise ValueError("cap_latitude must lie in (0, pi/2)")
        _check_aspect(self.format, self.width, self.height)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def n_pixels(self) -> int:
        return self.width * self.height

    @property
    def face_size(self) -> int:
        if self.format not in (ProjectionFormat.CMP, ProjectionFormat.EAC):
            raise AttributeError("face_size is defined for cube formats only")
        return self.width // 3

    def scaled(self, factor: int) -> "ProjectionGrid":
        """Same layout with every dimension multiplied by ``factor``."""
        return replace(self, width=self.width * factor, height=self.height * factor)

    def __str__(self) -> str:
        return f"{self.format.name} {self.width}x{self.height}"


def _check_aspect(fmt: ProjectionFormat, w: int, h: int) -> None:
    if fmt in (ProjectionFormat.ERP, ProjectionFormat.SSP, ProjectionFormat.TSP):
        if w != 2 * h:
            raise ValueError(f"{fmt.name} requires width = 2 * height, got {w}x{h}")
    elif fmt in (ProjectionFormat.CMP, ProjectionFormat.EAC):
        if 2 * w != 3 * h or w % 3:
            raise ValueError(f"{fmt.name} requires a 3x2 layout of square faces, got {w}x{h}")
    else:
        aspect = ISP_ASPECT if fmt is ProjectionFormat.ISP else OHP_ASPECT
        if abs((w / h) / aspect - 1.0) > _TRIANGLE_ASPECT_TOL:
            raise ValueError(
                f"{fmt.name} requires width/height close to {aspect:.4f}, got {w}x{h}"
            )
