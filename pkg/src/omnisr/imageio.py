"""Image and raw-frame I/O, synthetic sphere patterns and run-config parsing.

Supported containers:

* PNG, 8-bit gray or RGB.
* Y4M, first frame only, 4:2:0 8-bit (``C420`` and its siting variants).
* Headerless planar YUV 4:2:0 (``.yuv``) with a key=value sidecar at
  ``<file>.spec``.

YUV samples use BT.709 full range. 4:2:0 chroma is co-sited with the
top-left luma sample of each 2x2 block; reading upsamples it bilinearly to
full resolution and writing keeps the co-sited samples, so a read/write
cycle is lossless.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.special import eval_legendre

from omnisr.geometry import normalize, xyz_to_latlon
from omnisr.image import PlanarImage, quantize8
from omnisr.projection import FILL_VALUE, ProjectionGrid, get_layout

PIX_FMTS = ("gray8", "rgb24", "yuv420p")
Y4M_420_TAGS = ("420", "420jpeg", "420paldv", "420mpeg2")
PATTERN_KINDS = ("latlon-grid", "smooth-harmonic", "checker-sphere")

# BT.709 luma coefficients
KR, KB = 0.2126, 0.0722
KG = 1.0 - KR - KB


@dataclass(frozen=True)
class FrameSpec:
    width: int
    height: int
    pix_fmt: str
    color: str

    def __post_init__(self):
        if self.pix_fmt not in PIX_FMTS:
            raise ValueError(f"unsupported pixel format {self.pix_fmt!r}")
        if self.pix_fmt == "yuv420p" and (self.width % 2 or self.height % 2):
            raise ValueError("yuv420p frames need even width and height")

    @property
    def frame_bytes(self) -> int:
        n = self.width * self.height
        return {"gray8": n, "rgb24": 3 * n, "yuv420p": n + n // 2}[self.pix_fmt]

    def to_sidecar(self) -> str:
        return (
            f"width={self.width}\nheight={self.height}\npix_fmt={self.pix_fmt}\n"
            "matrix=bt709\nrange=full\nchroma_siting=topleft\n"
        )

    @classmethod
    def from_sidecar(cls, text: str) -> "FrameSpec":
        kv = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            kv[key.strip()] = value.strip()
        try:
            w, h, fmt = int(kv["width"]), int(kv["height"]), kv.get("pix_fmt", "yuv420p")
        except (KeyError, ValueError) as exc:
            raise ValueError(f"malformed sidecar: {exc}") from None
        for key, want in (("matrix", "bt709"), ("range", "full"), ("chroma_siting", "topleft")):
            if kv.get(key, want) != want:
                raise ValueError(f"sidecar {key}={kv[key]} is not supported (only {want})")
        return cls(w, h, fmt, {"gray8": "gray", "rgb24": "rgb", "yuv420p": "yuv"}.get(fmt, "yuv"))


def spec_for(img: PlanarImage, container: str) -> FrameSpec:
    if container in ("y4m", "yuv"):
        if img.color != "yuv":
            raise ValueError(f"{container} files carry YUV images; convert with rgb_to_yuv first")
        return FrameSpec(img.width, img.height, "yuv420p", "yuv")
    if img.color == "yuv":
        raise ValueError("PNG carries gray or RGB images; convert with yuv_to_rgb first")
    return FrameSpec(img.width, img.height, "gray8" if img.color == "gray" else "rgb24", img.color)


# -- color ---------------------------------------------------------------------

def rgb_to_yuv(img: PlanarImage) -> PlanarImage:
    if img.color != "rgb":
        raise ValueError("expected an RGB image")
    r, g, b = np.moveaxis(img.data, 2, 0)
    y = KR * r + KG * g + KB * b
    u = (b - y) / (2.0 * (1.0 - KB)) + 0.5
    v = (r - y) / (2.0 * (1.0 - KR)) + 0.5
    return PlanarImage(np.stack([y, u, v], axis=2), color="yuv", mask=img.mask, meta=dict(img.meta))


def yuv_to_rgb(img: PlanarImage) -> PlanarImage:
    if img.color != "yuv":
        raise ValueError("expected a YUV image")
    y, u, v = np.moveaxis(img.data, 2, 0)
    r = y + 2.0 * (1.0 - KR) * (v - 0.5)
    b = y + 2.0 * (1.0 - KB) * (u - 0.5)
    g = (y - KR * r - KB * b) / KG
    out = np.clip(np.stack([r, g, b], axis=2), 0.0, 1.0)
    return PlanarImage(out, color="rgb", mask=img.mask, meta=dict(img.meta))


def upsample_chroma(plane: np.ndarray, width: int, height: int) -> np.ndarray:
    """Bilinear 2x upsampling of a top-left co-sited chroma plane."""
    plane = np.asarray(plane, dtype=np.float64)

    def axis_weights(n_out, n_in):
        pos = np.arange(n_out) / 2.0
        i0 = np.minimum(np.floor(pos).astype(int), n_in - 1)
        i1 = np.minimum(i0 + 1, n_in - 1)
        t = pos - np.floor(pos)
        return i0, i1, t

    r0, r1, ty = axis_weights(height, plane.shape[0])
    c0, c1, tx = axis_weights(width, plane.shape[1])
    rows = plane[r0] * (1 - ty)[:, None] + plane[r1] * ty[:, None]
    return rows[:, c0] * (1 - tx) + rows[:, c1] * tx


def _planes_420(img: PlanarImage) -> list[np.ndarray]:
    q = quantize8(img.data)
    return [q[:, :, 0], q[0::2, 0::2, 1], q[0::2, 0::2, 2]]


def _image_420(y: np.ndarray, u: np.ndarray, v: np.ndarray) -> PlanarImage:
    h, w = y.shape
    data = np.stack(
        [y / 255.0, upsample_chroma(u / 255.0, w, h), upsample_chroma(v / 255.0, w, h)], axis=2
    )
    return PlanarImage(data, color="yuv")


# -- read / write -----------------------------------------------------------------

def _container(path: Path) -> str:
    ext = path.suffix.lower()
    if ext == ".png":
        return "png"
    if ext == ".y4m":
        return "y4m"
    if ext == ".yuv":
        return "yuv"
    raise ValueError(f"unsupported image container {ext or path.name!r} (use .png, .y4m or .yuv)")


def read_image(path) -> tuple[PlanarImage, FrameSpec]:
    path = Path(path)
    kind = _container(path)
    if kind == "png":
        with Image.open(path) as im:
            if im.mode in ("L", "I;16", "I"):
                arr = np.asarray(im.convert("L"))
            else:
                arr = np.asarray(im.convert("RGB"))
        img = PlanarImage.from_uint8(arr)
        return img, spec_for(img, "png")
    if kind == "y4m":
        return _read_y4m(path)
    spec_path = Path(str(path) + ".spec")
    if not spec_path.exists():
        raise ValueError(f"raw YUV file {path} has no sidecar {spec_path.name}")
    spec = FrameSpec.from_sidecar(spec_path.read_text())
    if spec.pix_fmt != "yuv420p":
        raise ValueError("raw files must be yuv420p")
    raw = path.read_bytes()
    if len(raw) != spec.frame_bytes:
        raise ValueError(
            f"raw file is {len(raw)} bytes; sidecar {spec.width}x{spec.height} needs {spec.frame_bytes}"
        )
    return _decode_420(raw, spec.width, spec.height), spec


def _decode_420(raw: bytes, w: int, h: int) -> PlanarImage:
    buf = np.frombuffer(raw, dtype=np.uint8)
    n, c = w * h, (w // 2) * (h // 2)
    y = buf[:n].reshape(h, w).astype(np.float64)
    u = buf[n:n + c].reshape(h // 2, w // 2).astype(np.float64)
    v = buf[n + c:n + 2 * c].reshape(h // 2, w // 2).astype(np.float64)
    return _image_420(y, u, v)


def _read_y4m(path: Path) -> tuple[PlanarImage, FrameSpec]:
    data = path.read_bytes()
    end = data.find(b"\n")
    if end < 0 or not data.startswith(b"YUV4MPEG2"):
        raise ValueError(f"{path} is not a YUV4MPEG2 stream")
    w = h = None
    chroma = "420jpeg"
    for token in data[:end].decode("ascii").split()[1:]:
        if token[0] == "W":
            w = int(token[1:])
        elif token[0] == "H":
            h = int(token[1:])
        elif token[0] == "C":
            chroma = token[1:]
    if w is None or h is None:
        raise ValueError("Y4M header lacks W/H")
    if chroma not in Y4M_420_TAGS:
        raise ValueError(f"unsupported Y4M chroma format C{chroma} (only 4:2:0 8-bit)")
    spec = FrameSpec(w, h, "yuv420p", "yuv")
    frame = data.find(b"\n", end + 1)
    if frame < 0 or not data[end + 1:].startswith(b"FRAME"):
        raise ValueError("Y4M stream has no frame")
    payload = data[frame + 1:frame + 1 + spec.frame_bytes]
    if len(payload) != spec.frame_bytes:
        raise ValueError("truncated Y4M frame")
    return _decode_420(payload, w, h), spec


def write_image(img: PlanarImage, path) -> FrameSpec:
    """Write ``img``; inactive pixels are stored as the gray fill value."""
    path = Path(path)
    kind = _container(path)
    spec = spec_for(img, kind)
    data = img.data
    if img.mask is not None and not img.mask.all():
        data = data.copy()
        data[~img.mask] = FILL_VALUE / 255.0
    filled = PlanarImage(data, color=img.color)
    if kind == "png":
        q = filled.to_uint8()
        Image.fromarray(q[:, :, 0] if q.shape[2] == 1 else q).save(path)
        return spec
    planes = _planes_420(filled)
    payload = b"".join(p.tobytes() for p in planes)
    if kind == "y4m":
        header = f"YUV4MPEG2 W{spec.width} H{spec.height} F25:1 Ip A1:1 C420 XCOLORRANGE=FULL\n"
        path.write_bytes(header.encode("ascii") + b"FRAME\n" + payload)
    else:
        path.write_bytes(payload)
        Path(str(path) + ".spec").write_text(spec.to_sidecar())
    return spec


# -- synthetic patterns -------------------------------------------------------------

def pattern_values(kind: str, d, seed: int = 0, degree: int = 8, terms: int = 24) -> np.ndarray:
    """Analytic pattern value in [0.1, 0.9] for (..., 3) directions.

    ``smooth-harmonic`` sums zonal Legendre terms P_l(c . d) about random
    axes c with l <= ``degree``, so it is band-limited to that degree.
    """
    d = normalize(np.asarray(d, dtype=np.float64))
    rng = np.random.default_rng(seed)
    if kind == "smooth-harmonic":
        if degree == 0:
            return np.full(d.shape[:-1], 0.5)
        axes = normalize(rng.standard_normal((terms, 3)))
        orders = rng.integers(1, degree + 1, size=terms)
        orders[0] = degree
        amps = rng.uniform(-1.0, 1.0, size=terms)
        total = np.sum(np.abs(amps))
        acc = np.zeros(d.shape[:-1])
        for c, l, a in zip(axes, orders, amps):
            acc += a * eval_legendre(int(l), np.clip(d @ c, -1.0, 1.0))
        return 0.5 + 0.4 * acc / total
    lat, lon = xyz_to_latlon(d)
    if kind == "checker-sphere":
        cells = 4 + degree
        ci = np.floor((lat + np.pi / 2) / np.pi * cells).astype(int)
        cj = np.floor((lon + np.pi) / (2 * np.pi) * 2 * cells).astype(int)
        return np.where((ci + cj) % 2 == 0, 0.8, 0.2)
    if kind == "latlon-grid":
        spacing = np.deg2rad(15.0)
        width = np.deg2rad(1.5)
        near_par = np.abs((lat + spacing / 2) % spacing - spacing / 2) < width / 2
        # meridian distance measured along the parallel
        near_mer = np.abs((lon + spacing / 2) % spacing - spacing / 2) * np.cos(lat) < width / 2
        return np.where(near_par | near_mer, 0.9, 0.1)
    raise ValueError(f"unknown pattern kind {kind!r}; expected one of {', '.join(PATTERN_KINDS)}")


def gen_pattern(kind: str, grid: ProjectionGrid, seed: int = 0, degree: int = 8, color: str = "gray") -> PlanarImage:
    """Render an analytic sphere pattern into ``grid`` via unprojection.

    ``color="rgb"`` draws three independent channels (seeds ``seed``,
    ``seed + 1``, ``seed + 2``).
    """
    layout = get_layout(grid)
    labels = layout.pixel_labels
    iy, ix = np.nonzero(labels >= 0)
    d = layout.to_sphere(labels[iy, ix], ix + 0.5, iy + 0.5)
    n_ch = 1 if color == "gray" else 3
    data = np.full((grid.height, grid.width, n_ch), FILL_VALUE / 255.0)
    for ch in range(n_ch):
        data[iy, ix, ch] = pattern_values(kind, d, seed + ch, degree)
    mask = layout.mask
    return PlanarImage(data, color=color, mask=None if mask.all() else mask.copy())


# -- run configuration -----------------------------------------------------------------

def read_config(path) -> configparser.ConfigParser:
    """Parse a pipeline run-config (INI-style key=value with sections)."""
    cp = configparser.ConfigParser(interpolation=None)
    with open(path, encoding="utf-8") as fh:
        cp.read_file(fh)
    if not cp.has_section("pipeline"):
        raise ValueError(f"{path}: missing [pipeline] section")
    return cp
