"""Downscaling (LR generation) and upscaling, including external SR processes.

Output pixel ``o`` of a resize by factor ``f`` is centered at input index
``(o + 0.5) / f - 0.5`` (upscaling) or ``(o + 0.5) * f - 0.5`` (downscaling).
"""

from __future__ import annotations

import logging
import shlex
import subprocess
import tempfile
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from omnisr._validation import check_image, check_scale, same_kind
from omnisr.image import PlanarImage
from omnisr.resample import InterpKernel, kernel_fn

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 300.0
PLACEHOLDERS = ("{in}", "{out}", "{scale}")


class ExternalUpscalerError(RuntimeError):
    """The external SR command failed or produced an unusable image."""


def _reflect(idx: np.ndarray, n: int) -> np.ndarray:
    period = 2 * n
    idx = np.mod(idx, period)
    return np.where(idx >= n, period - 1 - idx, idx)


def resize_matrix(n_in: int, n_out: int, kernel, factor: float, antialias: bool) -> np.ndarray:
    """Dense (n_out, n_in) resampling matrix along one axis.

    ``factor`` is n_out / n_in for upscaling and n_in / n_out for downscaling.
    With ``antialias`` the kernel footprint is stretched by ``factor``.
    """
    kernel = InterpKernel.parse(kernel)
    o = np.arange(n_out, dtype=np.float64)
    centers = (o + 0.5) * factor if antialias else (o + 0.5) / factor
    mat = np.zeros((n_out, n_in))
    if kernel is InterpKernel.NEAREST:
        src = np.clip(np.floor(centers).astype(np.int64), 0, n_in - 1)
        mat[np.arange(n_out), src] = 1.0
        return mat
    stretch = factor if antialias else 1.0
    reach = int(np.ceil(kernel.radius * stretch)) + 1
    offs = np.arange(-reach, reach + 1)
    taps = np.floor(centers - 0.5).astype(np.int64)[:, None] + offs
    w = kernel_fn(kernel)((taps + 0.5 - centers[:, None]) / stretch)
    w /= w.sum(axis=1, keepdims=True)
    cols = _reflect(taps, n_in) if antialias else np.clip(taps, 0, n_in - 1)
    np.add.at(mat, (np.repeat(np.arange(n_out), taps.shape[1]), cols.ravel()), w.ravel())
    return mat


def _apply(data: np.ndarray, my: np.ndarray, mx: np.ndarray, kernel=None) -> np.ndarray:
    if kernel is InterpKernel.NEAREST:
        return data[np.argmax(my, axis=1)][:, np.argmax(mx, axis=1)]
    # filter offsets from one sample so that constant images stay exact
    ref = data[:1, :1, :]
    tmp = np.einsum("ow,hwc->hoc", mx, data - ref, optimize=True)
    return np.einsum("oh,hwc->owc", my, tmp, optimize=True) + ref


def downscale(img, f: int, kernel="bicubic") -> PlanarImage:
    """Anti-aliased downscale by an integer factor.

    Sizes not divisible by ``f`` are reflect-padded up to the next multiple;
    ``meta["true_size"]`` keeps the (width, height) before padding.
    """
    img = check_image(img)
    f = check_scale(f)
    kernel = InterpKernel.parse(kernel)
    meta = dict(img.meta)
    if f == 1:
        return PlanarImage(img.data.copy(), color=img.color, mask=img.mask, meta=meta)
    data = img.data
    h, w = data.shape[:2]
    ph, pw = (-h) % f, (-w) % f
    if ph or pw:
        data = np.pad(data, ((0, ph), (0, pw), (0, 0)), mode="symmetric")
        meta.setdefault("true_size", (w, h))
    hp, wp = data.shape[:2]
    my = resize_matrix(hp, hp // f, kernel, f, antialias=True)
    mx = resize_matrix(wp, wp // f, kernel, f, antialias=True)
    out = _apply(data, my, mx, kernel)
    np.clip(out, 0.0, 1.0, out=out)
    return PlanarImage(out, color=img.color, meta=meta)


def resize(img, width: int, height: int, kernel="bicubic") -> PlanarImage:
    """Anti-aliased resize to an arbitrary smaller or equal size.

    The per-axis factor is input size / output size, so it need not be an
    integer. Used where the LR raster of a non-divisible image is wanted
    without padding.
    """
    img = check_image(img)
    kernel = InterpKernel.parse(kernel)
    if not (0 < width <= img.width and 0 < height <= img.height):
        raise ValueError(f"cannot shrink {img.width}x{img.height} to {width}x{height}")
    my = resize_matrix(img.height, height, kernel, img.height / height, antialias=True)
    mx = resize_matrix(img.width, width, kernel, img.width / width, antialias=True)
    out = _apply(img.data, my, mx, kernel)
    np.clip(out, 0.0, 1.0, out=out)
    return PlanarImage(out, color=img.color, meta=dict(img.meta))


def upscale(img, f: int, up=None) -> PlanarImage:
    """Upscale by ``f`` with a builtin kernel name or an :class:`ExternalUpscaler`."""
    img = check_image(img)
    f = check_scale(f)
    if up is None:
        up = InterpKernel.BICUBIC
    if isinstance(up, ExternalUpscaler):
        return up.run(img, f)
    kernel = InterpKernel.parse(up)
    if f == 1:
        return PlanarImage(img.data.copy(), color=img.color, meta=dict(img.meta))
    h, w = img.height, img.width
    my = resize_matrix(h, h * f, kernel, f, antialias=False)
    mx = resize_matrix(w, w * f, kernel, f, antialias=False)
    out = _apply(img.data, my, mx, kernel)
    np.clip(out, 0.0, 1.0, out=out)
    return PlanarImage(out, color=img.color, meta=dict(img.meta))


class Downscaler(TransformerMixin, BaseEstimator):
    """Stateless transformer around :func:`downscale`."""

    def __init__(self, scale=2, kernel="bicubic"):
        self.scale = scale
        self.kernel = kernel

    def fit(self, X=None, y=None):
        check_scale(self.scale)
        InterpKernel.parse(self.kernel)
        return self

    def transform(self, X):
        return same_kind(X, downscale(check_image(X), self.scale, self.kernel))

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.requires_fit = False
        return tags


class BuiltinUpscaler(TransformerMixin, BaseEstimator):
    """Interpolating stand-in for a trained SR network."""

    def __init__(self, scale=2, kernel="bicubic"):
        self.scale = scale
        self.kernel = kernel

    def fit(self, X=None, y=None):
        check_scale(self.scale)
        InterpKernel.parse(self.kernel)
        return self

    def transform(self, X):
        return same_kind(X, upscale(check_image(X), self.scale, self.kernel))

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.requires_fit = False
        return tags


class ExternalUpscaler(TransformerMixin, BaseEstimator):
    """Hands images to an external SR process.

    ``command`` is a template containing ``{in}``, ``{out}`` and ``{scale}``.
    The input is written as 8-bit PNG (``wire="png"``) or Y4M
    (``wire="y4m"``, YUV images); the process must exit 0 and leave the
    upscaled image at ``{out}``. stderr is captured into the log.

    Parameters
    ----------
    command : str
    scale : int
    wire : {"auto", "png", "y4m"}
        ``auto`` picks Y4M for YUV images and PNG otherwise.
    timeout : float
        Seconds before the process is killed.
    workdir : str, optional
        Parent directory for the per-call temporary directory.
    """

    def __init__(self, command, scale=2, wire="auto", timeout=DEFAULT_TIMEOUT, workdir=None):
        self.command = command
        self.scale = scale
        self.wire = wire
        self.timeout = timeout
        self.workdir = workdir

    def fit(self, X=None, y=None):
        missing = [p for p in PLACEHOLDERS if p not in self.command]
        if missing:
            raise ValueError(f"command template lacks placeholder(s) {', '.join(missing)}")
        if self.wire not in ("auto", "png", "y4m"):
            raise ValueError(f"unknown wire format {self.wire!r}")
        check_scale(self.scale)
        return self

    def transform(self, X):
        return same_kind(X, self.run(check_image(X), self.scale))

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.requires_fit = False
        return tags

    def _wire_for(self, img: PlanarImage) -> str:
        if self.wire != "auto":
            return self.wire
        return "y4m" if img.color == "yuv" else "png"

    def run(self, img: PlanarImage, f: int) -> PlanarImage:
        from omnisr import imageio

        self.fit()
        f = check_scale(f)
        wire = self._wire_for(img)
        if wire == "y4m" and img.color != "yuv":
            raise ValueError("y4m wire format carries YUV images only")
        with tempfile.TemporaryDirectory(prefix="omnisr-sr-", dir=self.workdir) as tmp:
            src = Path(tmp) / f"input.{wire}"
            dst = Path(tmp) / f"output.{wire}"
            imageio.write_image(img, src)
            argv = [
                part.replace("{in}", str(src)).replace("{out}", str(dst)).replace("{scale}", str(f))
                for part in shlex.split(self.command)
            ]
            try:
                proc = subprocess.run(argv, capture_output=True, text=True, timeout=self.timeout)
            except subprocess.TimeoutExpired as exc:
                raise ExternalUpscalerError(f"external upscaler timed out after {self.timeout} s") from exc
            except OSError as exc:
                raise ExternalUpscalerError(f"cannot start external upscaler: {exc}") from exc
            if proc.stderr:
                log.info("external upscaler stderr:\n%s", proc.stderr.rstrip())
            if proc.returncode != 0:
                raise ExternalUpscalerError(
                    f"external upscaler exited with status {proc.returncode}: {proc.stderr.strip()[-500:]}"
                )
            if not dst.exists():
                raise ExternalUpscalerError("external upscaler did not write its output file")
            try:
                out, _ = imageio.read_image(dst)
            except (ValueError, OSError) as exc:
                raise ExternalUpscalerError(f"unreadable upscaler output: {exc}") from exc
        want = (img.width * f, img.height * f)
        if (out.width, out.height) != want:
            raise ExternalUpscalerError(
                f"upscaler output is {out.width}x{out.height}, expected {want[0]}x{want[1]}"
            )
        if out.color != img.color:
            out = PlanarImage(out.data, color=img.color) if out.channels == img.channels else out
        out.meta = dict(img.meta)
        return out
