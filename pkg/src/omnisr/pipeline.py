"""Round-trip super-resolution experiment and the format x scale matrix runner.

One round trip takes an HR ERP image, makes an LR version in a target
format, upscales it there and maps the result back to the HR ERP grid,
where it is scored against the original::

    SR_erp = T(fmt -> erp)( N( T(erp -> fmt)( LR_erp ) ) )
"""

from __future__ import annotations

import csv
import io
import math
import shlex
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from omnisr._validation import check_image, check_scale, infer_grid, same_kind
from omnisr.image import PlanarImage
from omnisr.metrics import erp_weights, format_db, psnr, ssim, ws_psnr, y_channel
from omnisr.projection import (
    ALL_FORMATS,
    FILL_VALUE,
    ProjectionFormat,
    ProjectionGrid,
    default_grid,
    get_layout,
)
from omnisr.resample import InterpKernel, convert
from omnisr.scaler import DEFAULT_TIMEOUT, ExternalUpscaler, downscale, resize, upscale

DOWNSCALE_FIRST = "downscale-then-project"
PROJECT_FIRST = "project-then-downscale"
LR_ORDERS = (DOWNSCALE_FIRST, PROJECT_FIRST)
ALL_SCALES = (2, 3, 4)
METRIC_NAMES = ("ws-psnr", "psnr", "ssim")
REPORT_COLUMNS = ("format", "scale", "WS-PSNR", "PSNR", "SSIM")


def make_upscaler(name, command=None, wire="auto", timeout=DEFAULT_TIMEOUT):
    """Builtin kernel for a kernel name, :class:`ExternalUpscaler` for ``external``."""
    if isinstance(name, (InterpKernel, ExternalUpscaler)):
        return name
    if str(name).strip().lower() == "external":
        if not command:
            raise ValueError("the external upscaler needs a command template")
        return ExternalUpscaler(command, wire=wire, timeout=float(timeout)).fit()
    return InterpKernel.parse(name)


def upscaler_label(up) -> str:
    if isinstance(up, ExternalUpscaler):
        return f"external({up.command})"
    return InterpKernel.parse(up).value


@dataclass(frozen=True)
class PipelineConfig:
    """Settings of one round trip.

    ``budget`` is the active-pixel count of the LR intermediate grid; None
    means HR pixel count // scale**2. ``kernel`` drives both conversions,
    ``downscale_kernel`` the LR generation.
    """

    format: ProjectionFormat = ProjectionFormat.EAC
    scale: int = 2
    kernel: InterpKernel = InterpKernel.BICUBIC
    upscaler: InterpKernel | ExternalUpscaler = InterpKernel.BICUBIC
    budget: int | None = None
    lr_order: str = DOWNSCALE_FIRST
    downscale_kernel: InterpKernel = InterpKernel.BICUBIC

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "format", ProjectionFormat.parse(self.format))
        set_(self, "scale", check_scale(self.scale))
        set_(self, "kernel", InterpKernel.parse(self.kernel))
        set_(self, "downscale_kernel", InterpKernel.parse(self.downscale_kernel))
        set_(self, "upscaler", make_upscaler(self.upscaler))
        if self.budget is not None:
            if int(self.budget) != self.budget or self.budget < 1:
                raise ValueError(f"budget must be a positive integer, got {self.budget!r}")
            set_(self, "budget", int(self.budget))
        order = str(self.lr_order).strip().lower()
        if order not in LR_ORDERS:
            raise ValueError(f"lr_order must be one of {', '.join(LR_ORDERS)}, got {self.lr_order!r}")
        set_(self, "lr_order", order)

    def replace(self, **changes) -> "PipelineConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class StagePlan:
    """Grids visited by a round trip."""

    hr: ProjectionGrid
    lr_erp: ProjectionGrid
    lr: ProjectionGrid
    sr: ProjectionGrid


def plan_grids(hr_grid: ProjectionGrid, cfg: PipelineConfig) -> StagePlan:
    f = cfg.scale
    if hr_grid.format is not ProjectionFormat.ERP:
        raise ValueError("the round trip starts from an ERP image")
    if hr_grid.width % f == 0 and hr_grid.height % f == 0:
        lr_erp = ProjectionGrid(ProjectionFormat.ERP, hr_grid.width // f, hr_grid.height // f)
    else:
        h = max(1, round(hr_grid.height / f))
        lr_erp = ProjectionGrid(ProjectionFormat.ERP, 2 * h, h)
    if cfg.format is ProjectionFormat.ERP and cfg.budget is None:
        lr = lr_erp
    else:
        budget = cfg.budget if cfg.budget is not None else hr_grid.n_pixels // (f * f)
        lr = default_grid(cfg.format, budget)
    return StagePlan(hr=hr_grid, lr_erp=lr_erp, lr=lr, sr=lr.scaled(f))


def _on_grid(img: PlanarImage, grid: ProjectionGrid) -> PlanarImage:
    """Attach the grid's active mask and gray-fill the inactive pixels."""
    mask = get_layout(grid).mask
    if mask.all():
        return PlanarImage(img.data, color=img.color, meta=img.meta)
    data = img.data.copy()
    data[~mask] = FILL_VALUE / 255.0
    return PlanarImage(data, color=img.color, mask=mask.copy(), meta=img.meta)


def stage_names(cfg: PipelineConfig) -> tuple[str, ...]:
    first = "lr_erp" if cfg.lr_order == DOWNSCALE_FIRST else "hr_fmt"
    return (first, "lr_fmt", "sr_fmt", "sr_erp")


def _stages(plan: StagePlan, cfg: PipelineConfig):
    """(name, grid, function) triples; each function maps the previous stage's image."""
    f = cfg.scale

    def lr_erp(img):
        if plan.lr_erp.width * f == plan.hr.width and plan.lr_erp.height * f == plan.hr.height:
            return downscale(img, f, cfg.downscale_kernel)
        return resize(img, plan.lr_erp.width, plan.lr_erp.height, cfg.downscale_kernel)

    def hr_fmt(img):
        return convert(img, plan.hr, plan.sr, cfg.kernel)

    def lr_fmt_from_erp(img):
        return convert(img, plan.lr_erp, plan.lr, cfg.kernel)

    def lr_fmt_from_hr(img):
        return _on_grid(downscale(img, f, cfg.downscale_kernel), plan.lr)

    def sr_fmt(img):
        return _on_grid(upscale(img, f, cfg.upscaler), plan.sr)

    def sr_erp(img):
        return convert(img, plan.sr, plan.hr, cfg.kernel)

    if cfg.lr_order == DOWNSCALE_FIRST:
        head = [("lr_erp", plan.lr_erp, lr_erp), ("lr_fmt", plan.lr, lr_fmt_from_erp)]
    else:
        head = [("hr_fmt", plan.sr, hr_fmt), ("lr_fmt", plan.lr, lr_fmt_from_hr)]
    return head + [("sr_fmt", plan.sr, sr_fmt), ("sr_erp", plan.hr, sr_erp)]


def score(sr_erp: PlanarImage, hr_erp: PlanarImage, grid: ProjectionGrid) -> dict:
    """WS-PSNR (analytic ERP weights), PSNR and SSIM on the Y channel."""
    a, b = y_channel(sr_erp), y_channel(hr_erp)
    return {
        "ws-psnr": ws_psnr(a, b, erp_weights(grid), channel="y"),
        "psnr": psnr(a, b, channel="y"),
        "ssim": ssim(a, b),
    }


def run_roundtrip(hr_erp, cfg: PipelineConfig, dump_dir=None, resume_from: str | None = None):
    """Run one round trip; returns ``(sr_erp, metrics)``.

    With ``dump_dir`` every intermediate is saved as ``<stage>.npy``
    (float64, so reloading is exact). ``resume_from`` names a dumped stage
    to start from instead of recomputing the stages before it; the result
    is bit-identical to an uninterrupted run. Stage names are given by
    :func:`stage_names`.
    """
    hr = check_image(hr_erp)
    plan = plan_grids(infer_grid(hr, ProjectionFormat.ERP), cfg)
    stages = _stages(plan, cfg)
    names = [s[0] for s in stages]
    dump = Path(dump_dir) if dump_dir is not None else None
    start = 0
    cur = hr
    if resume_from is not None:
        if resume_from not in names:
            raise ValueError(f"unknown stage {resume_from!r}; this run has {', '.join(names)}")
        if dump is None:
            raise ValueError("resuming needs the dump directory")
        idx = names.index(resume_from)
        cur = load_stage(dump, resume_from, stages[idx][1], hr.color)
        start = idx + 1
    if dump is not None:
        dump.mkdir(parents=True, exist_ok=True)
    for name, grid, fn in stages[start:]:
        cur = fn(cur)
        if dump is not None:
            np.save(dump / f"{name}.npy", cur.data)
    return cur, score(cur, hr, plan.hr)


def load_stage(dump_dir, name: str, grid: ProjectionGrid, color: str) -> PlanarImage:
    data = np.load(Path(dump_dir) / f"{name}.npy")
    if data.shape[:2] != grid.shape:
        raise ValueError(f"dumped stage {name} is {data.shape[1]}x{data.shape[0]}, expected {grid.width}x{grid.height}")
    return _on_grid(PlanarImage(data, color=color), grid)


# -- matrix --------------------------------------------------------------------------

@dataclass(frozen=True)
class ReportRow:
    format: ProjectionFormat
    scale: int
    ws_psnr: float = math.nan
    psnr: float = math.nan
    ssim: float = math.nan
    n_images: int = 0
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class PipelineReport:
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def row(self, fmt, scale) -> ReportRow:
        fmt = ProjectionFormat.parse(fmt)
        for r in self.rows:
            if r.format is fmt and r.scale == scale:
                return r
        raise KeyError(f"no row for {fmt.name} x{scale}")

    @property
    def failures(self) -> list:
        return [r for r in self.rows if not r.ok]


def _cell(inputs, cfg, dump_root):
    vals = {k: [] for k in METRIC_NAMES}
    for i, img in enumerate(inputs):
        dump = None
        if dump_root is not None:
            dump = Path(dump_root) / f"{cfg.format.value}_x{cfg.scale}" / f"img{i:03d}"
        _, metrics = run_roundtrip(img, cfg, dump_dir=dump)
        for k in METRIC_NAMES:
            vals[k].append(metrics[k].value)
    # arithmetic mean of dB values; a single inf makes the mean inf
    return ReportRow(
        cfg.format,
        cfg.scale,
        ws_psnr=float(np.mean(vals["ws-psnr"])),
        psnr=float(np.mean(vals["psnr"])),
        ssim=float(np.mean(vals["ssim"])),
        n_images=len(inputs),
    )


def run_matrix(
    hr_inputs,
    formats=None,
    scales=None,
    defaults: PipelineConfig | None = None,
    jobs: int = 1,
    overrides: dict | None = None,
    dump_dir=None,
    seeds=None,
) -> PipelineReport:
    """Round trips for every (format, scale) cell, averaged over the inputs.

    ``overrides`` maps ``(format, scale)`` to PipelineConfig field changes
    for that cell. A cell that raises is reported with its error and the
    remaining cells are unaffected. ``seeds`` is only recorded in the
    metadata. Up to ``jobs`` cells run concurrently.
    """
    inputs = [check_image(x) for x in hr_inputs]
    if not inputs:
        raise ValueError("run_matrix needs at least one input image")
    defaults = defaults or PipelineConfig()
    fmts = ALL_FORMATS if formats is None else sorted({ProjectionFormat.parse(f) for f in formats}, key=ALL_FORMATS.index)
    scs = ALL_SCALES if scales is None else sorted({check_scale(s) for s in scales})
    overrides = {(ProjectionFormat.parse(k[0]), int(k[1])): v for k, v in (overrides or {}).items()}

    cells = []
    for fmt in fmts:
        for s in scs:
            cells.append((fmt, s, overrides.get((fmt, s), {})))

    def work(cell):
        fmt, s, extra = cell
        try:
            cfg = defaults.replace(format=fmt, scale=s, **extra)
            return _cell(inputs, cfg, dump_dir)
        except Exception as exc:  # noqa: BLE001 - isolate the cell
            return ReportRow(fmt, s, n_images=len(inputs), error=f"{type(exc).__name__}: {exc}")

    jobs = max(1, int(jobs))
    if jobs == 1:
        rows = [work(c) for c in cells]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(work, cells))

    report = PipelineReport(rows=rows, metadata=_metadata(defaults, inputs, seeds, overrides))
    for r in report.failures:
        report.metadata[f"error.{r.format.name}.x{r.scale}"] = r.error
    return report


def _metadata(cfg: PipelineConfig, inputs, seeds, overrides) -> dict:
    from omnisr import __version__

    meta = {
        "tool": f"omnisr {__version__}",
        "conversion_kernel": cfg.kernel.value,
        "downscale_kernel": cfg.downscale_kernel.value,
        "upscaler": upscaler_label(cfg.upscaler),
        "lr_order": cfg.lr_order,
        "budget": "hr_pixels // scale^2" if cfg.budget is None else str(cfg.budget),
        "metric_channel": "y (the source tables leave Y vs RGB unstated)",
        "ws_psnr_weights": "erp analytic cos(latitude)",
        "averaging": "arithmetic mean of per-image dB values",
        "images": str(len(inputs)),
        "input_sizes": " ".join(f"{im.width}x{im.height}" for im in inputs),
        "seeds": "n/a" if seeds is None else " ".join(str(s) for s in seeds),
    }
    for (fmt, s), extra in sorted(overrides.items(), key=lambda kv: (ALL_FORMATS.index(kv[0][0]), kv[0][1])):
        text = ", ".join(f"{k}={upscaler_label(v) if k == 'upscaler' else v}" for k, v in sorted(extra.items()))
        meta[f"override.{fmt.name}.x{s}"] = text
    return meta


def _cells(row: ReportRow) -> list[str]:
    if not row.ok:
        return [row.format.name, f"x{row.scale}", "error", "error", "error"]
    return [
        row.format.name,
        f"x{row.scale}",
        format_db(row.ws_psnr),
        format_db(row.psnr),
        format_db(row.ssim),
    ]


def render_report(report: PipelineReport, style: str = "csv") -> str:
    """Table text with columns format, scale, WS-PSNR, PSNR, SSIM (3 decimals)."""
    style = style.strip().lower()
    rows = [_cells(r) for r in report.rows]
    if style == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        writer.writerows(rows)
        return buf.getvalue()
    if style in ("markdown", "md"):
        lines = ["| " + " | ".join(REPORT_COLUMNS) + " |", "|" + "---|" * len(REPORT_COLUMNS)]
        lines += ["| " + " | ".join(r) + " |" for r in rows]
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report style {style!r}; expected csv or markdown")


def render_metadata(report: PipelineReport) -> str:
    return "".join(f"{k} = {v}\n" for k, v in report.metadata.items())


# -- run-config files ---------------------------------------------------------------

@dataclass
class RunConfig:
    """Matrix run described by a config file."""

    defaults: PipelineConfig
    formats: tuple
    scales: tuple
    overrides: dict
    inputs: list
    jobs: int = 1
    report: str | None = None
    style: str = "csv"
    dump: str | None = None


def _upscaler_from(section, fallback=None):
    name = section.get("upscaler")
    if name is None:
        return fallback
    return make_upscaler(
        name,
        command=section.get("command"),
        wire=section.get("wire", "auto"),
        timeout=section.get("timeout", str(DEFAULT_TIMEOUT)),
    )


def _config_fields(section) -> dict:
    out = {}
    for key in ("kernel", "lr_order", "downscale_kernel"):
        if key in section:
            out[key] = section[key].strip()
    if "budget" in section:
        out["budget"] = int(section["budget"])
    up = _upscaler_from(section)
    if up is not None:
        out["upscaler"] = up
    return out


def load_run_config(path) -> RunConfig:
    """Read a matrix run-config file.

    The ``[pipeline]`` section holds the defaults and run options; sections
    named ``[cell FMT xS]`` override fields for a single cell. Relative
    paths are resolved against the file's directory.
    """
    from omnisr.imageio import read_config

    cp = read_config(path)
    base = Path(path).resolve().parent
    sec = cp["pipeline"]
    defaults = PipelineConfig(**_config_fields(sec))
    formats = tuple(ProjectionFormat.parse(f) for f in sec.get("formats", " ".join(f.value for f in ALL_FORMATS)).split())
    scales = tuple(check_scale(int(s.lstrip("xX"))) for s in sec.get("scales", "2 3 4").split())
    overrides = {}
    for name in cp.sections():
        parts = name.split()
        if parts[0] != "cell":
            continue
        if len(parts) != 3:
            raise ValueError(f"cell section must be named 'cell FMT xS', got [{name}]")
        key = (ProjectionFormat.parse(parts[1]), check_scale(int(parts[2].lstrip("xX"))))
        overrides[key] = _config_fields(cp[name])

    def resolve(p):
        return str(p if Path(p).is_absolute() else base / p)

    inputs = [resolve(p) for p in shlex.split(sec.get("inputs", ""))]
    return RunConfig(
        defaults=defaults,
        formats=formats,
        scales=scales,
        overrides=overrides,
        inputs=inputs,
        jobs=int(sec.get("jobs", "1")),
        report=resolve(sec["report"]) if "report" in sec else None,
        style=sec.get("style", "csv"),
        dump=resolve(sec["dump"]) if "dump" in sec else None,
    )


# -- estimator ------------------------------------------------------------------------

class RoundTripSR(BaseEstimator):
    """Estimator form of the round trip.

    ``predict`` takes an HR ERP image, degrades it to LR in ``format``,
    super-resolves it there and returns the SR image on the HR ERP grid.
    ``score`` is the Y-channel WS-PSNR of that prediction against the input.
    """

    def __init__(self, format="eac", scale=2, kernel="bicubic", upscaler="bicubic", budget=None,
                 lr_order=DOWNSCALE_FIRST):
        self.format = format
        self.scale = scale
        self.kernel = kernel
        self.upscaler = upscaler
        self.budget = budget
        self.lr_order = lr_order

    def _config(self) -> PipelineConfig:
        return PipelineConfig(
            format=self.format,
            scale=self.scale,
            kernel=self.kernel,
            upscaler=self.upscaler,
            budget=self.budget,
            lr_order=self.lr_order,
        )

    def fit(self, X, y=None):
        img = check_image(X)
        self.config_ = self._config()
        self.plan_ = plan_grids(infer_grid(img, ProjectionFormat.ERP), self.config_)
        return self

    def _check_input(self, X):
        check_is_fitted(self, "plan_")
        img = check_image(X)
        if (img.height, img.width) != self.plan_.hr.shape:
            raise ValueError(
                f"fitted for {self.plan_.hr.width}x{self.plan_.hr.height} ERP, got {img.width}x{img.height}"
            )
        return img

    def predict(self, X):
        img = self._check_input(X)
        sr, _ = run_roundtrip(img, self.config_)
        return same_kind(X, sr)

    def score(self, X, y=None) -> float:
        img = self._check_input(X)
        _, metrics = run_roundtrip(img, self.config_)
        return metrics["ws-psnr"].value
