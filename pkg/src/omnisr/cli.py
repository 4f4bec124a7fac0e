"""Command-line interface: ``omnisr {convert,metric,pipeline,analyze,gen}``.

Exit status: 0 success, 1 usage error, 2 I/O error, 3 computation error.
Results go to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from omnisr import __version__
from omnisr.projection import ALL_FORMATS, ProjectionFormat, default_grid, get_layout
from omnisr.resample import InterpKernel

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_COMPUTE = 0, 1, 2, 3

FORMAT_NAMES = [f.value for f in ALL_FORMATS]
SCALE_NAMES = ["2", "3", "4"]
KERNEL_NAMES = [k.value for k in InterpKernel]

log = logging.getLogger("omnisr")


class UsageError(Exception):
    pass


class IOFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _read(path):
    from omnisr.imageio import read_image

    try:
        img, _ = read_image(path)
    except (OSError, ValueError) as exc:
        raise IOFailure(f"cannot read {path}: {exc}") from exc
    return img


def _write(img, path):
    from omnisr.imageio import write_image

    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        write_image(img, path)
    except (OSError, ValueError) as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc


def _write_text(text, path):
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc


def _grid_of(img, fmt):
    from omnisr._validation import infer_grid

    try:
        return infer_grid(img, fmt)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _with_mask(img, grid):
    mask = get_layout(grid).mask
    if not mask.all():
        img.mask = mask.copy()
    return img


def _grid_from_args(args):
    from omnisr.projection import ProjectionGrid

    if args.width or args.height:
        if not (args.width and args.height):
            raise UsageError("--width and --height go together")
        return ProjectionGrid(ProjectionFormat.parse(args.format), args.width, args.height)
    return default_grid(args.format, args.budget)


def _dims(grid) -> str:
    return f"{grid.format.name} {grid.width}x{grid.height}"


# -- subcommands ------------------------------------------------------------------

def cmd_convert(args) -> int:
    from omnisr.resample import convert

    img = _read(args.input)
    src = _grid_of(img, args.src)
    budget = args.budget if args.budget is not None else int(get_layout(src).mask.sum())
    dst = default_grid(args.dst, budget)
    out = convert(_with_mask(img, src), src, dst, args.kernel)
    _write(out, args.output)
    print(f"source {_dims(src)}")
    print(f"target {_dims(dst)} ({int(get_layout(dst).mask.sum())} active pixels)")
    print(f"wrote {args.output}")
    return EXIT_OK


def cmd_metric(args) -> int:
    from omnisr import metrics

    a, b = _read(args.a), _read(args.b)
    if (a.width, a.height) != (b.width, b.height):
        raise UsageError(f"image sizes differ: {a.width}x{a.height} vs {b.width}x{b.height}")
    if a.color != b.color:
        raise UsageError(f"color models differ: {a.color} vs {b.color}")
    grid = _grid_of(a, args.format)
    a, b = _with_mask(a, grid), _with_mask(b, grid)
    if args.channel == "y":
        planes = [("y", metrics.y_channel(a), metrics.y_channel(b))]
    else:
        planes = [(n, pa, pb) for (n, pa), (_, pb) in zip(metrics.split_channels(a), metrics.split_channels(b))]
    weights = metrics.metric_weights(grid) if args.metric == "ws-psnr" else None
    for name, pa, pb in planes:
        if args.metric == "psnr":
            res = metrics.psnr(pa, pb, channel=name)
        elif args.metric == "ws-psnr":
            res = metrics.ws_psnr(pa, pb, weights, channel=name)
        else:
            res = metrics.MetricResult("ssim", metrics.ssim(pa, pb).value, name)
        print(f"{res.metric} {res.channel} {res.format_value(4)}")
    return EXIT_OK


def _pipeline_setup(args):
    from omnisr.pipeline import PipelineConfig, RunConfig, load_run_config, make_upscaler

    if args.config:
        try:
            rc = load_run_config(args.config)
        except OSError as exc:
            raise IOFailure(f"cannot read {args.config}: {exc}") from exc
        if args.inputs:
            rc.inputs = list(args.inputs)
        if args.jobs is not None:
            rc.jobs = args.jobs
        if args.report:
            rc.report = args.report
        if args.dump:
            rc.dump = args.dump
        return rc
    up = make_upscaler(args.upscaler, command=args.command, wire=args.wire, timeout=args.timeout)
    defaults = PipelineConfig(kernel=args.kernel, upscaler=up, budget=args.budget, lr_order=args.lr_order)
    return RunConfig(
        defaults=defaults,
        formats=tuple(args.formats or FORMAT_NAMES),
        scales=tuple(int(s) for s in (args.scales or SCALE_NAMES)),
        overrides={},
        inputs=list(args.inputs),
        jobs=args.jobs or 1,
        report=args.report,
        style=args.style or "csv",
        dump=args.dump,
    )


def cmd_pipeline(args) -> int:
    from omnisr.pipeline import render_metadata, render_report, run_matrix

    try:
        rc = _pipeline_setup(args)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if not rc.inputs:
        raise UsageError("no input images (pass them as arguments or list them under inputs=)")
    images = [_read(p) for p in rc.inputs]
    style = args.style or rc.style
    report = run_matrix(images, rc.formats, rc.scales, rc.defaults, jobs=rc.jobs, overrides=rc.overrides,
                        dump_dir=rc.dump)
    text = render_report(report, style)
    for row in report.failures:
        print(f"cell {row.format.name} x{row.scale} failed: {row.error}", file=sys.stderr)
    if rc.report:
        _write_text(text, rc.report)
        meta_path = str(rc.report) + ".meta"
        _write_text(render_metadata(report), meta_path)
        print(f"report written to {rc.report}")
        print(f"metadata written to {meta_path}")
    else:
        sys.stdout.write(text)
    if rc.dump:
        print(f"intermediates dumped under {rc.dump}")
    if len(report.failures) == len(report.rows):
        return EXIT_COMPUTE
    return EXIT_OK


def cmd_analyze(args) -> int:
    from omnisr.analysis import density_map, distortion_stats, render_stats
    from omnisr.image import PlanarImage

    grid = _grid_from_args(args)
    dm = density_map(grid)
    stats = distortion_stats(grid)
    heat = args.heatmap or f"density_{grid.format.value}.png"
    _write(PlanarImage.from_uint8(dm.heatmap, color="gray"), heat)
    table = render_stats([(grid, stats)], args.style)
    if args.stats:
        _write_text(table, args.stats)
        print(f"stats written to {args.stats}")
    sys.stdout.write(table)
    print(f"heatmap written to {heat} (per-image min/max normalized density)")
    return EXIT_OK


def cmd_gen(args) -> int:
    from omnisr.imageio import gen_pattern, rgb_to_yuv

    grid = _grid_from_args(args)
    color = "rgb" if args.color in ("rgb", "yuv") else "gray"
    img = gen_pattern(args.kind, grid, seed=args.seed, degree=args.degree, color=color)
    if args.color == "yuv":
        img = rgb_to_yuv(img)
    _write(img, args.out)
    print(f"wrote {args.out} ({_dims(grid)})")
    return EXIT_OK


# -- parser ------------------------------------------------------------------------

def _fmt(value):
    try:
        return ProjectionFormat.parse(value).value
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _grid_args(p):
    p.add_argument("--format", type=_fmt, default="erp", metavar="FMT", help="projection format (default erp)")
    p.add_argument("--budget", type=int, default=2 * 256 * 128, metavar="N",
                   help="active-pixel budget used to pick the grid (default 65536)")
    p.add_argument("--width", type=int, help="explicit raster width (with --height)")
    p.add_argument("--height", type=int, help="explicit raster height (with --width)")


def build_parser() -> argparse.ArgumentParser:
    epilog = (
        f"formats: {', '.join(FORMAT_NAMES)}\n"
        f"scale factors: {', '.join('x' + s for s in SCALE_NAMES)}\n"
        "exit status: 0 success, 1 usage error, 2 I/O error, 3 computation error"
    )
    parser = _Parser(
        prog="omnisr",
        description="Projection conversion, spherical quality metrics and round-trip SR experiments "
        "for 360-degree images.",
        epilog=epilog,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"omnisr {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log diagnostics to stderr")
    sub = parser.add_subparsers(dest="command_name", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("convert", help="convert an image between projection formats", epilog=epilog,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--from", dest="src", type=_fmt, required=True, metavar="FMT")
    p.add_argument("--to", dest="dst", type=_fmt, required=True, metavar="FMT")
    p.add_argument("--budget", type=int, metavar="N", help="target active pixels (default: source active pixels)")
    p.add_argument("--kernel", choices=KERNEL_NAMES, default="bicubic")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("metric", help="compare two images", epilog=epilog,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--metric", choices=["psnr", "ws-psnr", "ssim"], default="ws-psnr")
    p.add_argument("--format", type=_fmt, default="erp", metavar="FMT",
                   help="projection of both images; ws-psnr uses analytic weights for erp, solid angles otherwise")
    p.add_argument("--channel", choices=["y", "all"], default="y")
    p.set_defaults(func=cmd_metric)

    p = sub.add_parser("pipeline", help="run the round-trip SR matrix", epilog=epilog,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("inputs", nargs="*", help="HR ERP images")
    p.add_argument("--config", metavar="FILE", help="run-config file ([pipeline] section plus per-cell overrides)")
    p.add_argument("--formats", nargs="+", type=_fmt, metavar="FMT")
    p.add_argument("--scales", nargs="+", choices=["1"] + SCALE_NAMES,
                   help="scale factors (default 2 3 4); 1 is an identity test mode")
    p.add_argument("--kernel", choices=KERNEL_NAMES, default="bicubic", help="conversion kernel")
    p.add_argument("--upscaler", default="bicubic", help=f"one of {', '.join(KERNEL_NAMES)} or external")
    p.add_argument("--command", help="external upscaler template with {in}, {out} and {scale}")
    p.add_argument("--wire", choices=["auto", "png", "y4m"], default="auto")
    p.add_argument("--timeout", type=float, default=300.0)
    p.add_argument("--lr-order", choices=["downscale-then-project", "project-then-downscale"],
                   default="downscale-then-project")
    p.add_argument("--budget", type=int, metavar="N", help="LR intermediate active pixels (default HR/scale^2)")
    p.add_argument("--jobs", type=int, metavar="N", help="concurrent matrix cells")
    p.add_argument("--report", metavar="PATH", help="report file (default: stdout)")
    p.add_argument("--style", choices=["csv", "markdown"], help="report style (default csv)")
    p.add_argument("--dump", metavar="DIR", help="save every intermediate stage here")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("analyze", help="sampling-density heatmap and statistics", epilog=epilog,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    _grid_args(p)
    p.add_argument("--heatmap", metavar="PATH", help="heatmap PNG (default density_<fmt>.png)")
    p.add_argument("--stats", metavar="PATH", help="also write the statistics table here")
    p.add_argument("--style", choices=["csv", "markdown"], default="csv")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("gen", help="render a synthetic sphere pattern", epilog=epilog,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--kind", choices=["smooth-harmonic", "checker-sphere", "latlon-grid"], default="smooth-harmonic")
    _grid_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--degree", type=int, default=8, help="harmonic degree / checker refinement")
    p.add_argument("--color", choices=["gray", "rgb", "yuv"], default="gray")
    p.add_argument("--out", required=True, metavar="PATH")
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"omnisr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IOFailure as exc:
        print(f"omnisr: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:  # noqa: BLE001 - stable exit contract
        log.debug("failure", exc_info=True)
        print(f"omnisr: computation failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
