import math
import sys

import numpy as np
import pytest
from sklearn.base import clone

from omnisr.image import PlanarImage
from omnisr.imageio import gen_pattern
from omnisr.metrics import erp_weights, ws_psnr
from omnisr.pipeline import (
    PROJECT_FIRST,
    PipelineConfig,
    PipelineReport,
    ReportRow,
    RoundTripSR,
    load_run_config,
    plan_grids,
    render_metadata,
    render_report,
    run_matrix,
    run_roundtrip,
    stage_names,
)
from omnisr.projection import ProjectionFormat, ProjectionGrid, get_layout
from omnisr.scaler import ExternalUpscaler, downscale, upscale

PY = sys.executable
COPY = f'{PY} -c "import shutil, sys; shutil.copy(sys.argv[1], sys.argv[2])" {{in}} {{out}} {{scale}}'
FAIL = f'{PY} -c "import sys; sys.exit(3)" {{in}} {{out}} {{scale}}'

HR = ProjectionGrid("erp", 128, 64)


def hr_image(seed=0, grid=HR, degree=16):
    return gen_pattern("smooth-harmonic", grid, seed=seed, degree=degree)


def test_config_normalizes():
    cfg = PipelineConfig(format="CMP", scale=3, kernel="Bilinear", lr_order=PROJECT_FIRST.upper())
    assert cfg.format is ProjectionFormat.CMP and cfg.kernel.value == "bilinear"
    assert cfg.lr_order == PROJECT_FIRST
    with pytest.raises(ValueError):
        PipelineConfig(scale=5)
    with pytest.raises(ValueError):
        PipelineConfig(lr_order="sideways")
    with pytest.raises(ValueError):
        PipelineConfig(budget=0)
    with pytest.raises(ValueError):
        PipelineConfig(upscaler="external")


@pytest.mark.parametrize("fmt", ["cmp", "eac", "isp", "ohp", "tsp", "ssp"])
def test_plan_budget(fmt):
    plan = plan_grids(HR, PipelineConfig(format=fmt, scale=2))
    active = int(get_layout(plan.lr).mask.sum())
    assert abs(active - HR.n_pixels // 4) <= 0.1 * HR.n_pixels // 4
    assert plan.sr.width == 2 * plan.lr.width and plan.sr.height == 2 * plan.lr.height


def test_erp_format_equals_scaler_baseline():
    hr = hr_image()
    sr, metrics = run_roundtrip(hr, PipelineConfig(format="erp", scale=2))
    base = upscale(downscale(hr, 2), 2)
    assert np.array_equal(sr.data, base.data)
    assert metrics["ws-psnr"].value == ws_psnr(
        PlanarImage(base.data[..., :1]), PlanarImage(hr.data[..., :1]), erp_weights(HR)
    ).value


def test_scale_one_external_identity_is_lossless():
    hr = PlanarImage.from_uint8(hr_image().to_uint8())
    cfg = PipelineConfig(format="erp", scale=1, upscaler=ExternalUpscaler(COPY))
    sr, metrics = run_roundtrip(hr, cfg)
    assert np.array_equal(sr.data, hr.data)
    assert math.isinf(metrics["ws-psnr"].value) and math.isinf(metrics["psnr"].value)
    assert metrics["ssim"].value == 1.0


@pytest.mark.parametrize("order", ["downscale-then-project", PROJECT_FIRST])
def test_dump_and_resume_are_exact(tmp_path, order):
    hr = hr_image(1)
    cfg = PipelineConfig(format="isp", scale=2, lr_order=order)
    full, m = run_roundtrip(hr, cfg, dump_dir=tmp_path)
    names = stage_names(cfg)
    assert sorted(p.stem for p in tmp_path.glob("*.npy")) == sorted(names)
    assert np.array_equal(np.load(tmp_path / "sr_erp.npy"), full.data)
    for stage in names[:-1]:
        again, m2 = run_roundtrip(hr, cfg, dump_dir=tmp_path, resume_from=stage)
        assert np.array_equal(again.data, full.data)
        assert m2["ws-psnr"].value == m["ws-psnr"].value
    with pytest.raises(ValueError):
        run_roundtrip(hr, cfg, resume_from=names[0])
    with pytest.raises(ValueError):
        run_roundtrip(hr, cfg, dump_dir=tmp_path, resume_from="nope")


def test_non_divisible_size():
    grid = ProjectionGrid("erp", 256, 128)
    hr = hr_image(grid=grid)
    for fmt in ("erp", "eac"):
        sr, m = run_roundtrip(hr, PipelineConfig(format=fmt, scale=3))
        assert sr.data.shape == hr.data.shape
        assert 25.0 < m["ws-psnr"].value < math.inf


def test_round_trip_keeps_color():
    hr = gen_pattern("smooth-harmonic", HR, seed=2, degree=8, color="rgb")
    sr, _ = run_roundtrip(hr, PipelineConfig(format="ohp"))
    assert sr.color == "rgb" and sr.data.shape == hr.data.shape


# -- matrix -------------------------------------------------------------------------------------

def test_single_cell_matrix():
    report = run_matrix([hr_image()], formats=["erp"], scales=[2])
    assert len(report.rows) == 1
    lines = render_report(report).splitlines()
    assert lines[0] == "format,scale,WS-PSNR,PSNR,SSIM"
    assert lines[1].startswith("ERP,x2,")
    assert len(lines) == 2


def test_full_matrix_shape():
    report = run_matrix([hr_image()])
    assert [(r.format.value, r.scale) for r in report.rows][:4] == [("erp", 2), ("erp", 3), ("erp", 4), ("cmp", 2)]
    assert len(report.rows) == 21 and not report.failures
    for fmt in ProjectionFormat:
        vals = [report.row(fmt, s).ws_psnr for s in (2, 3, 4)]
        assert vals[0] > vals[1] > vals[2]


def test_failed_cell_is_isolated():
    inputs = [hr_image()]
    clean = run_matrix(inputs, formats=["erp", "eac"], scales=[2, 3])
    bad = {("eac", 2): {"upscaler": ExternalUpscaler(FAIL)}}
    mixed = run_matrix(inputs, formats=["erp", "eac"], scales=[2, 3], overrides=bad)
    assert [r.format.value for r in mixed.failures] == ["eac"]
    assert "status 3" in mixed.row("eac", 2).error
    for key in (("erp", 2), ("erp", 3), ("eac", 3)):
        assert mixed.row(*key) == clean.row(*key)
    text = render_report(mixed)
    assert "EAC,x2,error,error,error" in text
    assert "error.EAC.x2" in mixed.metadata and "override.EAC.x2" in mixed.metadata


def test_matrix_mean_over_images():
    a, b = hr_image(0), hr_image(1)
    both = run_matrix([a, b], formats=["cmp"], scales=[2]).rows[0]
    ra = run_matrix([a], formats=["cmp"], scales=[2]).rows[0]
    rb = run_matrix([b], formats=["cmp"], scales=[2]).rows[0]
    assert both.n_images == 2
    assert both.ws_psnr == pytest.approx((ra.ws_psnr + rb.ws_psnr) / 2, rel=1e-12)


def test_matrix_is_deterministic_with_threads():
    inputs = [hr_image(3)]
    one = run_matrix(inputs, formats=["erp", "tsp", "ssp"], scales=[2, 4], jobs=1)
    many = run_matrix(inputs, formats=["erp", "tsp", "ssp"], scales=[2, 4], jobs=3)
    assert render_report(one) == render_report(many)
    assert render_metadata(one) == render_metadata(many)


def test_matrix_dump_layout(tmp_path):
    run_matrix([hr_image()], formats=["cmp"], scales=[2], dump_dir=tmp_path)
    assert (tmp_path / "cmp_x2" / "img000" / "sr_erp.npy").exists()


def test_matrix_rejects_empty_input():
    with pytest.raises(ValueError):
        run_matrix([])


# -- rendering ----------------------------------------------------------------------------------

def test_render_empty_and_markdown():
    empty = PipelineReport()
    assert render_report(empty) == "format,scale,WS-PSNR,PSNR,SSIM\n"
    rep = PipelineReport(rows=[ReportRow(ProjectionFormat.EAC, 2, 33.5244, 31.0, 0.91234, 1)])
    md = render_report(rep, "markdown").splitlines()
    assert md[0] == "| format | scale | WS-PSNR | PSNR | SSIM |"
    assert md[2] == "| EAC | x2 | 33.524 | 31.000 | 0.912 |"
    inf_row = PipelineReport(rows=[ReportRow(ProjectionFormat.ERP, 1, math.inf, math.inf, 1.0, 1)])
    assert render_report(inf_row).splitlines()[1] == "ERP,x1,inf,inf,1.000"
    with pytest.raises(ValueError):
        render_report(empty, "html")


def test_metadata_has_no_clock():
    rep = run_matrix([hr_image()], formats=["erp"], scales=[2], seeds=[0])
    text = render_metadata(rep)
    assert "seeds = 0" in text and "lr_order = downscale-then-project" in text
    assert "time" not in text.lower().replace("timeout", "")


# -- config files ---------------------------------------------------------------------------------

def test_load_run_config(tmp_path):
    (tmp_path / "run.ini").write_text(
        "[pipeline]\n"
        "formats = erp eac\n"
        "scales = x2 4\n"
        "kernel = bilinear\n"
        "inputs = a.png sub/b.png\n"
        "report = out.csv\n"
        "style = markdown\n"
        "jobs = 2\n"
        "\n"
        "[cell eac x2]\n"
        "upscaler = external\n"
        f"command = {COPY}\n"
        "wire = png\n"
        "lr_order = project-then-downscale\n"
    )
    rc = load_run_config(tmp_path / "run.ini")
    assert rc.formats == (ProjectionFormat.ERP, ProjectionFormat.EAC)
    assert rc.scales == (2, 4)
    assert rc.defaults.kernel.value == "bilinear"
    assert rc.inputs == [str(tmp_path / "a.png"), str(tmp_path / "sub/b.png")]
    assert rc.report == str(tmp_path / "out.csv") and rc.style == "markdown" and rc.jobs == 2
    cell = rc.overrides[(ProjectionFormat.EAC, 2)]
    assert isinstance(cell["upscaler"], ExternalUpscaler) and cell["upscaler"].wire == "png"
    assert cell["lr_order"] == PROJECT_FIRST


def test_bad_cell_section(tmp_path):
    (tmp_path / "run.ini").write_text("[pipeline]\n\n[cell eac]\nkernel = nearest\n")
    with pytest.raises(ValueError, match="cell"):
        load_run_config(tmp_path / "run.ini")


# -- estimator -------------------------------------------------------------------------------------

def test_roundtrip_estimator():
    hr = hr_image()
    est = RoundTripSR(format="cmp", scale=2)
    assert clone(est).get_params() == est.get_params()
    est.fit(hr)
    sr = est.predict(hr)
    assert sr.data.shape == hr.data.shape
    direct, m = run_roundtrip(hr, PipelineConfig(format="cmp", scale=2))
    assert np.array_equal(sr.data, direct.data)
    assert est.score(hr) == m["ws-psnr"].value
    with pytest.raises(ValueError):
        est.predict(hr_image(grid=ProjectionGrid("erp", 64, 32)))


def test_roundtrip_estimator_on_arrays():
    arr = hr_image().data[..., 0]
    out = RoundTripSR(format="erp").fit(arr).predict(arr)
    assert isinstance(out, np.ndarray) and out.shape == arr.shape
