import numpy as np
import pytest

from omnisr.image import PlanarImage
from omnisr.imageio import (
    FrameSpec,
    gen_pattern,
    pattern_values,
    read_config,
    read_image,
    rgb_to_yuv,
    write_image,
    yuv_to_rgb,
)
from omnisr.metrics import solid_angle_weights, ws_psnr, erp_weights
from omnisr.projection import ALL_FORMATS, ProjectionGrid, default_grid, get_layout
from omnisr.resample import convert


def random_u8(shape, seed=0):
    return np.random.default_rng(seed).integers(0, 256, shape).astype(np.uint8)


@pytest.mark.parametrize("shape", [(12, 20), (12, 20, 3)])
def test_png_round_trip(tmp_path, shape):
    img = PlanarImage.from_uint8(random_u8(shape))
    spec = write_image(img, tmp_path / "a.png")
    back, spec2 = read_image(tmp_path / "a.png")
    assert spec == spec2
    assert np.array_equal(back.data, img.data)
    assert back.color == img.color


def yuv_fixture(tmp_path, w=16, h=10):
    # 4:2:0 content is what the containers carry; take it through one write/read first
    img = PlanarImage(random_u8((h, w, 3), 1) / 255.0, color="yuv")
    write_image(img, tmp_path / "seed.y4m")
    return read_image(tmp_path / "seed.y4m")[0]


@pytest.mark.parametrize("ext", ["y4m", "yuv"])
def test_yuv_round_trip(tmp_path, ext):
    img = yuv_fixture(tmp_path)
    write_image(img, tmp_path / f"b.{ext}")
    back, spec = read_image(tmp_path / f"b.{ext}")
    assert spec.pix_fmt == "yuv420p" and back.color == "yuv"
    assert np.array_equal(back.data, img.data)


def test_y4m_header(tmp_path):
    write_image(yuv_fixture(tmp_path), tmp_path / "c.y4m")
    header = (tmp_path / "c.y4m").read_bytes().split(b"\n", 1)[0].decode()
    assert header.startswith("YUV4MPEG2 W16 H10") and " C420" in header


def test_y4m_chroma_variants(tmp_path):
    write_image(yuv_fixture(tmp_path), tmp_path / "d.y4m")
    raw = (tmp_path / "d.y4m").read_bytes().replace(b" C420 ", b" C420jpeg ")
    (tmp_path / "e.y4m").write_bytes(raw)
    assert read_image(tmp_path / "e.y4m")[1] == FrameSpec(16, 10, "yuv420p", "yuv")
    (tmp_path / "f.y4m").write_bytes(raw.replace(b"C420jpeg", b"C444"))
    with pytest.raises(ValueError, match="chroma"):
        read_image(tmp_path / "f.y4m")


def test_raw_yuv_size_and_sidecar(tmp_path):
    write_image(yuv_fixture(tmp_path, 32, 18), tmp_path / "g.yuv")
    assert (tmp_path / "g.yuv").stat().st_size == 32 * 18 * 3 // 2
    sidecar = (tmp_path / "g.yuv.spec").read_text()
    assert "width=32" in sidecar and "matrix=bt709" in sidecar and "range=full" in sidecar


def test_truncated_and_mismatched(tmp_path):
    write_image(yuv_fixture(tmp_path), tmp_path / "h.y4m")
    data = (tmp_path / "h.y4m").read_bytes()
    (tmp_path / "i.y4m").write_bytes(data[:-10])
    with pytest.raises(ValueError, match="truncated"):
        read_image(tmp_path / "i.y4m")
    write_image(yuv_fixture(tmp_path), tmp_path / "j.yuv")
    (tmp_path / "j.yuv.spec").write_text("width=18\nheight=10\npix_fmt=yuv420p\n")
    with pytest.raises(ValueError, match="sidecar"):
        read_image(tmp_path / "j.yuv")
    (tmp_path / "k.yuv").write_bytes(b"\0" * 10)
    with pytest.raises(ValueError, match="sidecar"):
        read_image(tmp_path / "k.yuv")


def test_unsupported_container(tmp_path):
    with pytest.raises(ValueError, match="unsupported"):
        write_image(PlanarImage(np.zeros((4, 4)), color="gray"), tmp_path / "x.jpg")
    with pytest.raises(ValueError):
        write_image(PlanarImage(np.zeros((4, 4)), color="gray"), tmp_path / "x.y4m")
    with pytest.raises(ValueError):
        FrameSpec(15, 10, "yuv420p", "yuv")


def test_inactive_pixels_written_gray(tmp_path):
    g = default_grid("ssp", 4096)
    img = gen_pattern("checker-sphere", g)
    img.data[:] = 0.0
    write_image(img, tmp_path / "m.png")
    back, _ = read_image(tmp_path / "m.png")
    inactive = ~get_layout(g).mask
    assert np.all(back.to_uint8()[inactive] == 128)
    assert np.all(back.to_uint8()[~inactive] == 0)


def test_rgb_yuv_conversion():
    rgb = PlanarImage(np.random.default_rng(2).random((5, 6, 3)))
    back = yuv_to_rgb(rgb_to_yuv(rgb))
    assert np.abs(back.data - rgb.data).max() < 1e-12
    white = rgb_to_yuv(PlanarImage(np.ones((1, 1, 3))))
    assert np.allclose(white.data[0, 0], [1.0, 0.5, 0.5])


# -- patterns ---------------------------------------------------------------------------------

@pytest.mark.parametrize("kind", ["smooth-harmonic", "checker-sphere", "latlon-grid"])
def test_pattern_determinism(kind):
    g = default_grid("isp", 4096)
    a, b = gen_pattern(kind, g, seed=7), gen_pattern(kind, g, seed=7)
    assert np.array_equal(a.data, b.data)
    assert a.data[a.active].min() >= 0.1 and a.data[a.active].max() <= 0.9


def test_degree_zero_is_constant():
    img = gen_pattern("smooth-harmonic", ProjectionGrid("erp", 64, 32), seed=3, degree=0)
    assert np.all(img.data == 0.5)


def test_unknown_pattern():
    with pytest.raises(ValueError):
        pattern_values("plaid", np.array([[1.0, 0, 0]]))


def test_harmonic_is_band_limited():
    from scipy.special import eval_legendre

    # integrating against a zonal harmonic of higher degree gives zero
    d = np.random.default_rng(0).standard_normal((400_000, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    v = pattern_values("smooth-harmonic", d, seed=1, degree=4) - 0.5
    axis = np.array([0.3, -0.5, 0.81])
    axis /= np.linalg.norm(axis)
    hi = np.mean(v * eval_legendre(7, d @ axis))
    lo = max(abs(np.mean(v * eval_legendre(l, d @ axis))) for l in range(1, 5))
    assert abs(hi) < 0.1 * lo


@pytest.mark.parametrize("fmt", [f.value for f in ALL_FORMATS if f.value != "erp"])
def test_direct_render_matches_converted_render(fmt):
    erp = ProjectionGrid("erp", 512, 256)
    g = default_grid(fmt, erp.n_pixels)
    via = convert(gen_pattern("smooth-harmonic", erp, seed=5), erp, g)
    direct = gen_pattern("smooth-harmonic", g, seed=5)
    assert ws_psnr(via, direct, solid_angle_weights(g)).value >= 45.0


def test_rgb_pattern_channels_differ():
    img = gen_pattern("smooth-harmonic", ProjectionGrid("erp", 32, 16), color="rgb")
    assert img.color == "rgb" and not np.array_equal(img.data[..., 0], img.data[..., 1])


# -- config ------------------------------------------------------------------------------------

def test_read_config(tmp_path):
    p = tmp_path / "run.ini"
    p.write_text("[pipeline]\nformats = erp eac\n\n[cell eac x2]\nupscaler = bilinear\n")
    cp = read_config(p)
    assert cp["pipeline"]["formats"] == "erp eac"
    assert cp["cell eac x2"]["upscaler"] == "bilinear"
    (tmp_path / "bad.ini").write_text("[other]\na = 1\n")
    with pytest.raises(ValueError, match="pipeline"):
        read_config(tmp_path / "bad.ini")
