import math

import numpy as np
import pytest
from hypothesis import example, given
from hypothesis import strategies as st

from omnisr.geometry import angular_error_array, dir_to_latlon, normalize, random_directions
from omnisr.projection import (
    ALL_FORMATS,
    ImagePoint,
    ProjectionFormat,
    ProjectionGrid,
    active_mask,
    default_grid,
    eac_remap,
    eac_unmap,
    get_layout,
    project,
    project_array,
    unproject,
    unproject_array,
)
from omnisr.projection.layout import CUBE_FACES

BUDGET = 512 * 256 // 4


@pytest.fixture(scope="module", params=[f.value for f in ALL_FORMATS])
def grid(request):
    return default_grid(request.param, BUDGET)


# -- ERP anchors -------------------------------------------------------------------

def test_erp_image_center_is_plus_x():
    d = unproject(ProjectionGrid("erp", 4, 2), (2.0, 1.0))
    assert np.allclose(d.as_array(), [1, 0, 0], atol=1e-15)


def test_erp_first_pixel_center():
    d = unproject(ProjectionGrid("erp", 4, 2), (0.5, 0.5))
    ll = dir_to_latlon(d)
    assert ll.lat == pytest.approx(0.25 * math.pi, abs=1e-15)
    assert ll.lon == pytest.approx(-0.75 * math.pi, abs=1e-15)


def test_erp_project_anchor():
    assert project(ProjectionGrid("erp", 4, 2), (1.0, 0.0, 0.0)) == ImagePoint(2.0, 1.0)


def test_cmp_plus_x_hits_front_face_center():
    g = ProjectionGrid("cmp", 192, 128)
    assert project(g, (1.0, 0.0, 0.0)) == ImagePoint(96.0, 32.0)


@pytest.mark.parametrize("name, col, row, normal", [(f[0], f[1], f[2], f[3]) for f in CUBE_FACES])
def test_cube_face_centers(name, col, row, normal):
    g = ProjectionGrid("cmp", 192, 128)
    p = project(g, normal)
    assert (p.x, p.y) == pytest.approx((64 * col + 32, 64 * row + 32), abs=1e-12)


def test_unproject_rejects_out_of_bounds():
    g = ProjectionGrid("erp", 8, 4)
    for p in [(-0.1, 1.0), (8.5, 1.0), (1.0, 4.01)]:
        with pytest.raises(ValueError):
            unproject(g, p)


def test_ssp_corner_is_inactive():
    g = default_grid("ssp", 8192)
    assert unproject(g, (g.width - 0.5, 0.5)) is None
    assert unproject(g, (g.width - 0.5, g.height - 0.5)) is None


def test_project_rejects_zero_vector():
    with pytest.raises(ValueError):
        project(ProjectionGrid("erp", 8, 4), (0.0, 0.0, 0.0))


# -- grid construction ---------------------------------------------------------------

@pytest.mark.parametrize(
    "fmt, w, h",
    [("erp", 64, 33), ("cmp", 192, 127), ("eac", 191, 128), ("tsp", 100, 49), ("ssp", 10, 6), ("isp", 100, 100)],
)
def test_bad_aspect_rejected(fmt, w, h):
    with pytest.raises(ValueError):
        ProjectionGrid(fmt, w, h)


def test_format_parse_is_case_insensitive():
    assert ProjectionFormat.parse("Eac") is ProjectionFormat.EAC
    with pytest.raises(ValueError):
        ProjectionFormat.parse("hec")


def test_default_grid_examples():
    assert (lambda g: (g.width, g.height))(default_grid("erp", 2048)) == (64, 32)
    assert (lambda g: (g.width, g.height))(default_grid("cmp", 6 * 64 * 64)) == (192, 128)
    with pytest.raises(ValueError):
        default_grid("erp", 100)


@pytest.mark.parametrize("fmt", [f.value for f in ALL_FORMATS])
@pytest.mark.parametrize("budget", [2048, 20000, 131072])
def test_default_grid_budget(fmt, budget):
    g = default_grid(fmt, budget)
    count = int(active_mask(g).sum())
    assert abs(count - budget) <= 0.1 * budget
    assert g.width % 2 == 0 and g.height % 2 == 0
    assert default_grid(fmt, budget) == g


# -- masks ---------------------------------------------------------------------------

def test_erp_mask_full():
    assert active_mask(ProjectionGrid("erp", 64, 32)).sum() == 2048


@pytest.mark.parametrize("fmt", ["erp", "cmp", "eac", "tsp"])
def test_full_frame_formats(fmt):
    assert active_mask(default_grid(fmt, 8192)).all()


@pytest.mark.parametrize("fmt", ["ssp", "isp", "ohp"])
def test_gapped_formats(fmt):
    assert active_mask(default_grid(fmt, 8192)).mean() < 1.0


def test_ssp_cap_square_fraction():
    g = ProjectionGrid("ssp", 256, 128)
    side = 64
    square = active_mask(g)[:side, g.width - side:]
    assert square.mean() == pytest.approx(math.pi / 4, rel=0.02)


@pytest.mark.parametrize("fmt, frac", [("isp", 0.5), ("ohp", 0.5)])
def test_triangle_layouts_half_active(fmt, frac):
    assert active_mask(default_grid(fmt, 65536)).mean() == pytest.approx(frac, abs=0.01)


def test_mask_matches_unproject(grid):
    mask = active_mask(grid)
    rng = np.random.default_rng(7)
    iy = rng.integers(0, grid.height, 200)
    ix = rng.integers(0, grid.width, 200)
    for y, x in zip(iy, ix):
        d = unproject(grid, (x + 0.5, y + 0.5))
        assert (d is not None) == bool(mask[y, x])


# -- bijectivity and coverage ----------------------------------------------------------

def test_pixel_round_trip(grid):
    mask = active_mask(grid)
    iy, ix = np.nonzero(mask)
    d, labels = unproject_array(grid, ix + 0.5, iy + 0.5)
    assert np.all(labels >= 0)
    assert np.allclose(np.linalg.norm(d, axis=1), 1.0, atol=1e-12)
    x, y, _ = project_array(grid, d)
    err = np.hypot(x - (ix + 0.5), y - (iy + 0.5))
    assert err.max() < 1e-6


def test_sphere_coverage(grid):
    d = random_directions(100_000, np.random.default_rng(3))
    x, y, labels = project_array(grid, d)
    assert np.all(labels >= 0)
    layout = get_layout(grid)
    # every landing point lies inside the active region of its face
    for k, region in enumerate(layout.regions):
        m = labels == k
        if m.any():
            assert region.signed_distance(x[m], y[m]).max() < 1e-9
    back, _ = unproject_array(grid, x, y)
    assert angular_error_array(back, d).max() < 1e-9


def test_continuity_within_faces(grid):
    layout = get_layout(grid)
    labels = layout.pixel_labels
    iy, ix = np.nonzero(labels >= 0)
    d = np.full(labels.shape + (3,), np.nan)
    d[iy, ix] = layout.to_sphere(labels[iy, ix], ix + 0.5, iy + 0.5)
    pitch = math.sqrt(4 * math.pi / iy.size)
    for a, b, same in [
        (d[:, :-1], d[:, 1:], labels[:, :-1] == labels[:, 1:]),
        (d[:-1], d[1:], labels[:-1] == labels[1:]),
    ]:
        same &= np.all(np.isfinite(a), axis=-1) & np.all(np.isfinite(b), axis=-1)
        step = angular_error_array(a[same], b[same])
        assert step.max() < 4 * pitch


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
@example(-0.5, 0.0, 0.5)
@example(0.0, 0.0, 1.0)
@example(1.0, 1.0, 1.0)
def test_project_unproject_random(x, y, z):
    v = np.array([x, y, z])
    if np.linalg.norm(v) < 1e-3:
        return
    v = normalize(v)
    for fmt in ALL_FORMATS:
        g = default_grid(fmt, 8192)
        p = project(g, v)
        assert 0 <= p.x <= g.width and 0 <= p.y <= g.height
        back, _ = unproject_array(g, np.array([p.x]), np.array([p.y]))
        if angular_error_array(back[0], v) < 1e-9:
            continue
        # packed layouts map two sphere points onto one raster point only on
        # an outline shared by faces that are not neighbors on the sphere
        _, _, label = get_layout(g).project(v[None])
        region = get_layout(g).regions[label[0]]
        assert abs(region.signed_distance(np.array([p.x]), np.array([p.y]))[0]) < 1e-9
        again = project(g, back[0])
        assert abs(again.x - p.x) < 1e-9 and abs(again.y - p.y) < 1e-9


def test_cube_seam_collision_is_raster_only():
    # the Back/Up edge lands on the Front/Back raster outline
    g = ProjectionGrid("cmp", 108, 72)
    v = normalize(np.array([-1.0, 0.0, 1.0]))
    p = project(g, v)
    assert (p.x, p.y) == (54.0, 36.0)
    nudged, _ = unproject_array(g, np.array([54.0]), np.array([36.0 + 1e-3]))
    assert angular_error_array(nudged[0], v) < 1e-3


def test_seam_tie_breaks_to_lowest_face():
    g = ProjectionGrid("cmp", 192, 128)
    # the Left/Front edge direction belongs to both faces; Left has index 0
    d = normalize(np.array([1.0, -1.0, 0.0]))
    _, _, labels = project_array(g, d[None])
    assert labels[0] == 0
    p = project(g, d)
    assert p == pytest.approx((64.0, 32.0), abs=1e-9)


# -- EAC ---------------------------------------------------------------------------------

def test_eac_fixed_points():
    for u in (-1.0, 0.0, 1.0):
        assert eac_remap(u) == u
        assert eac_unmap(u) == pytest.approx(u, abs=1e-15)
    assert eac_remap(math.tan(math.pi / 8)) == pytest.approx(0.5, abs=1e-12)


def test_eac_rejects_out_of_range():
    with pytest.raises(ValueError):
        eac_remap(1.5)
    with pytest.raises(ValueError):
        eac_unmap(-1.0001)


def test_eac_sweep_inverse():
    u = np.linspace(-1, 1, 10_001)
    assert np.abs(eac_unmap(eac_remap(u)) - u).max() < 1e-12
    assert np.all(np.diff(eac_remap(u)) > 0)
    assert np.allclose(eac_remap(-u), -eac_remap(u), atol=0)


def test_eac_equals_cmp_after_remap():
    s = 32
    eac = get_layout(ProjectionGrid("eac", 3 * s, 2 * s))
    cmp_ = get_layout(ProjectionGrid("cmp", 3 * s, 2 * s))
    rng = np.random.default_rng(0)
    for k, (_, col, row, *_rest) in enumerate(CUBE_FACES):
        ue = rng.uniform(-1, 1, 500)
        ve = rng.uniform(-1, 1, 500)
        xe, ye = col * s + (ue + 1) * s / 2, row * s + (ve + 1) * s / 2
        xc, yc = col * s + (eac_unmap(ue) + 1) * s / 2, row * s + (eac_unmap(ve) + 1) * s / 2
        lab = np.full(500, k)
        assert np.allclose(eac.to_sphere(lab, xe, ye), cmp_.to_sphere(lab, xc, yc), atol=1e-14)


def test_eac_with_identity_remap_is_cmp():
    from omnisr.projection.layout import _cube

    g = ProjectionGrid("eac", 96, 64)
    plain = _cube(g, equiangular=False)
    ref = get_layout(ProjectionGrid("cmp", 96, 64))
    ys, xs = np.mgrid[0:64, 0:96] + 0.5
    assert np.array_equal(plain.pixel_labels, ref.pixel_labels)
    lab = ref.pixel_labels
    assert np.array_equal(plain.to_sphere(lab, xs, ys), ref.to_sphere(lab, xs, ys))


def test_tsp_back_ratio_parameter():
    g = ProjectionGrid("tsp", 128, 64, back_ratio=0.5)
    assert project(g, (-1.0, 0.0, 0.0)) == pytest.approx((96.0, 32.0), abs=1e-9)
    assert active_mask(g).all()
    with pytest.raises(ValueError):
        ProjectionGrid("tsp", 128, 64, back_ratio=1.2)
