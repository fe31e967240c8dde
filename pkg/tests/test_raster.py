import math

import numpy as np
import pytest

from urbanmetrics import raster
from urbanmetrics.entropy import GridMetricField, MetricKind, TimeFilter
from urbanmetrics.geo import Lattice

DPP = 1.0 / 8192.0  # degrees per pixel; dyadic so pixel positions are float-exact


def make_lattice(cols=8, rows=6, step=1.0 / 1024.0):
    return Lattice(lon0=10.0, lat0=20.0, step_lon=step, step_lat=step,
                   cols=cols, rows=rows, ref_lat=0.0, step_m=step * 111320.0)


def make_field(lattice, cells):
    """cells: {(col, row): (mean, count)}"""
    mean = np.zeros((lattice.rows, lattice.cols))
    count = np.zeros((lattice.rows, lattice.cols), dtype=np.int64)
    for (col, row), (m, c) in cells.items():
        mean[row, col] = m
        count[row, col] = c
    return GridMetricField(MetricKind.VIBRANCY, TimeFilter.all(), lattice.cols, lattice.rows,
                           mean, count)


def viewport_with_cell_at(lattice, col, row, px, py, width=40, height=30):
    """Viewport that puts the given cell center exactly at pixel position (px, py)."""
    lon_c = lattice.lon0 + col * lattice.step_lon
    lat_c = lattice.lat0 + row * lattice.step_lat
    lon_min = lon_c - px * DPP
    lat_max = lat_c + py * DPP
    return raster.Viewport(
        (lon_min, lat_max - height * DPP, lon_min + width * DPP, lat_max), width, height
    )


def test_single_seed_kernel_endpoints():
    lattice = make_lattice()
    f = make_field(lattice, {(3, 2): (5.0, 4)})
    vp = viewport_with_cell_at(lattice, 3, 2, 10.5, 7.5)
    params = raster.DiffusionParams(radius_px=6.0, adaptive=False, viewport=vp)
    ras = raster.rasterize_field(f, lattice, params)
    assert ras.values[7, 10] == pytest.approx(5.0, abs=1e-12)  # pixel center at the seed
    assert ras.values[7, 16] == pytest.approx(0.0, abs=1e-12)  # exactly one radius away
    assert ras.values[7, 13] == pytest.approx(5.0 * 0.5, abs=1e-12)  # halfway down the cone
    assert ras.value_range[0] == 0.0
    assert ras.value_range[1] == pytest.approx(5.0)


def test_two_seeds_superpose_at_midpoint():
    lattice = make_lattice()
    # adjacent columns: one lattice step = 8 px at this scale
    f = make_field(lattice, {(3, 2): (2.0, 1), (4, 2): (2.0, 1)})
    vp = viewport_with_cell_at(lattice, 3, 2, 10.5, 7.5)
    radius = 16.0  # seeds half a radius apart
    params = raster.DiffusionParams(radius_px=radius, adaptive=False, viewport=vp)
    ras = raster.rasterize_field(f, lattice, params)
    # midpoint pixel (14.5 px) sits 4 px from each seed
    expected = 2.0 * (1 - 4.0 / radius) * 2
    assert ras.values[7, 14] == pytest.approx(expected, abs=1e-12)


def test_raster_matches_bruteforce_oracle():
    """<=20 random seeds against the O(pixels * seeds) double loop."""
    rng = np.random.default_rng(12)
    lattice = make_lattice(cols=12, rows=9)
    cells = {}
    while len(cells) < 20:
        col = int(rng.integers(0, 12))
        row = int(rng.integers(0, 9))
        cells[(col, row)] = (float(rng.uniform(0.5, 3.0)), 1)
    f = make_field(lattice, cells)
    width, height = 50, 40
    vp = viewport_with_cell_at(lattice, 5, 4, 25.5, 20.5, width=width, height=height)
    radius = 9.0
    ras = raster.rasterize_field(
        f, lattice, raster.DiffusionParams(radius_px=radius, adaptive=False, viewport=vp)
    )

    lon_min, lat_min, lon_max, lat_max = vp.bbox
    out = np.zeros((height, width))
    for i in range(height):
        for j in range(width):
            x, y = j + 0.5, i + 0.5
            for (col, row), (v, _c) in cells.items():
                sx = (lattice.lon0 + col * lattice.step_lon - lon_min) / (lon_max - lon_min) * width
                sy = (lat_max - (lattice.lat0 + row * lattice.step_lat)) / (lat_max - lat_min) * height
                d = math.hypot(x - sx, y - sy)
                if d < radius:
                    out[i, j] += v * (1 - d / radius)
    np.testing.assert_allclose(ras.values, out, atol=1e-6)


def test_zero_count_cells_do_not_seed():
    lattice = make_lattice()
    f = make_field(lattice, {(3, 2): (5.0, 0)})  # count 0 -> no contribution
    vp = viewport_with_cell_at(lattice, 3, 2, 10.5, 7.5)
    ras = raster.rasterize_field(
        f, lattice, raster.DiffusionParams(radius_px=6.0, adaptive=False, viewport=vp)
    )
    assert (ras.values == 0).all()


def test_out_of_view_seed_within_radius_contributes():
    lattice = make_lattice()
    f = make_field(lattice, {(0, 2): (4.0, 1)})
    # viewport starts right of the seed; seed sits 3 px outside the left edge
    vp = viewport_with_cell_at(lattice, 0, 2, -3.0, 7.5)
    ras = raster.rasterize_field(
        f, lattice, raster.DiffusionParams(radius_px=8.0, adaptive=False, viewport=vp)
    )
    assert ras.values[7, 0] > 0  # bleed across the edge, no seam


def test_superposition_linearity():
    lattice = make_lattice()
    a = make_field(lattice, {(2, 2): (1.5, 1)})
    b = make_field(lattice, {(5, 3): (2.5, 1)})
    both = make_field(lattice, {(2, 2): (1.5, 1), (5, 3): (2.5, 1)})
    vp = viewport_with_cell_at(lattice, 3, 2, 15.5, 12.5, width=60, height=40)
    params = raster.DiffusionParams(radius_px=12.0, adaptive=False, viewport=vp)
    ra = raster.rasterize_field(a, lattice, params)
    rb = raster.rasterize_field(b, lattice, params)
    rab = raster.rasterize_field(both, lattice, params)
    np.testing.assert_allclose(rab.values, ra.values + rb.values, atol=1e-6)


def test_mass_proxy_cone_volume():
    """Sum over pixels approximates the continuous cone volume pi r^2 v / 3."""
    lattice = make_lattice()
    v = 2.0
    f = make_field(lattice, {(3, 2): (v, 1)})
    for radius in (10.0, 25.0):
        vp = viewport_with_cell_at(lattice, 3, 2, 40.5, 40.5, width=81, height=81)
        ras = raster.rasterize_field(
            f, lattice, raster.DiffusionParams(radius_px=radius, adaptive=False, viewport=vp)
        )
        expected = math.pi * radius**2 * v / 3.0
        assert ras.values.sum() == pytest.approx(expected, rel=0.02)


def test_translation_equivariance():
    lattice = make_lattice()
    f = make_field(lattice, {(3, 2): (2.0, 1), (4, 3): (1.0, 2)})
    vp1 = viewport_with_cell_at(lattice, 3, 2, 15.5, 12.5, width=60, height=40)
    shift = 4
    lon_min, lat_min, lon_max, lat_max = vp1.bbox
    vp2 = raster.Viewport(
        (lon_min + shift * DPP, lat_min, lon_max + shift * DPP, lat_max), 60, 40
    )
    params1 = raster.DiffusionParams(radius_px=9.0, adaptive=False, viewport=vp1)
    params2 = raster.DiffusionParams(radius_px=9.0, adaptive=False, viewport=vp2)
    r1 = raster.rasterize_field(f, lattice, params1).values
    r2 = raster.rasterize_field(f, lattice, params2).values
    np.testing.assert_allclose(r2[:, : 60 - shift], r1[:, shift:], atol=1e-9)


def test_adapt_radius():
    assert raster.adapt_radius(12.0, 2.0, adaptive=True) == 24.0
    assert raster.adapt_radius(12.0, 2.0, adaptive=False) == 12.0
    assert raster.adapt_radius(12.0, 1.0, adaptive=True) == 12.0
    with pytest.raises(ValueError):
        raster.adapt_radius(12.0, 0.0)


def test_default_radius_three_grid_radii():
    lattice = Lattice(lon0=10.0, lat0=20.0, step_lon=0.001, step_lat=0.001,
                      cols=8, rows=6, ref_lat=0.0, step_m=0.001 * 111320.0)
    vp = raster.Viewport((10.0, 20.0, 10.0 + 0.004, 20.0 + 0.003), 400, 300)
    # 0.004 deg over 400 px -> 1 px per 1e-5 deg; grid radius = 0.0005 deg = 50 px
    assert raster.grid_radius_px(lattice, vp) == pytest.approx(50.0)
    assert raster.default_radius_px(lattice, vp) == pytest.approx(150.0)
    zoomed = raster.Viewport((10.0, 20.0, 10.0 + 0.004, 20.0 + 0.003), 400, 300, zoom=2.0)
    assert raster.default_radius_px(lattice, zoomed) == pytest.approx(75.0)


# ---------------------------------------------------------------------------
# Palette / color filter
# ---------------------------------------------------------------------------

def _raster_1d(values):
    v = np.asarray([values], dtype=np.float64)
    return raster.ScalarRaster(v.shape[1], 1, v, (float(v.min()), float(v.max())))


def test_color_filter_endpoints_and_midpoint():
    ras = _raster_1d([0.0, 1.0, 2.0, 3.0, 4.0])
    rgba = raster.apply_color_filter(ras, raster.ColorFilter(1.0, 3.0))
    assert tuple(rgba[0, 0]) == (0, 0, 0, 0)  # below t_min: fully transparent
    assert tuple(rgba[0, 1]) == (0, 0, 255, 255)  # at t_min: blue end
    assert tuple(rgba[0, 2]) == (0, 255, 0, 255)  # midway: green
    assert tuple(rgba[0, 3]) == (255, 0, 0, 255)  # at t_max: red end
    assert tuple(rgba[0, 4]) == (255, 0, 0, 255)  # above t_max: clamped to red


def test_color_filter_reversed_swaps_ends():
    ras = _raster_1d([1.0, 3.0])
    rgba = raster.apply_color_filter(ras, raster.ColorFilter(1.0, 3.0, reversed=True))
    assert tuple(rgba[0, 0]) == (255, 0, 0, 255)  # low end now red
    assert tuple(rgba[0, 1]) == (0, 0, 255, 255)  # max now blue


def test_color_filter_step_when_thresholds_equal():
    ras = _raster_1d([1.0, 2.0, 3.0])
    rgba = raster.apply_color_filter(ras, raster.ColorFilter(2.0, 2.0))
    assert tuple(rgba[0, 0]) == (0, 0, 0, 0)
    assert tuple(rgba[0, 1]) == (255, 0, 0, 255)
    assert tuple(rgba[0, 2]) == (255, 0, 0, 255)


def test_color_filter_opacity_touches_only_alpha():
    ras = _raster_1d([1.0, 2.0, 3.0])
    full = raster.apply_color_filter(ras, raster.ColorFilter(1.0, 3.0), opacity=1.0)
    half = raster.apply_color_filter(ras, raster.ColorFilter(1.0, 3.0), opacity=0.5)
    np.testing.assert_array_equal(full[..., :3], half[..., :3])
    assert (half[0, :, 3] == 128).all()


def test_color_filter_transparency_invariant():
    rng = np.random.default_rng(8)
    vals = rng.uniform(0, 5, size=(13, 17))
    ras = raster.ScalarRaster(17, 13, vals, (0.0, 5.0))
    rgba = raster.apply_color_filter(ras, raster.ColorFilter(2.0, 4.0), opacity=0.7)
    below = vals < 2.0
    assert (rgba[below][:, 3] == 0).all()
    assert (rgba[~below][:, 3] == int(0.7 * 255 + 0.5)).all()


def test_monotone_tmin_never_adds_pixels():
    rng = np.random.default_rng(9)
    vals = rng.uniform(0, 5, size=(9, 9))
    ras = raster.ScalarRaster(9, 9, vals, (0.0, 5.0))
    low = raster.apply_color_filter(ras, raster.ColorFilter(1.0, 4.0))
    high = raster.apply_color_filter(ras, raster.ColorFilter(2.0, 4.0))
    newly_visible = (high[..., 3] > 0) & (low[..., 3] == 0)
    assert not newly_visible.any()


def test_png_roundtrip_and_determinism(tmp_path):
    rng = np.random.default_rng(10)
    vals = rng.uniform(0, 3, size=(20, 30))
    ras = raster.ScalarRaster(30, 20, vals, (0.0, 3.0))
    rgba = raster.apply_color_filter(ras, raster.ColorFilter(0.5, 2.5), opacity=0.9)
    raster.save_png(rgba, tmp_path / "a.png")
    raster.save_png(rgba, tmp_path / "b.png")
    assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()
    back = raster.load_png(tmp_path / "a.png")
    np.testing.assert_array_equal(back, rgba)


def test_wire_format_roundtrip():
    rng = np.random.default_rng(13)
    vals = rng.uniform(0, 2, size=(7, 11)).astype(np.float32).astype(np.float64)
    ras = raster.ScalarRaster(11, 7, vals, (float(vals.min()), float(vals.max())))
    blob = ras.to_bytes()
    back = raster.ScalarRaster.from_bytes(blob)
    assert (back.width, back.height) == (11, 7)
    np.testing.assert_array_equal(back.values, vals)
    assert back.value_range[0] == pytest.approx(ras.value_range[0])
    # header brackets the payload
    assert back.values.min() >= back.value_range[0]
    assert back.values.max() <= back.value_range[1]
