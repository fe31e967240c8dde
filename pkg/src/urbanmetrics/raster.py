"""Point-diffusion contour rasters and the double-threshold rainbow palette.

Every occupied grid cell seeds a linear cone k(d) = value * max(0, 1 - d/r)
at its center's pixel position; pixel intensities are the plain sum over
seeds, which smooths the blocky grid into a contour-like surface. The
diffusion radius defaults to three grid radii on screen and either stays
fixed in pixels or tracks the ground scale when zooming (adaptive mode).

Colorization maps [t_min, t_max] linearly onto the blue-to-red rainbow
(hue 240 deg down to 0 deg, full saturation, half lightness). Values below
t_min become fully transparent; values at or above t_max take the rightmost
color. The same contract is applied client-side so threshold sliders do not
re-fetch rasters.
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .entropy import GridMetricField
from .geo import Lattice


@dataclass(frozen=True)
class Viewport:
    bbox: tuple  # lon_min, lat_min, lon_max, lat_max
    width_px: int
    height_px: int
    zoom: float = 1.0

    def __post_init__(self):
        if self.width_px < 1 or self.height_px < 1:
            raise ValueError("viewport must be at least 1x1 px")
        lon_min, lat_min, lon_max, lat_max = self.bbox
        if not (lon_max > lon_min and lat_max > lat_min):
            raise ValueError(f"degenerate viewport bbox {self.bbox}")
        if self.zoom <= 0:
            raise ValueError("zoom must be positive")

    def to_pixel(self, lon, lat):
        """Map lon/lat to pixel coordinates (x right, y down)."""
        lon_min, lat_min, lon_max, lat_max = self.bbox
        x = (np.asarray(lon) - lon_min) / (lon_max - lon_min) * self.width_px
        y = (lat_max - np.asarray(lat)) / (lat_max - lat_min) * self.height_px
        return x, y


@dataclass(frozen=True)
class DiffusionParams:
    radius_px: float  # at the reference (zoom=1) scale
    adaptive: bool = True
    viewport: Viewport | None = None

    def __post_init__(self):
        if self.radius_px <= 0:
            raise ValueError("radius_px must be positive")


@dataclass
class ScalarRaster:
    width: int
    height: int
    values: np.ndarray  # (height, width) float64, non-negative
    value_range: tuple  # (min, max)

    def to_bytes(self) -> bytes:
        """Wire format: u32 LE header length, JSON header, f32 LE row-major.

        The advertised value_range comes from the quantized payload, so it
        brackets what actually travels (float32 rounding can nudge values
        past the float64 extremes).
        """
        quantized = np.ascontiguousarray(self.values, dtype="<f4")
        if quantized.size:
            value_range = [float(quantized.min()), float(quantized.max())]
        else:
            value_range = [0.0, 0.0]
        header = json.dumps(
            {"width": self.width, "height": self.height, "value_range": value_range},
            sort_keys=True,
        ).encode("utf-8")
        return struct.pack("<I", len(header)) + header + quantized.tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "ScalarRaster":
        (hlen,) = struct.unpack_from("<I", blob, 0)
        header = json.loads(blob[4 : 4 + hlen].decode("utf-8"))
        data = np.frombuffer(blob[4 + hlen :], dtype="<f4").astype(np.float64)
        values = data.reshape(header["height"], header["width"])
        return cls(header["width"], header["height"], values, tuple(header["value_range"]))


def grid_radius_px(lattice: Lattice, viewport: Viewport) -> float:
    """Half a lattice step expressed in screen pixels at this viewport."""
    lon_min, lat_min, lon_max, lat_max = viewport.bbox
    m_per_px = (lon_max - lon_min) / viewport.width_px * (
        111320.0 * math.cos(math.radians(lattice.ref_lat))
    )
    return (lattice.step_m / 2.0) / m_per_px


def default_radius_px(lattice: Lattice, viewport: Viewport) -> float:
    """Default diffusion radius at the reference zoom: three grid radii."""
    return 3.0 * grid_radius_px(lattice, viewport) / viewport.zoom


def adapt_radius(base_radius_px: float, zoom_delta: float, adaptive: bool = True) -> float:
    """Radius to draw with after a zoom change.

    Adaptive keeps the ground radius constant, so the pixel radius scales
    with the zoom factor; fixed mode keeps the pixel radius as-is (which
    washes out when zooming in).
    """
    if zoom_delta <= 0:
        raise ValueError("zoom_delta must be positive")
    return base_radius_px * zoom_delta if adaptive else base_radius_px


def rasterize_field(f: GridMetricField, lattice: Lattice, params: DiffusionParams) -> ScalarRaster:
    """Diffuse occupied cells onto the viewport pixel grid.

    Pixels sample at their centers (x+0.5, y+0.5). Seeds outside the
    viewport but within one radius still contribute, so panning never
    reveals seams.
    """
    vp = params.viewport
    if vp is None:
        raise ValueError("DiffusionParams.viewport is required for rasterization")
    radius = adapt_radius(params.radius_px, vp.zoom, params.adaptive)
    out = np.zeros((vp.height_px, vp.width_px), dtype=np.float64)

    rr, cc = np.nonzero(f.count)
    if rr.size:
        lons = lattice.lon0 + cc * lattice.step_lon
        lats = lattice.lat0 + rr * lattice.step_lat
        sx, sy = vp.to_pixel(lons, lats)
        vals = f.mean[rr, cc]
        keep = (
            (sx >= -radius) & (sx <= vp.width_px + radius)
            & (sy >= -radius) & (sy <= vp.height_px + radius)
            & (vals != 0)
        )
        for x, y, v in zip(sx[keep], sy[keep], vals[keep]):
            _stamp_cone(out, x, y, v, radius)

    vmin = float(out.min()) if out.size else 0.0
    vmax = float(out.max()) if out.size else 0.0
    return ScalarRaster(vp.width_px, vp.height_px, out, (vmin, vmax))


def _stamp_cone(out: np.ndarray, x: float, y: float, value: float, radius: float) -> None:
    h, w = out.shape
    # pixel centers are at integer+0.5; cover the closed disk of the kernel
    c0 = max(int(math.floor(x - radius - 0.5)), 0)
    c1 = min(int(math.ceil(x + radius - 0.5)), w - 1)
    r0 = max(int(math.floor(y - radius - 0.5)), 0)
    r1 = min(int(math.ceil(y + radius - 0.5)), h - 1)
    if c0 > c1 or r0 > r1:
        return
    px = np.arange(c0, c1 + 1) + 0.5
    py = np.arange(r0, r1 + 1) + 0.5
    d = np.hypot(px[None, :] - x, py[:, None] - y)
    out[r0 : r1 + 1, c0 : c1 + 1] += value * np.maximum(0.0, 1.0 - d / radius)


# ---------------------------------------------------------------------------
# Palette and color filtering
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ColorFilter:
    t_min: float
    t_max: float
    reversed: bool = False

    def __post_init__(self):
        if self.t_min > self.t_max:
            raise ValueError("t_min must not exceed t_max")


def rainbow_rgb(t: np.ndarray, reverse: bool = False) -> np.ndarray:
    """Ramp position t in [0,1] to RGB bytes along hue 240deg -> 0deg (HSL, S=1, L=0.5)."""
    t = np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0)
    hue = 240.0 * t if reverse else 240.0 * (1.0 - t)
    hp = hue / 60.0
    x = 1.0 - np.abs(hp % 2.0 - 1.0)  # chroma is 1 at S=1, L=0.5
    zeros = np.zeros_like(hp)
    ones = np.ones_like(hp)
    r = np.select([hp < 1, hp < 2, hp < 3, hp < 4, hp < 5], [ones, x, zeros, zeros, x], ones)
    g = np.select([hp < 1, hp < 2, hp < 3, hp < 4, hp < 5], [x, ones, ones, x, zeros], zeros)
    b = np.select([hp < 1, hp < 2, hp < 3, hp < 4, hp < 5], [zeros, zeros, x, ones, ones], x)
    rgb = np.stack([r, g, b], axis=-1)
    return np.floor(rgb * 255.0 + 0.5).astype(np.uint8)


def apply_color_filter(
    raster: ScalarRaster, cfilter: ColorFilter, opacity: float = 1.0
) -> np.ndarray:
    """RGBA image (height, width, 4) uint8 per the double-threshold contract.

    Below t_min: fully transparent. At or above t_max: rightmost ramp color.
    In between: linear map onto the ramp. Equal thresholds degrade to a step
    function. Alpha of visible pixels comes from the layer opacity.

    Values are quantized to float32 first: that is the precision rasters
    travel at, so client-side colorization of the wire payload reproduces
    the server PNG bit for bit.
    """
    if not 0.0 <= opacity <= 1.0:
        raise ValueError("opacity must be in [0, 1]")
    v = raster.values.astype(np.float32).astype(np.float64)
    visible = v >= cfilter.t_min
    if cfilter.t_max > cfilter.t_min:
        t = (v - cfilter.t_min) / (cfilter.t_max - cfilter.t_min)
    else:
        t = np.ones_like(v)  # step: everything visible takes the rightmost color
    rgb = rainbow_rgb(t, reverse=cfilter.reversed)
    alpha = np.where(visible, int(math.floor(255.0 * opacity + 0.5)), 0).astype(np.uint8)
    rgba = np.concatenate([rgb, alpha[..., None]], axis=-1)
    rgba[~visible] = 0
    return rgba


def save_png(rgba: np.ndarray, path) -> None:
    Image.fromarray(rgba, mode="RGBA").save(path, format="PNG")


def load_png(path) -> np.ndarray:
    return np.asarray(Image.open(path).convert("RGBA"))
