/**
 * Client-side colorization of metric rasters.
 *
 * This mirrors the server's PNG export contract exactly so that threshold
 * slider changes never need a raster re-fetch: values below tMin are fully
 * transparent, values at or above tMax take the rightmost ramp color, and
 * the range in between maps linearly onto the blue-to-red rainbow
 * (hue 240deg -> 0deg, full saturation, half lightness). Rasters travel as
 * float32, and the server quantizes to float32 before colorizing too, so
 * the two sides see identical numbers.
 */

export interface ColorFilter {
  tMin: number;
  tMax: number;
  reversed: boolean;
}

export function clamp01(t: number): number {
  return Math.min(Math.max(t, 0), 1);
}

/** Ramp position t in [0,1] to RGB bytes (HSL hue sweep, S=1, L=0.5). */
export function rainbowRgb(t: number, reverse: boolean): [number, number, number] {
  const tt = clamp01(t);
  const hue = reverse ? 240 * tt : 240 * (1 - tt);
  const hp = hue / 60;
  const x = 1 - Math.abs((hp % 2) - 1);
  let r: number;
  let g: number;
  let b: number;
  if (hp < 1) {
    [r, g, b] = [1, x, 0];
  } else if (hp < 2) {
    [r, g, b] = [x, 1, 0];
  } else if (hp < 3) {
    [r, g, b] = [0, 1, x];
  } else if (hp < 4) {
    [r, g, b] = [0, x, 1];
  } else if (hp < 5) {
    [r, g, b] = [x, 0, 1];
  } else {
    [r, g, b] = [1, 0, x];
  }
  return [
    Math.floor(r * 255 + 0.5),
    Math.floor(g * 255 + 0.5),
    Math.floor(b * 255 + 0.5),
  ];
}

/**
 * Colorize a row-major raster into RGBA bytes.
 *
 * Equal thresholds degrade to a step function (below: transparent,
 * at/above: rightmost color). Opacity only affects the alpha of visible
 * pixels; hidden pixels are fully zeroed.
 */
export function applyColorFilter(
  values: Float32Array,
  width: number,
  height: number,
  filter: ColorFilter,
  opacity = 1.0,
): Uint8ClampedArray {
  if (filter.tMin > filter.tMax) {
    throw new Error("tMin must not exceed tMax");
  }
  if (opacity < 0 || opacity > 1) {
    throw new Error("opacity must be in [0, 1]");
  }
  const out = new Uint8ClampedArray(width * height * 4);
  const span = filter.tMax - filter.tMin;
  const alpha = Math.floor(255 * opacity + 0.5);
  for (let i = 0; i < width * height; i++) {
    const v = values[i];
    if (!(v >= filter.tMin)) {
      continue; // below threshold: transparent, already zeroed
    }
    const t = span > 0 ? (v - filter.tMin) / span : 1.0;
    const [r, g, b] = rainbowRgb(t, filter.reversed);
    const o = i * 4;
    out[o] = r;
    out[o + 1] = g;
    out[o + 2] = b;
    out[o + 3] = alpha;
  }
  return out;
}
