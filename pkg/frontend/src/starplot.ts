/**
 * Star-plot glyphs: the four mobility metrics on four fixed axes
 * (fluidity up, vibrancy right, commutation down, diversity left), with
 * record density mapped to the saturation of the red fill.
 */
import type { StarPlotDatum } from "./api.js";

export const STARPLOT_AXES = ["fluidity", "vibrancy", "commutation", "diversity"] as const;

const FILL_HUE = 0; // red
const FILL_LIGHTNESS = 50; // percent; "moderate lightness"

export interface GlyphPoint {
  x: number;
  y: number;
}

/** Polygon vertices for one glyph, centered at (cx, cy). */
export function glyphPolygon(
  datum: StarPlotDatum,
  cx: number,
  cy: number,
  maxRadius: number,
): GlyphPoint[] {
  return STARPLOT_AXES.map((axis, i) => {
    const value = Math.min(Math.max(datum.axes[axis], 0), 1);
    const angle = -Math.PI / 2 + (i * Math.PI) / 2; // start up, clockwise
    const r = value * maxRadius;
    return { x: cx + r * Math.cos(angle), y: cy + r * Math.sin(angle) };
  });
}

/** CSS color of the glyph fill; density drives the saturation. */
export function glyphFill(datum: StarPlotDatum, alpha = 0.85): string {
  const sat = Math.round(Math.min(Math.max(datum.density_norm, 0), 1) * 100);
  return `hsla(${FILL_HUE}, ${sat}%, ${FILL_LIGHTNESS}%, ${alpha})`;
}

export function axisEndpoints(
  cx: number,
  cy: number,
  maxRadius: number,
): [GlyphPoint, GlyphPoint][] {
  return STARPLOT_AXES.map((_axis, i) => {
    const angle = -Math.PI / 2 + (i * Math.PI) / 2;
    return [
      { x: cx, y: cy },
      { x: cx + maxRadius * Math.cos(angle), y: cy + maxRadius * Math.sin(angle) },
    ] as [GlyphPoint, GlyphPoint];
  });
}
