/**
 * Statistics panel drawing: the grid-mean histogram (which doubles as the
 * interactive picker for the double color-map thresholds) and the user
 * class-distribution bars that explain why a region's metric is high or low.
 */
import type { Histogram } from "./api.js";
import type { ColorFilter } from "./color.js";
import { rainbowRgb } from "./color.js";

export interface HistogramLayout {
  width: number;
  height: number;
  lo: number;
  hi: number;
}

export function valueToX(layout: HistogramLayout, value: number): number {
  if (layout.hi <= layout.lo) {
    return 0;
  }
  return ((value - layout.lo) / (layout.hi - layout.lo)) * layout.width;
}

export function xToValue(layout: HistogramLayout, x: number): number {
  return layout.lo + (Math.min(Math.max(x, 0), layout.width) / layout.width) *
    (layout.hi - layout.lo);
}

/**
 * A histogram click moves whichever threshold is nearer to the picked
 * value, preserving tMin <= tMax.
 */
export function pickThreshold(filter: ColorFilter, value: number): ColorFilter {
  const nearMin = Math.abs(value - filter.tMin) <= Math.abs(value - filter.tMax);
  const next = nearMin ? { ...filter, tMin: value } : { ...filter, tMax: value };
  if (next.tMin > next.tMax) {
    return nearMin ? { ...next, tMax: next.tMin } : { ...next, tMin: next.tMax };
  }
  return next;
}

export function drawHistogram(
  ctx: CanvasRenderingContext2D,
  hist: Histogram,
  filter: ColorFilter,
  width: number,
  height: number,
): HistogramLayout {
  const lo = hist.edges[0];
  const hi = hist.edges[hist.edges.length - 1];
  const layout: HistogramLayout = { width, height, lo, hi };
  ctx.clearRect(0, 0, width, height);
  const peak = Math.max(...hist.densities, 1e-12);
  for (let i = 0; i < hist.densities.length; i++) {
    const x0 = valueToX(layout, hist.edges[i]);
    const x1 = valueToX(layout, hist.edges[i + 1]);
    const h = (hist.densities[i] / peak) * (height - 4);
    const mid = (hist.edges[i] + hist.edges[i + 1]) / 2;
    if (mid < filter.tMin) {
      ctx.fillStyle = "#c9c9c9"; // below threshold: removed from the layer
    } else {
      const span = filter.tMax - filter.tMin;
      const t = span > 0 ? (mid - filter.tMin) / span : 1.0;
      const [r, g, b] = rainbowRgb(t, filter.reversed);
      ctx.fillStyle = `rgb(${r}, ${g}, ${b})`;
    }
    ctx.fillRect(x0, height - h, Math.max(x1 - x0 - 0.5, 0.5), h);
  }
  // threshold markers
  ctx.strokeStyle = "#111";
  ctx.lineWidth = 1.5;
  for (const t of [filter.tMin, filter.tMax]) {
    const x = valueToX(layout, t);
    ctx.beginPath();
    ctx.moveTo(x, 0);
    ctx.lineTo(x, height);
    ctx.stroke();
  }
  return layout;
}

export function drawClassBars(
  ctx: CanvasRenderingContext2D,
  shares: number[],
  labels: string[],
  width: number,
  height: number,
): void {
  ctx.clearRect(0, 0, width, height);
  const n = shares.length;
  if (!n) {
    return;
  }
  const peak = Math.max(...shares, 1e-12);
  const slot = width / n;
  ctx.fillStyle = "#4a7fb5";
  ctx.font = "9px system-ui, sans-serif";
  shares.forEach((share, i) => {
    const h = (share / peak) * (height - 14);
    ctx.fillStyle = "#4a7fb5";
    ctx.fillRect(i * slot + 1, height - 12 - h, slot - 2, h);
    ctx.fillStyle = "#333";
    ctx.fillText(labels[i] ?? String(i), i * slot + 1, height - 2, slot - 2);
  });
}
