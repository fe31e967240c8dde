/**
 * Canvas rendering for the map panel: base layer (slippy tiles, or a blank
 * graticule when offline), the colorized metric layer, and reference
 * overlays (POI dots, division boundaries, star plots, selection
 * highlights).
 */
import { applyColorFilter, type ColorFilter } from "./color.js";
import { glyphFill, glyphPolygon } from "./starplot.js";
import type { PoiDot, StarPlotDatum } from "./api.js";

export type Bbox = [number, number, number, number]; // lonMin, latMin, lonMax, latMax

export interface PixelMapper {
  toPixel(lon: number, lat: number): [number, number];
}

export function makeMapper(bbox: Bbox, width: number, height: number): PixelMapper {
  const [lonMin, latMin, lonMax, latMax] = bbox;
  return {
    toPixel(lon: number, lat: number): [number, number] {
      return [
        ((lon - lonMin) / (lonMax - lonMin)) * width,
        ((latMax - lat) / (latMax - latMin)) * height,
      ];
    },
  };
}

/** Slippy-map tile coordinates covering a bbox at one zoom level. */
export function tilesForBbox(
  bbox: Bbox,
  z: number,
): { z: number; x: number; y: number }[] {
  const toTile = (lon: number, lat: number): [number, number] => {
    const n = 2 ** z;
    const x = Math.floor(((lon + 180) / 360) * n);
    const latRad = (lat * Math.PI) / 180;
    const y = Math.floor(
      ((1 - Math.log(Math.tan(latRad) + 1 / Math.cos(latRad)) / Math.PI) / 2) * n,
    );
    const clamp = (v: number): number => Math.min(Math.max(v, 0), n - 1);
    return [clamp(x), clamp(y)];
  };
  const [x0, y1] = toTile(bbox[0], bbox[1]);
  const [x1, y0] = toTile(bbox[2], bbox[3]);
  const tiles = [];
  for (let y = y0; y <= y1; y++) {
    for (let x = x0; x <= x1; x++) {
      tiles.push({ z, x, y });
    }
  }
  return tiles;
}

export function tileUrl(template: string, t: { z: number; x: number; y: number }): string {
  return template
    .replace("{z}", String(t.z))
    .replace("{x}", String(t.x))
    .replace("{y}", String(t.y));
}

/** Offline base layer: a plain graticule so the client works with no network. */
export function drawGraticule(
  ctx: CanvasRenderingContext2D,
  bbox: Bbox,
  width: number,
  height: number,
  stepDeg = 0.01,
): void {
  ctx.fillStyle = "#f4f2ee";
  ctx.fillRect(0, 0, width, height);
  ctx.strokeStyle = "#d9d4cc";
  ctx.lineWidth = 1;
  const mapper = makeMapper(bbox, width, height);
  const [lonMin, latMin, lonMax, latMax] = bbox;
  for (let lon = Math.ceil(lonMin / stepDeg) * stepDeg; lon <= lonMax; lon += stepDeg) {
    const [x] = mapper.toPixel(lon, latMin);
    ctx.beginPath();
    ctx.moveTo(x, 0);
    ctx.lineTo(x, height);
    ctx.stroke();
  }
  for (let lat = Math.ceil(latMin / stepDeg) * stepDeg; lat <= latMax; lat += stepDeg) {
    const [, y] = mapper.toPixel(lonMin, lat);
    ctx.beginPath();
    ctx.moveTo(0, y);
    ctx.lineTo(width, y);
    ctx.stroke();
  }
}

/** Colorize a raster client-side and composite it over the base layer. */
export function drawMetricLayer(
  ctx: CanvasRenderingContext2D,
  values: Float32Array,
  width: number,
  height: number,
  filter: ColorFilter,
  opacity: number,
): void {
  const rgba = applyColorFilter(values, width, height, filter, opacity);
  const image = ctx.createImageData(width, height);
  image.data.set(rgba);
  ctx.putImageData(image, 0, 0);
}

/** Base layer from a slippy-tile provider; resolves once every tile drew. */
export async function drawTiles(
  ctx: CanvasRenderingContext2D,
  template: string,
  bbox: Bbox,
  width: number,
  height: number,
  zoomLevel = 14,
): Promise<void> {
  const tiles = tilesForBbox(bbox, zoomLevel);
  const n = 2 ** zoomLevel;
  const lonOf = (x: number): number => (x / n) * 360 - 180;
  const latOf = (y: number): number => {
    const t = Math.PI - (2 * Math.PI * y) / n;
    return (180 / Math.PI) * Math.atan(0.5 * (Math.exp(t) - Math.exp(-t)));
  };
  const mapper = makeMapper(bbox, width, height);
  await Promise.all(
    tiles.map(
      (tile) =>
        new Promise<void>((resolve) => {
          const img = new Image();
          img.crossOrigin = "anonymous";
          img.onload = () => {
            const [x0, y0] = mapper.toPixel(lonOf(tile.x), latOf(tile.y));
            const [x1, y1] = mapper.toPixel(lonOf(tile.x + 1), latOf(tile.y + 1));
            ctx.drawImage(img, x0, y0, x1 - x0, y1 - y0);
            resolve();
          };
          img.onerror = () => resolve(); // missing tiles leave the graticule visible
          img.src = tileUrl(template, tile);
        }),
    ),
  );
}

export function drawPois(
  ctx: CanvasRenderingContext2D,
  pois: PoiDot[],
  mapper: PixelMapper,
): void {
  ctx.fillStyle = "#222";
  for (const poi of pois) {
    const [x, y] = mapper.toPixel(poi.lon, poi.lat);
    ctx.beginPath();
    ctx.arc(x, y, 2.5, 0, Math.PI * 2);
    ctx.fill();
  }
}

export function drawDivisionRings(
  ctx: CanvasRenderingContext2D,
  rings: [number, number][][],
  mapper: PixelMapper,
): void {
  ctx.strokeStyle = "#5a5a5a";
  ctx.lineWidth = 1.2;
  for (const ring of rings) {
    ctx.beginPath();
    ring.forEach(([lon, lat], i) => {
      const [x, y] = mapper.toPixel(lon, lat);
      if (i === 0) {
        ctx.moveTo(x, y);
      } else {
        ctx.lineTo(x, y);
      }
    });
    ctx.stroke();
  }
}

export function drawStarPlots(
  ctx: CanvasRenderingContext2D,
  plots: { datum: StarPlotDatum; center: [number, number] }[],
  maxRadius = 28,
): void {
  for (const { datum, center } of plots) {
    const polygon = glyphPolygon(datum, center[0], center[1], maxRadius);
    ctx.beginPath();
    polygon.forEach((p, i) => (i === 0 ? ctx.moveTo(p.x, p.y) : ctx.lineTo(p.x, p.y)));
    ctx.closePath();
    ctx.fillStyle = glyphFill(datum);
    ctx.fill();
    ctx.strokeStyle = "#7a1f1f";
    ctx.lineWidth = 1;
    ctx.stroke();
  }
}

export function drawRectHighlight(
  ctx: CanvasRenderingContext2D,
  rect: Bbox,
  mapper: PixelMapper,
): void {
  const [x0, y0] = mapper.toPixel(rect[0], rect[3]);
  const [x1, y1] = mapper.toPixel(rect[2], rect[1]);
  ctx.strokeStyle = "#1463c8";
  ctx.lineWidth = 2;
  ctx.strokeRect(x0, y0, x1 - x0, y1 - y0);
}
