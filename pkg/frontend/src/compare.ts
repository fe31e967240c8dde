/**
 * Coordination model for the comparison displays.
 *
 * Time (3x2) and week (2x1) boards show the same city under different time
 * filters, so pan/zoom and rectangle selections are synchronized across
 * every sub-view. City boards (up to 2x2) show different maps: navigation
 * and rectangle selection stay local to each sub-view, while iso-value
 * point selection is shared everywhere so metric levels can be compared
 * across cities.
 */

export interface Viewport {
  center: [number, number];
  zoom: number;
}

export interface Rect {
  lonMin: number;
  latMin: number;
  lonMax: number;
  latMax: number;
}

export interface IsoSelection {
  value: number;
  tolerance: number;
}

export interface SubView {
  label: string;
  city: string;
  metric: string;
  filter: string;
  viewport: Viewport;
  rect: Rect | null;
  iso: IsoSelection | null;
}

export type BoardMode = "time" | "week" | "city";

export interface CompareDescriptor {
  label: string;
  city: string;
  metric: string;
  filter: string;
  bbox: [number, number, number, number];
}

export class ComparisonBoard {
  readonly mode: BoardMode;
  readonly subviews: SubView[];

  constructor(mode: BoardMode, subviews: SubView[]) {
    const limits: Record<BoardMode, [number, number]> = {
      time: [2, 6],
      week: [2, 2],
      city: [2, 4],
    };
    const [lo, hi] = limits[mode];
    if (subviews.length < lo || subviews.length > hi) {
      throw new Error(`${mode} comparison supports ${lo}..${hi} sub-views`);
    }
    this.mode = mode;
    this.subviews = subviews;
  }

  /** Time and week sub-views share one synchronized viewport. */
  get sharedViewport(): boolean {
    return this.mode !== "city";
  }

  private targets(index: number): SubView[] {
    return this.sharedViewport ? this.subviews : [this.subviews[index]];
  }

  pan(index: number, dLon: number, dLat: number): void {
    for (const sv of this.targets(index)) {
      sv.viewport = {
        center: [sv.viewport.center[0] + dLon, sv.viewport.center[1] + dLat],
        zoom: sv.viewport.zoom,
      };
    }
  }

  zoomBy(index: number, factor: number): void {
    if (factor <= 0) {
      throw new Error("zoom factor must be positive");
    }
    for (const sv of this.targets(index)) {
      sv.viewport = { center: sv.viewport.center, zoom: sv.viewport.zoom * factor };
    }
  }

  /** Rectangle selections echo across synchronized sub-views only. */
  selectRect(index: number, rect: Rect | null): void {
    for (const sv of this.targets(index)) {
      sv.rect = rect ? { ...rect } : null;
    }
  }

  /** Iso-value point selection is shared in every mode. */
  selectIso(iso: IsoSelection | null): void {
    for (const sv of this.subviews) {
      sv.iso = iso ? { ...iso } : null;
    }
  }
}

export function boardFromDescriptors(
  mode: BoardMode,
  descriptors: CompareDescriptor[],
  zoom = 1,
): ComparisonBoard {
  const subviews = descriptors.map((d) => ({
    label: d.label,
    city: d.city,
    metric: d.metric,
    filter: d.filter,
    viewport: {
      center: [(d.bbox[0] + d.bbox[2]) / 2, (d.bbox[1] + d.bbox[3]) / 2] as [number, number],
      zoom,
    },
    rect: null,
    iso: null,
  }));
  return new ComparisonBoard(mode, subviews);
}
