/**
 * The whole panel state in one serializable object, so any view is
 * reproducible from its URL. Nothing here mutates server state.
 */
import type { ColorFilter } from "./color.js";

export type CompareMode = "none" | "time" | "week" | "city";
export type DivisionLevel = "DIV" | "SUBDISTRICT";

export interface ViewState {
  city: string;
  metric: string;
  filter: string;
  center: [number, number];
  zoom: number;
  opacity: number;
  color: ColorFilter;
  overlay: {
    poiClass: number | null;
    poiQuantile: number;
    divisions: DivisionLevel | null;
    secondMetric: string | null;
    facet: boolean;
  };
  compare: CompareMode;
}

export function defaultViewState(city = "", metric = "vibrancy"): ViewState {
  return {
    city,
    metric,
    filter: "all",
    center: [0, 0],
    zoom: 1,
    opacity: 0.8,
    color: { tMin: 0, tMax: 1, reversed: false },
    overlay: {
      poiClass: null,
      poiQuantile: 0.1,
      divisions: null,
      secondMetric: null,
      facet: false,
    },
    compare: "none",
  };
}

export function validateViewState(s: ViewState): void {
  if (s.color.tMin > s.color.tMax) {
    throw new Error("color filter: tMin must not exceed tMax");
  }
  if (s.opacity < 0 || s.opacity > 1) {
    throw new Error("opacity out of range");
  }
  if (!["none", "time", "week", "city"].includes(s.compare)) {
    throw new Error(`unknown compare mode ${s.compare}`);
  }
}

const NUM = (v: string): number => {
  const n = Number(v);
  if (!Number.isFinite(n)) {
    throw new Error(`not a number: ${v}`);
  }
  return n;
};

/** Deep-linkable encoding; stable key order so equal states give equal URLs. */
export function encodeViewState(s: ViewState): string {
  validateViewState(s);
  const q = new URLSearchParams();
  q.set("city", s.city);
  q.set("metric", s.metric);
  q.set("filter", s.filter);
  q.set("lon", String(s.center[0]));
  q.set("lat", String(s.center[1]));
  q.set("zoom", String(s.zoom));
  q.set("opacity", String(s.opacity));
  q.set("tmin", String(s.color.tMin));
  q.set("tmax", String(s.color.tMax));
  q.set("rev", s.color.reversed ? "1" : "0");
  if (s.overlay.poiClass !== null) q.set("poi", String(s.overlay.poiClass));
  q.set("poiq", String(s.overlay.poiQuantile));
  if (s.overlay.divisions) q.set("div", s.overlay.divisions);
  if (s.overlay.secondMetric) q.set("m2", s.overlay.secondMetric);
  if (s.overlay.facet) q.set("facet", "1");
  if (s.compare !== "none") q.set("cmp", s.compare);
  return q.toString();
}

export function decodeViewState(query: string): ViewState {
  const q = new URLSearchParams(query);
  const need = (key: string): string => {
    const v = q.get(key);
    if (v === null) {
      throw new Error(`view state missing ${key}`);
    }
    return v;
  };
  const s: ViewState = {
    city: need("city"),
    metric: need("metric"),
    filter: need("filter"),
    center: [NUM(need("lon")), NUM(need("lat"))],
    zoom: NUM(need("zoom")),
    opacity: NUM(need("opacity")),
    color: {
      tMin: NUM(need("tmin")),
      tMax: NUM(need("tmax")),
      reversed: q.get("rev") === "1",
    },
    overlay: {
      poiClass: q.has("poi") ? NUM(need("poi")) : null,
      poiQuantile: NUM(need("poiq")),
      divisions: (q.get("div") as DivisionLevel | null) ?? null,
      secondMetric: q.get("m2"),
      facet: q.get("facet") === "1",
    },
    compare: (q.get("cmp") as CompareMode | null) ?? "none",
  };
  validateViewState(s);
  return s;
}
