/**
 * Typed client for the urbanmetrics HTTP API. All endpoints are read-only;
 * errors arrive as JSON {code, message}.
 */
import { decodeRaster, type DecodedRaster } from "./rasterWire.js";
import type { CompareDescriptor } from "./compare.js";

export interface CityDescriptor {
  name: string;
  bbox: [number, number, number, number];
  lattice: { cols: number; rows: number; step_m: number };
  division_levels: string[];
  cached_metrics: string[];
  cached_filters: string[];
  epoch: string;
}

export interface Histogram {
  edges: number[];
  densities: number[];
  counts: number[];
}

export interface RegionStats {
  n_cells: number;
  metrics: Record<string, { mean: number | null; count: number }>;
  poi_breakdown: number[] | null;
  div_breakdown: { index: number; share: number; id?: string }[] | null;
  cells: [number, number][] | null;
}

export interface StarPlotDatum {
  region_id: string;
  axes: { fluidity: number; vibrancy: number; commutation: number; diversity: number };
  density_norm: number;
  means: Record<string, number | null>;
  density_mean: number | null;
}

export interface CompareBundle {
  mode: string;
  shared_viewport: boolean;
  subviews: CompareDescriptor[];
}

export interface PoiDot {
  id: string;
  class_id: number;
  lon: number;
  lat: number;
  kind: string;
  radius_m: number;
}

export interface DivisionShape {
  id: string;
  name: string;
  level: string;
  rings: [number, number][][];
  centroid: [number, number];
  demographics: Record<string, number>;
}

export interface RasterRequest {
  city: string;
  metric: string;
  filter?: string;
  bbox?: [number, number, number, number];
  width?: number;
  height?: number;
  zoom?: number;
  radiusPx?: number;
  adaptive?: boolean;
}

export class ApiError extends Error {
  readonly code: number;

  constructor(code: number, message: string) {
    super(message);
    this.code = code;
  }
}

export class ApiClient {
  constructor(private readonly baseUrl: string) {}

  private url(path: string, params: Record<string, string | number | boolean | undefined>): string {
    const q = new URLSearchParams();
    for (const [key, value] of Object.entries(params)) {
      if (value !== undefined) {
        q.set(key, String(value));
      }
    }
    const qs = q.toString();
    return `${this.baseUrl}${path}${qs ? `?${qs}` : ""}`;
  }

  private async check(resp: Response): Promise<Response> {
    if (!resp.ok) {
      let message = resp.statusText;
      try {
        const body = (await resp.json()) as { code?: number; message?: string };
        message = body.message ?? message;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(resp.status, message);
    }
    return resp;
  }

  async cities(signal?: AbortSignal): Promise<CityDescriptor[]> {
    const resp = await this.check(await fetch(this.url("/cities", {}), { signal }));
    return (await resp.json()) as CityDescriptor[];
  }

  async raster(req: RasterRequest, signal?: AbortSignal): Promise<DecodedRaster> {
    const resp = await this.check(
      await fetch(
        this.url("/raster", {
          city: req.city,
          metric: req.metric,
          filter: req.filter,
          bbox: req.bbox?.join(","),
          width: req.width,
          height: req.height,
          zoom: req.zoom,
          radius_px: req.radiusPx,
          adaptive: req.adaptive,
        }),
        { signal },
      ),
    );
    return decodeRaster(await resp.arrayBuffer());
  }

  async histogram(
    city: string,
    metric: string,
    filter: string,
    bins: number,
    signal?: AbortSignal,
  ): Promise<Histogram> {
    const resp = await this.check(
      await fetch(this.url("/histogram", { city, metric, filter, bins }), { signal }),
    );
    return (await resp.json()) as Histogram;
  }

  async regionStats(
    body: {
      city: string;
      metrics: string[];
      filter: string;
      selection: Record<string, unknown>;
    },
    signal?: AbortSignal,
  ): Promise<RegionStats> {
    const resp = await this.check(
      await fetch(`${this.baseUrl}/region/stats`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(body),
        signal,
      }),
    );
    return (await resp.json()) as RegionStats;
  }

  async starplot(
    city: string,
    level: string,
    filter: string,
    signal?: AbortSignal,
  ): Promise<StarPlotDatum[]> {
    const resp = await this.check(
      await fetch(this.url("/starplot", { city, level, filter }), { signal }),
    );
    return (await resp.json()) as StarPlotDatum[];
  }

  async compare(
    params: { mode: string; metric?: string; city?: string; cities?: string; filter?: string },
    signal?: AbortSignal,
  ): Promise<CompareBundle> {
    const resp = await this.check(await fetch(this.url("/compare", params), { signal }));
    return (await resp.json()) as CompareBundle;
  }

  async divisions(city: string, level: string, signal?: AbortSignal): Promise<DivisionShape[]> {
    const resp = await this.check(
      await fetch(this.url("/divisions", { city, level }), { signal }),
    );
    return (await resp.json()) as DivisionShape[];
  }

  async pois(
    params: { city: string; poiClass: number; metric: string; filter: string; q: number },
    signal?: AbortSignal,
  ): Promise<PoiDot[]> {
    const resp = await this.check(
      await fetch(
        this.url("/pois", {
          city: params.city,
          class: params.poiClass,
          metric: params.metric,
          filter: params.filter,
          q: params.q,
        }),
        { signal },
      ),
    );
    return (await resp.json()) as PoiDot[];
  }
}
