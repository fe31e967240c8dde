/**
 * App wiring: configuration panel on the left, metric map in the middle,
 * statistics panel on the right, comparison boards below. The metric layer
 * is colorized client-side, so threshold and opacity sliders re-render
 * without re-fetching; every panel keeps at most one in-flight request and
 * cancels it on supersession.
 */
import { ApiClient, type CityDescriptor } from "./api.js";
import { boardFromDescriptors, type BoardMode, ComparisonBoard } from "./compare.js";
import {
  drawDivisionRings,
  drawGraticule,
  drawMetricLayer,
  drawPois,
  drawRectHighlight,
  drawStarPlots,
  drawTiles,
  makeMapper,
  type Bbox,
} from "./maplayer.js";
import {
  drawClassBars,
  drawHistogram,
  pickThreshold,
  xToValue,
  type HistogramLayout,
} from "./statspanel.js";
import { decodeViewState, defaultViewState, encodeViewState, type ViewState } from "./viewState.js";

interface AppConfig {
  apiBaseUrl: string;
  tileTemplate: string; // empty string = offline graticule mode
}

const MAP_W = 800;
const MAP_H = 600;
const METRICS = ["vibrancy", "commutation", "diversity", "fluidity", "density"];
const FILTERS = [
  "all", "morning", "forenoon", "noon", "afternoon", "evening", "night",
  "midnight", "weekday", "weekend",
];

class PanelFetcher {
  private inflight: AbortController | null = null;

  /** Run one request, cancelling whatever this panel had in flight. */
  async run<T>(fn: (signal: AbortSignal) => Promise<T>): Promise<T | null> {
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    try {
      return await fn(controller.signal);
    } catch (err) {
      if ((err as Error).name === "AbortError") {
        return null;
      }
      throw err;
    } finally {
      if (this.inflight === controller) {
        this.inflight = null;
      }
    }
  }
}

class App {
  private readonly api: ApiClient;
  private state: ViewState;
  private cities: CityDescriptor[] = [];
  private raster: Float32Array | null = null;
  private rasterBbox: Bbox | null = null;
  private secondRaster: { values: Float32Array; range: [number, number] } | null = null;
  private board: ComparisonBoard | null = null;
  private histogramLayout: HistogramLayout | null = null;
  private histogramBound = false;
  private readonly mapFetch = new PanelFetcher();
  private readonly statsFetch = new PanelFetcher();

  constructor(private readonly config: AppConfig, private readonly root: Document) {
    this.api = new ApiClient(config.apiBaseUrl);
    const fromUrl = root.location?.search?.slice(1);
    this.state = fromUrl ? safeDecode(fromUrl) : defaultViewState();
  }

  async start(): Promise<void> {
    this.cities = await this.api.cities();
    if (!this.state.city && this.cities.length) {
      this.state.city = this.cities[0].name;
    }
    this.buildPanel();
    await this.refreshMap();
    await this.refreshStats(null);
  }

  private cityBbox(): Bbox {
    const city = this.cities.find((c) => c.name === this.state.city);
    if (!city) {
      throw new Error(`unknown city ${this.state.city}`);
    }
    return city.bbox;
  }

  private buildPanel(): void {
    const select = (id: string, options: string[], value: string): HTMLSelectElement => {
      const el = this.root.getElementById(id) as HTMLSelectElement;
      el.innerHTML = "";
      for (const opt of options) {
        const o = this.root.createElement("option");
        o.value = opt;
        o.textContent = opt;
        el.appendChild(o);
      }
      el.value = value;
      return el;
    };
    select("city", this.cities.map((c) => c.name), this.state.city)
      .addEventListener("change", (e) => {
        this.state.city = (e.target as HTMLSelectElement).value;
        void this.refreshMap();
      });
    select("metric", METRICS, this.state.metric).addEventListener("change", (e) => {
      this.state.metric = (e.target as HTMLSelectElement).value;
      void this.refreshMap();
    });
    select("filter", FILTERS, this.state.filter).addEventListener("change", (e) => {
      this.state.filter = (e.target as HTMLSelectElement).value;
      void this.refreshMap();
    });
    this.bindSlider("opacity", () => this.renderMap());
    this.bindSlider("tmin", () => this.renderMap());
    this.bindSlider("tmax", () => this.renderMap());
    (this.root.getElementById("reversed") as HTMLInputElement).addEventListener(
      "change",
      (e) => {
        this.state.color.reversed = (e.target as HTMLInputElement).checked;
        this.renderMap();
      },
    );
    for (const mode of ["time", "week", "city"] as BoardMode[]) {
      this.root.getElementById(`compare-${mode}`)?.addEventListener("click", () => {
        void this.openComparison(mode);
      });
    }
    const canvas = this.root.getElementById("map") as HTMLCanvasElement;
    canvas.addEventListener("click", (e) => {
      const rect = canvas.getBoundingClientRect();
      void this.refreshStats([
        ((e.clientX - rect.left) / rect.width) * MAP_W,
        ((e.clientY - rect.top) / rect.height) * MAP_H,
      ]);
    });
  }

  private bindSlider(id: string, after: () => void): void {
    const el = this.root.getElementById(id) as HTMLInputElement;
    el.addEventListener("input", () => {
      const v = Number(el.value);
      if (id === "opacity") {
        this.state.opacity = v;
      } else if (id === "tmin") {
        this.state.color.tMin = Math.min(v, this.state.color.tMax);
      } else {
        this.state.color.tMax = Math.max(v, this.state.color.tMin);
      }
      after();
    });
  }

  private async refreshMap(): Promise<void> {
    const bbox = this.cityBbox();
    const decoded = await this.mapFetch.run((signal) =>
      this.api.raster(
        {
          city: this.state.city,
          metric: this.state.metric,
          filter: this.state.filter,
          bbox,
          width: MAP_W,
          height: MAP_H,
          zoom: this.state.zoom,
        },
        signal,
      ),
    );
    if (!decoded) {
      return; // superseded
    }
    this.raster = decoded.values;
    this.rasterBbox = bbox;
    this.secondRaster = null;
    if (this.state.overlay.secondMetric) {
      const second = await this.api.raster({
        city: this.state.city,
        metric: this.state.overlay.secondMetric,
        filter: this.state.filter,
        bbox,
        width: MAP_W,
        height: MAP_H,
        zoom: this.state.zoom,
      });
      this.secondRaster = { values: second.values, range: second.header.value_range };
    }
    const [lo, hi] = decoded.header.value_range;
    this.state.color.tMin = lo;
    this.state.color.tMax = hi;
    this.syncSliders(lo, hi);
    this.renderMap();
  }

  private syncSliders(lo: number, hi: number): void {
    for (const [id, value] of [["tmin", lo], ["tmax", hi]] as [string, number][]) {
      const el = this.root.getElementById(id) as HTMLInputElement;
      el.min = String(lo);
      el.max = String(hi);
      el.step = String((hi - lo) / 200 || 1);
      el.value = String(value);
    }
  }

  /** Pure client-side re-render: palette changes never re-fetch. */
  private renderMap(): void {
    const canvas = this.root.getElementById("map") as HTMLCanvasElement;
    const ctx = canvas.getContext("2d");
    if (!ctx || !this.raster || !this.rasterBbox) {
      return;
    }
    drawGraticule(ctx, this.rasterBbox, MAP_W, MAP_H);
    if (this.config.tileTemplate) {
      void drawTiles(ctx, this.config.tileTemplate, this.rasterBbox, MAP_W, MAP_H);
    }
    const layer = this.root.createElement("canvas") as HTMLCanvasElement;
    layer.width = MAP_W;
    layer.height = MAP_H;
    const lctx = layer.getContext("2d");
    if (lctx) {
      drawMetricLayer(lctx, this.raster, MAP_W, MAP_H, this.state.color, this.state.opacity);
      if (this.secondRaster && this.state.overlay.secondMetric) {
        // "+" split: right half shows the companion metric with its own ramp
        const half = Math.floor(MAP_W / 2);
        const [lo, hi] = this.secondRaster.range;
        const rightLayer = this.root.createElement("canvas") as HTMLCanvasElement;
        rightLayer.width = MAP_W;
        rightLayer.height = MAP_H;
        const rctx = rightLayer.getContext("2d");
        if (rctx) {
          drawMetricLayer(rctx, this.secondRaster.values, MAP_W, MAP_H,
                          { tMin: lo, tMax: hi, reversed: this.state.color.reversed },
                          this.state.opacity);
          lctx.clearRect(half, 0, MAP_W - half, MAP_H);
          lctx.drawImage(rightLayer, half, 0, MAP_W - half, MAP_H,
                         half, 0, MAP_W - half, MAP_H);
        }
      }
      ctx.drawImage(layer, 0, 0);
    }
    void this.renderOverlays(ctx);
    this.pushUrl();
  }

  /** Reference overlays: division boundaries, star-plot glyphs, POI dots. */
  private async renderOverlays(ctx: CanvasRenderingContext2D): Promise<void> {
    if (!this.rasterBbox) {
      return;
    }
    const mapper = makeMapper(this.rasterBbox, MAP_W, MAP_H);
    const overlay = this.state.overlay;
    if (overlay.divisions || overlay.facet) {
      const level = overlay.divisions ?? "DIV";
      const divisions = await this.api.divisions(this.state.city, level);
      drawDivisionRings(ctx, divisions.flatMap((d) => d.rings), mapper);
      if (overlay.facet) {
        const plots = await this.api.starplot(this.state.city, level, this.state.filter);
        const byId = new Map(divisions.map((d) => [d.id, d.centroid]));
        drawStarPlots(
          ctx,
          plots
            .filter((p) => byId.has(p.region_id))
            .map((p) => {
              const [lon, lat] = byId.get(p.region_id) as [number, number];
              const [x, y] = mapper.toPixel(lon, lat);
              return { datum: p, center: [x, y] as [number, number] };
            }),
        );
      }
    }
    if (overlay.poiClass !== null) {
      const pois = await this.api.pois({
        city: this.state.city,
        poiClass: overlay.poiClass,
        metric: this.state.metric,
        filter: this.state.filter,
        q: overlay.poiQuantile,
      });
      drawPois(ctx, pois, mapper);
    }
  }

  private async refreshStats(clickPx: [number, number] | null): Promise<void> {
    const bbox = this.rasterBbox ?? this.cityBbox();
    const selection = clickPx
      ? {
          kind: "iso_point",
          point: [
            bbox[0] + (clickPx[0] / MAP_W) * (bbox[2] - bbox[0]),
            bbox[3] - (clickPx[1] / MAP_H) * (bbox[3] - bbox[1]),
          ],
          tolerance: (this.state.color.tMax - this.state.color.tMin) / 20 || 0.01,
          metric: this.state.metric,
        }
      : { kind: "rect", rect: [...bbox] };
    const stats = await this.statsFetch.run((signal) =>
      this.api.regionStats(
        {
          city: this.state.city,
          metrics: METRICS,
          filter: this.state.filter,
          selection,
        },
        signal,
      ),
    );
    if (!stats) {
      return;
    }
    const list = this.root.getElementById("stats");
    if (list) {
      list.innerHTML = "";
      for (const [name, entry] of Object.entries(stats.metrics)) {
        const li = this.root.createElement("li");
        li.textContent =
          entry.mean === null
            ? `${name}: no data`
            : `${name}: ${entry.mean.toFixed(4)} (${entry.count} records)`;
        list.appendChild(li);
      }
    }
    await this.refreshHistogramPanel();
    this.renderClassBars(stats.poi_breakdown);
    if (clickPx && stats.cells && this.rasterBbox) {
      this.highlightIsoCells(stats.cells);
    }
  }

  /** Histogram view; clicking it repositions the nearer color threshold. */
  private async refreshHistogramPanel(): Promise<void> {
    const canvas = this.root.getElementById("histogram") as HTMLCanvasElement | null;
    const ctx = canvas?.getContext("2d");
    if (!canvas || !ctx) {
      return;
    }
    const hist = await this.api.histogram(
      this.state.city, this.state.metric, this.state.filter, 40,
    );
    const layout = drawHistogram(ctx, hist, this.state.color, canvas.width, canvas.height);
    if (!this.histogramBound) {
      this.histogramBound = true;
      canvas.addEventListener("click", (e) => {
        const rect = canvas.getBoundingClientRect();
        const value = xToValue(
          this.histogramLayout ?? layout,
          ((e.clientX - rect.left) / rect.width) * canvas.width,
        );
        this.state.color = pickThreshold(this.state.color, value);
        this.syncSliders(this.state.color.tMin, this.state.color.tMax);
        this.renderMap(); // palette-only change: no re-fetch
        void this.refreshHistogramPanel();
      });
    }
    this.histogramLayout = layout;
  }

  private renderClassBars(shares: number[] | null): void {
    const canvas = this.root.getElementById("classbars") as HTMLCanvasElement | null;
    const ctx = canvas?.getContext("2d");
    if (!canvas || !ctx || !shares) {
      return;
    }
    drawClassBars(ctx, shares, shares.map((_s, i) => String(i)), canvas.width, canvas.height);
  }

  /** Outline every cell whose metric value matches the clicked one. */
  private highlightIsoCells(cells: [number, number][]): void {
    const canvas = this.root.getElementById("map") as HTMLCanvasElement;
    const ctx = canvas.getContext("2d");
    const city = this.cities.find((c) => c.name === this.state.city);
    if (!ctx || !city || !this.rasterBbox) {
      return;
    }
    const mapper = makeMapper(this.rasterBbox, MAP_W, MAP_H);
    const stepLon = (city.bbox[2] - city.bbox[0]) / city.lattice.cols;
    const stepLat = (city.bbox[3] - city.bbox[1]) / city.lattice.rows;
    ctx.strokeStyle = "#101010";
    ctx.lineWidth = 1;
    for (const [col, row] of cells.slice(0, 5000)) {
      const lon = city.bbox[0] + col * stepLon;
      const lat = city.bbox[1] + row * stepLat;
      const [x0, y0] = mapper.toPixel(lon - stepLon / 2, lat + stepLat / 2);
      const [x1, y1] = mapper.toPixel(lon + stepLon / 2, lat - stepLat / 2);
      ctx.strokeRect(x0, y0, x1 - x0, y1 - y0);
    }
  }

  private async openComparison(mode: BoardMode): Promise<void> {
    const bundle = await this.api.compare(
      mode === "city"
        ? { mode, metric: this.state.metric, cities: this.cities.map((c) => c.name).slice(0, 4).join(",") }
        : { mode, metric: this.state.metric, city: this.state.city },
    );
    this.board = boardFromDescriptors(mode as BoardMode, bundle.subviews);
    this.state.compare = mode;
    const host = this.root.getElementById("compare-grid");
    if (!host) {
      return;
    }
    host.innerHTML = "";
    this.board.subviews.forEach((sv) => {
      const cell = this.root.createElement("div");
      cell.className = "compare-cell";
      const label = this.root.createElement("div");
      label.textContent = sv.label;
      const canvas = this.root.createElement("canvas") as HTMLCanvasElement;
      canvas.width = 260;
      canvas.height = 200;
      cell.append(label, canvas);
      host.appendChild(cell);
      void this.renderSubView(sv, canvas);
    });
    this.pushUrl();
  }

  private async renderSubView(
    sv: { city: string; metric: string; filter: string; rect: unknown },
    canvas: HTMLCanvasElement,
  ): Promise<void> {
    const city = this.cities.find((c) => c.name === sv.city);
    const ctx = canvas.getContext("2d");
    if (!city || !ctx) {
      return;
    }
    const decoded = await this.api.raster({
      city: sv.city,
      metric: sv.metric,
      filter: sv.filter,
      bbox: city.bbox,
      width: canvas.width,
      height: canvas.height,
    });
    drawGraticule(ctx, city.bbox, canvas.width, canvas.height);
    const [lo, hi] = decoded.header.value_range;
    drawMetricLayer(ctx, decoded.values, canvas.width, canvas.height, {
      tMin: lo,
      tMax: hi,
      reversed: this.state.color.reversed,
    }, this.state.opacity);
    if (sv.rect) {
      drawRectHighlight(
        ctx,
        sv.rect as Bbox,
        makeMapper(city.bbox, canvas.width, canvas.height),
      );
    }
  }

  private pushUrl(): void {
    try {
      const query = encodeViewState(this.state);
      this.root.defaultView?.history.replaceState(null, "", `?${query}`);
    } catch {
      // non-browser host (tests): URL sync is cosmetic
    }
  }
}

function safeDecode(query: string): ViewState {
  try {
    return decodeViewState(query);
  } catch {
    return defaultViewState();
  }
}

export async function boot(doc: Document): Promise<App> {
  const resp = await fetch("./config.json");
  const config = (await resp.json()) as AppConfig;
  const app = new App(config, doc);
  await app.start();
  return app;
}

if (typeof document !== "undefined" && document.getElementById("map")) {
  boot(document).catch((err) => {
    const toast = document.getElementById("error-toast");
    if (toast) {
      toast.textContent = String(err);
      toast.removeAttribute("hidden");
    }
  });
}
