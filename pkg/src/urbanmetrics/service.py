"""HTTP API over precomputed city caches.

All endpoints read from an immutable snapshot loaded at startup; nothing is
recomputed online except rasterization of cached fields, so identical
requests return identical bytes. Errors are JSON {code, message}. Rasters
travel as a little-endian u32 header length, a JSON header (width, height,
value_range) and float32 row-major pixels.
"""
from __future__ import annotations

import math

import numpy as np
from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel

from . import entropy, geo, raster
from .entropy import BAND_NAMES, MetricKind, TimeFilter
from .store import CityStore

DEMOGRAPHIC_METRICS = ("gdp", "population", "house_price")
DEFAULT_POI_QUANTILE = 0.1
STARPLOT_AXES = ("fluidity", "vibrancy", "commutation", "diversity")


class RegionSelection(BaseModel):
    kind: str  # rect | polygon | division | iso_point
    rect: list[float] | None = None
    ring: list[list[float]] | None = None
    division_id: str | None = None
    level: str = geo.LEVEL_DIV
    point: list[float] | None = None
    tolerance: float | None = None
    metric: str | None = None  # iso reference metric; defaults to the first requested


class RegionStatsRequest(BaseModel):
    city: str
    metrics: list[str]
    filter: str = "all"
    selection: RegionSelection


def _bad(status: int, message: str):
    raise HTTPException(status_code=status, detail=message)


def minmax_normalize(values: list) -> list:
    """City-wide min/max onto [0,1]; a collapsed spread maps to 0.5, gaps to 0."""
    present = [v for v in values if v is not None]
    if not present:
        return [0.0 for _ in values]
    lo, hi = min(present), max(present)
    if math.isclose(lo, hi):
        return [0.5 if v is not None else 0.0 for v in values]
    return [0.0 if v is None else (v - lo) / (hi - lo) for v in values]


def _get_city(app_store: CityStore, name: str):
    city = app_store.get(name)
    if city is None:
        _bad(404, f"unknown city {name!r}")
    return city


def _parse_filter(text: str) -> TimeFilter:
    try:
        return TimeFilter.parse(text)
    except ValueError as exc:
        _bad(422, str(exc))


def _get_field(city, metric: str, tfilter: TimeFilter):
    try:
        kind = MetricKind(metric)
    except ValueError:
        _bad(404, f"unknown metric {metric!r}")
    f = city.field_for(kind, tfilter)
    if f is None:
        _bad(404, f"no cached field for {kind.value}/{tfilter.slug}; run `uf metrics`")
    return f


def _parse_viewport(bbox: str, width: int, height: int, zoom: float) -> raster.Viewport:
    try:
        parts = tuple(float(x) for x in bbox.split(","))
        if len(parts) != 4:
            raise ValueError("bbox needs 4 numbers")
        return raster.Viewport(parts, width, height, zoom)
    except ValueError as exc:
        _bad(422, f"bad viewport: {exc}")


def _selection_mask(city, sel: RegionSelection, fields: dict):
    lattice = city.lattice
    if sel.kind == "rect":
        if not sel.rect or len(sel.rect) != 4:
            _bad(422, "rect selection needs [lon_min, lat_min, lon_max, lat_max]")
        lon_min, lat_min, lon_max, lat_max = sel.rect
        if lon_min > lon_max or lat_min > lat_max:
            _bad(422, "rect corners are inverted")
        return entropy.cells_in_rect(lattice, tuple(sel.rect))
    if sel.kind == "polygon":
        if not sel.ring or len(sel.ring) < 3:
            _bad(422, "polygon selection needs a ring of at least 3 points")
        ring = np.asarray(sel.ring, dtype=np.float64)
        if ring.ndim != 2 or ring.shape[1] != 2:
            _bad(422, "polygon ring must be [[lon, lat], ...]")
        return entropy.cells_in_polygon(lattice, [ring])
    if sel.kind == "division":
        divisions, cell_map = city.divisions_at(sel.level)
        if cell_map is None:
            _bad(404, f"no divisions at level {sel.level!r}")
        for idx, d in enumerate(divisions):
            if d.id == sel.division_id:
                return entropy.cells_for_division(cell_map, idx)
        _bad(422, f"unknown division id {sel.division_id!r}")
    if sel.kind == "iso_point":
        if not sel.point or len(sel.point) != 2:
            _bad(422, "iso_point selection needs point=[lon, lat]")
        if sel.tolerance is None or sel.tolerance < 0:
            _bad(422, "iso_point selection needs a non-negative tolerance")
        ref_metric = sel.metric or next(iter(fields), None)
        if ref_metric is None or ref_metric not in fields:
            _bad(422, "iso_point selection needs a reference metric")
        return entropy.cells_iso(
            fields[ref_metric], lattice, city.config.bbox, tuple(sel.point), sel.tolerance
        )
    _bad(422, f"unknown selection kind {sel.kind!r}")


def create_app(data_dir) -> FastAPI:
    app = FastAPI(title="urbanmetrics api")
    app.state.store = CityStore(data_dir)

    @app.exception_handler(HTTPException)
    async def http_error(_req: Request, exc: HTTPException):
        return JSONResponse(
            status_code=exc.status_code,
            content={"code": exc.status_code, "message": str(exc.detail)},
        )

    @app.exception_handler(RequestValidationError)
    async def validation_error(_req: Request, exc: RequestValidationError):
        return JSONResponse(status_code=422, content={"code": 422, "message": str(exc)})

    @app.get("/cities")
    def cities():
        return app.state.store.descriptors()

    @app.get("/divisions")
    def divisions(city: str, level: str = geo.LEVEL_DIV):
        c = _get_city(app.state.store, city)
        divs, _cell_map = c.divisions_at(level)
        if not divs:
            _bad(404, f"no divisions at level {level!r}")
        out = []
        for d in divs:
            pts = np.vstack(d.rings)
            out.append({
                "id": d.id,
                "name": d.name,
                "level": d.level,
                "rings": [[[float(x), float(y)] for x, y in ring] for ring in d.rings],
                "centroid": [float(pts[:, 0].mean()), float(pts[:, 1].mean())],
                "demographics": d.demographics,
            })
        return out

    @app.get("/raster")
    def raster_endpoint(
        city: str,
        metric: str,
        filter: str = Query("all"),
        bbox: str | None = None,
        width: int = 800,
        height: int = 600,
        zoom: float = 1.0,
        radius_px: float | None = None,
        adaptive: bool = True,
    ):
        c = _get_city(app.state.store, city)
        vp = _parse_viewport(bbox, width, height, zoom) if bbox else raster.Viewport(
            c.config.bbox, width, height, zoom
        )
        if metric in DEMOGRAPHIC_METRICS:
            ras = _demographic_raster(c, metric, vp)
        else:
            f = _get_field(c, metric, _parse_filter(filter))
            base = radius_px if radius_px is not None else raster.default_radius_px(c.lattice, vp)
            try:
                params = raster.DiffusionParams(radius_px=base, adaptive=adaptive, viewport=vp)
            except ValueError as exc:
                _bad(422, str(exc))
            ras = raster.rasterize_field(f, c.lattice, params)
        return Response(content=ras.to_bytes(), media_type="application/octet-stream")

    @app.get("/histogram")
    def histogram(city: str, metric: str, filter: str = Query("all"), bins: int = 40):
        if bins < 1:
            _bad(422, "bins must be >= 1")
        c = _get_city(app.state.store, city)
        f = _get_field(c, metric, _parse_filter(filter))
        h = entropy.field_histogram(f, bins)
        return {"metric": metric, "filter": filter, "bins": bins, **h.to_dict()}

    @app.post("/region/stats")
    def region_stats_endpoint(req: RegionStatsRequest):
        c = _get_city(app.state.store, req.city)
        tfilter = _parse_filter(req.filter)
        fields = {m: _get_field(c, m, tfilter) for m in req.metrics}
        mask = _selection_mask(c, req.selection, fields)
        stats = entropy.region_stats(fields, mask, profiles=c.profiles, cell_div=c.cell_div)
        payload = stats.to_dict()
        if stats.div_breakdown is not None:
            for item in payload["div_breakdown"]:
                item["id"] = c.divisions[item["index"]].id
        payload["cells"] = [
            [int(col), int(row)]
            for row, col in zip(*(arr.tolist() for arr in np.nonzero(mask)))
        ] if req.selection.kind == "iso_point" else None
        return payload

    @app.get("/starplot")
    def starplot(city: str, level: str = geo.LEVEL_DIV, filter: str = Query("all")):
        c = _get_city(app.state.store, city)
        tfilter = _parse_filter(filter)
        divisions, cell_map = c.divisions_at(level)
        if not divisions or cell_map is None:
            _bad(404, f"no divisions at level {level!r}")
        fields = {m: _get_field(c, m, tfilter) for m in STARPLOT_AXES}
        density = _get_field(c, MetricKind.DENSITY, tfilter)

        rows = []
        for idx, d in enumerate(divisions):
            mask = entropy.cells_for_division(cell_map, idx)
            stats = entropy.region_stats({**fields, "density": density}, mask)
            rows.append((d.id, stats))
        axes_values = {
            axis: [r[1].metrics[axis]["mean"] for r in rows] for axis in STARPLOT_AXES
        }
        dens_values = [r[1].metrics["density"]["mean"] for r in rows]
        normed = {axis: minmax_normalize(vals) for axis, vals in axes_values.items()}
        dens_norm = minmax_normalize(dens_values)
        return [
            {
                "region_id": rows[i][0],
                "axes": {axis: normed[axis][i] for axis in STARPLOT_AXES},
                "density_norm": dens_norm[i],
                "means": {axis: axes_values[axis][i] for axis in STARPLOT_AXES},
                "density_mean": dens_values[i],
            }
            for i in range(len(rows))
        ]

    @app.get("/compare")
    def compare(
        mode: str,
        metric: str = "vibrancy",
        city: str | None = None,
        cities: str | None = None,
        filter: str = Query("all"),
        bands: str | None = None,
    ):
        store_ = app.state.store
        if mode == "time":
            c = _need_city_param(store_, city)
            band_ids = _parse_bands(bands)
            subviews = [
                _subview(BAND_NAMES[b].capitalize(), c.name, metric, BAND_NAMES[b], c.config.bbox)
                for b in band_ids
            ]
            return {"mode": mode, "shared_viewport": True, "subviews": subviews}
        if mode == "week":
            c = _need_city_param(store_, city)
            subviews = [
                _subview(kind.capitalize(), c.name, metric, kind, c.config.bbox)
                for kind in ("weekday", "weekend")
            ]
            return {"mode": mode, "shared_viewport": True, "subviews": subviews}
        if mode == "city":
            if not cities:
                _bad(422, "city mode needs cities=a,b[,c,d]")
            names = [n.strip() for n in cities.split(",") if n.strip()]
            if not 2 <= len(names) <= 4:
                _bad(422, f"city comparison supports 2..4 cities, got {len(names)}")
            subviews = []
            for name in names:
                c = _get_city(store_, name)
                subviews.append(_subview(name, name, metric, filter, c.config.bbox))
            return {"mode": mode, "shared_viewport": False, "subviews": subviews}
        _bad(422, f"unknown compare mode {mode!r}")

    def _need_city_param(store_, city_name):
        if not city_name:
            _bad(422, "this compare mode needs city=<name>")
        return _get_city(store_, city_name)

    def _parse_bands(bands: str | None):
        if not bands:
            return list(entropy.COMPARE_BANDS)
        try:
            ids = [int(b) for b in bands.split(",")]
        except ValueError:
            _bad(422, "bands must be a comma list of 0..5")
        if not 2 <= len(ids) <= 6 or any(b not in entropy.COMPARE_BANDS for b in ids):
            _bad(422, "time comparison supports 2..6 of the bands 0..5")
        return sorted(ids)

    def _subview(label, city_name, metric, filter_slug, bbox):
        return {
            "label": label,
            "city": city_name,
            "metric": metric,
            "filter": filter_slug,
            "bbox": list(bbox),
            "raster_query": {"city": city_name, "metric": metric, "filter": filter_slug},
        }

    @app.get("/pois")
    def pois_endpoint(
        city: str,
        poi_class: int = Query(..., alias="class"),
        metric: str = "vibrancy",
        filter: str = Query("all"),
        q: float = DEFAULT_POI_QUANTILE,
    ):
        if not 0 <= poi_class < geo.N_POI_CLASSES:
            _bad(422, f"class must be in 0..{geo.N_POI_CLASSES - 1}")
        if not 0.0 <= q <= 1.0:
            _bad(422, "q must be in [0, 1]")
        c = _get_city(app.state.store, city)
        pois = geo.load_pois(c.path / "pois.csv")
        selected = [p for p in pois if p.class_id == poi_class]
        if q < 1.0:
            f = _get_field(c, metric, _parse_filter(filter))
            means = f.occupied_means()
            if means.size == 0:
                selected = []
            else:
                cutoff = np.sort(means)[int(math.floor((1.0 - q) * (means.size - 1)))]
                keep = []
                for p in selected:
                    cell = geo.assign_grid(p.lon, p.lat, c.lattice, c.config.bbox)
                    if cell is None:
                        continue
                    col, row = cell
                    if f.count[row, col] > 0 and f.mean[row, col] >= cutoff:
                        keep.append(p)
                selected = keep
        return [
            {"id": p.id, "class_id": p.class_id, "lon": p.lon, "lat": p.lat,
             "kind": p.kind, "radius_m": p.radius_m}
            for p in selected
        ]

    return app


def _demographic_raster(city, key: str, vp: raster.Viewport) -> raster.ScalarRaster:
    """Flat per-division fill at cell granularity (no diffusion)."""
    if city.cell_div is None:
        _bad(404, "city has no divisions loaded")
    values = city.demographics_vector(key)
    px = np.arange(vp.width_px) + 0.5
    py = np.arange(vp.height_px) + 0.5
    lon_min, lat_min, lon_max, lat_max = vp.bbox
    lons = lon_min + px / vp.width_px * (lon_max - lon_min)
    lats = lat_max - py / vp.height_px * (lat_max - lat_min)
    lon_grid = np.broadcast_to(lons, (vp.height_px, vp.width_px))
    lat_grid = np.broadcast_to(lats[:, None], (vp.height_px, vp.width_px))
    cols, rows, inside = geo.assign_grid_array(
        lon_grid.ravel(), lat_grid.ravel(), city.lattice, city.config.bbox
    )
    div = np.full(cols.shape, -1, dtype=np.int64)
    div[inside] = city.cell_div[rows[inside], cols[inside]]
    out = np.where(div >= 0, values[np.clip(div, 0, None)], 0.0).reshape(
        vp.height_px, vp.width_px
    )
    return raster.ScalarRaster(
        vp.width_px, vp.height_px, out, (float(out.min()), float(out.max()))
    )
