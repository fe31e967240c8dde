"""`uf` pipeline driver: synth -> ingest -> grid-profiles -> metrics -> render/serve.

Stages communicate only through files inside a city directory, each stage
writes a manifest chaining input digests, and reruns with identical inputs
produce identical bytes. Exit codes: 0 success, 2 usage, 3 I/O failure,
4 data-contract violation.
"""
from __future__ import annotations

import functools
import json
import os
import sys
import time
from pathlib import Path

import click

from . import entropy, geo, ingest, raster, store, synth

EXIT_IO = 3
EXIT_CONTRACT = 4


def _guard(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except FileNotFoundError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_IO)
        except OSError as exc:
            click.echo(f"I/O error: {exc}", err=True)
            sys.exit(EXIT_IO)
        except (ValueError, RuntimeError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_CONTRACT)

    return wrapper


def _parse_metrics(text: str) -> list:
    if text.strip().lower() == "all":
        return list(entropy.MetricKind)
    try:
        return [entropy.MetricKind(t.strip().lower()) for t in text.split(",") if t.strip()]
    except ValueError:
        raise click.UsageError(
            f"unknown metric in {text!r}; choose from {', '.join(entropy.METRIC_ORDER)} or 'all'"
        )


def _parse_filters(text: str) -> list:
    if text.strip().lower() in ("all-filters", "every", "*"):
        return entropy.all_filters()
    try:
        return [entropy.TimeFilter.parse(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise click.UsageError(str(exc))


@click.group()
def main():
    """Urban mobility entropy metrics pipeline."""


@main.command(name="synth")
@click.option("--spec", "spec_path", type=click.Path(), default=None,
              help="JSON city spec; omit for the built-in default city.")
@click.option("--seed", type=int, default=None, help="Override the spec seed.")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@_guard
def synth_cmd(spec_path, seed, out_dir):
    """Generate a deterministic synthetic city and its movement records."""
    t0 = time.monotonic()
    spec = synth.load_spec(spec_path) if spec_path else synth.default_spec()
    if seed is not None:
        spec.seed = seed
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = synth.generate_city(spec, out_dir)
    pois = geo.load_pois(paths["pois"])
    rec = synth.generate_records(spec, pois, out_dir / store.RECORDS_TXT)
    synth.save_spec(spec, out_dir / "spec.json")
    outputs = {name: store.file_digest(p) for name, p in paths.items()}
    outputs["records"] = store.file_digest(rec["path"])
    store.write_stage_manifest(
        out_dir / "synth.manifest.json", "synth",
        params=spec.to_dict(), inputs={}, outputs=outputs,
        elapsed_s=time.monotonic() - t0,
    )
    click.echo(f"synth: {rec['records']} records for {rec['users']} users -> {out_dir}")


@main.command(name="ingest")
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--city", "city_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--shards", "shard_count", type=int, default=ingest.DEFAULT_SHARDS, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), default=None,
              help="Shard directory [default: <city>/shards].")
@click.option("--epoch", type=str, default=None, help="Dataset first day (YYYY-MM-DD).")
@click.option("--workers", type=int, default=os.cpu_count, show_default="cpu count")
@click.option("--cleanse/--no-cleanse", default=True, show_default=True)
@_guard
def ingest_cmd(input_path, city_dir, shard_count, out_dir, epoch, workers, cleanse):
    """Parse, filter, cleanse and shard a raw record file."""
    from datetime import date

    geo.load_city_config(Path(city_dir) / store.CITY_CONFIG)  # precondition: config exists
    out_dir = Path(out_dir) if out_dir else Path(city_dir) / store.SHARDS_DIR
    manifest = ingest.ingest_file(
        input_path, out_dir,
        shard_count=shard_count,
        epoch=date.fromisoformat(epoch) if epoch else None,
        cleanse=cleanse,
        workers=max(workers or 1, 1),
    )
    click.echo(
        f"ingest: {manifest['sharded']} records into {shard_count} shards "
        f"({manifest['rejected_total']} rejected, {manifest['dropped_src']} wrong-source, "
        f"{manifest['dropped_cleanse']} cleansed) -> {out_dir}"
    )


@main.command(name="grid-profiles")
@click.option("--city", "city_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--pois", "pois_path", type=click.Path(), default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
@_guard
def grid_profiles_cmd(city_dir, pois_path, out_path):
    """Precompute per-cell POI-class probability profiles."""
    t0 = time.monotonic()
    city_dir = Path(city_dir)
    cfg = geo.load_city_config(city_dir / store.CITY_CONFIG)
    lattice = geo.build_lattice(cfg)
    pois_path = Path(pois_path) if pois_path else city_dir / store.POIS_CSV
    if not pois_path.exists():
        raise FileNotFoundError(f"POI file {pois_path} not found")
    pois = geo.load_pois(pois_path)
    q = geo.grid_poi_profiles(lattice, pois, cfg)
    out_path = Path(out_path) if out_path else city_dir / store.PROFILES_FILE
    geo.save_profiles(out_path, q)
    store.write_stage_manifest(
        city_dir / "profiles.manifest.json", "grid-profiles",
        params={"cols": lattice.cols, "rows": lattice.rows, "pois": len(pois)},
        inputs={"pois": store.file_digest(pois_path)},
        outputs={"profiles": store.file_digest(out_path)},
        elapsed_s=time.monotonic() - t0,
    )
    nonzero = int((q.sum(axis=2) > 0).sum())
    click.echo(f"grid-profiles: {lattice.cols}x{lattice.rows} cells, {nonzero} with POI influence")


@main.command(name="metrics")
@click.option("--city", "city_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--metric", required=True, help="Metric name, comma list, or 'all'.")
@click.option("--filter", "filter_", default="all", show_default=True,
              help="Time filter (all, morning..midnight, todN, weekday, weekend), comma list, "
                   "or 'all-filters'.")
@click.option("--workers", type=int, default=os.cpu_count, show_default="cpu count")
@click.option("--shards", "shards_dir", type=click.Path(), default=None)
@click.option("--p-scope", type=click.Choice(["filtered", "global"]), default="filtered",
              show_default=True, help="Rebuild user vectors on the filtered subset or globally.")
@_guard
def metrics_cmd(city_dir, metric, filter_, workers, shards_dir, p_scope):
    """Aggregate metric fields over the shard set and cache them."""
    t0 = time.monotonic()
    city_dir = Path(city_dir)
    metrics = _parse_metrics(metric)
    filters = _parse_filters(filter_)
    shards_dir = Path(shards_dir) if shards_dir else city_dir / store.SHARDS_DIR
    shard_files = ingest.shard_paths(shards_dir)
    if not shard_files:
        raise FileNotFoundError(f"no shards under {shards_dir}; run `uf ingest` first")

    city = store.load_city(city_dir, with_fields=False)
    needs_poi = any(m.basis == "poi" for m in metrics)
    needs_div = any(m.basis == "div" for m in metrics)
    if needs_poi and city.profiles is None:
        raise FileNotFoundError("profiles.ufgp missing; run `uf grid-profiles` first")
    if needs_div and not city.divisions:
        raise FileNotFoundError("divisions.geojson missing or has no DIV features")

    ctx = city.field_context(p_scope=p_scope)
    fields_dir = city_dir / store.FIELDS_DIR
    fields_dir.mkdir(exist_ok=True)
    outputs = {}
    for m in metrics:
        for tf in filters:
            f = entropy.compute_metric_field(shard_files, m, tf, ctx, workers=max(workers or 1, 1))
            out_path = fields_dir / entropy.field_cache_name(m, tf)
            entropy.save_field(out_path, f)
            outputs[out_path.name] = store.file_digest(out_path)
            click.echo(f"metrics: {m.value}/{tf.slug}: {f.n_cells} cells, {f.total_count} stamps")
    manifest_path = fields_dir / "fields.manifest.json"
    inputs = {"shards_manifest": store.file_digest(shards_dir / ingest.MANIFEST_NAME)}
    if needs_poi:
        inputs["profiles"] = store.file_digest(city_dir / store.PROFILES_FILE)
    if manifest_path.exists():  # fields accumulate across runs; keep the chain complete
        previous = json.loads(manifest_path.read_text())
        outputs = {**previous.get("outputs", {}), **outputs}
        inputs = {**previous.get("inputs", {}), **inputs}
    store.write_stage_manifest(
        manifest_path, "metrics",
        params={"metrics": [m.value for m in metrics], "filters": [tf.slug for tf in filters],
                "p_scope": p_scope, "workers": workers},
        inputs=inputs,
        outputs=outputs,
        elapsed_s=time.monotonic() - t0,
    )


def _parse_viewport(viewport: str, width: int, height: int, zoom: float) -> raster.Viewport:
    try:
        parts = [float(x) for x in viewport.split(",")]
        if len(parts) != 4:
            raise ValueError
    except ValueError:
        raise click.UsageError("--viewport must be lon_min,lat_min,lon_max,lat_max")
    return raster.Viewport(tuple(parts), width, height, zoom)


@main.command(name="render")
@click.option("--city", "city_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--metric", required=True)
@click.option("--filter", "filter_", default="all", show_default=True)
@click.option("--viewport", default=None, help="lon_min,lat_min,lon_max,lat_max [default: city bbox]")
@click.option("--width", type=int, default=800, show_default=True)
@click.option("--height", type=int, default=600, show_default=True)
@click.option("--zoom", type=float, default=1.0, show_default=True)
@click.option("--radius-px", type=float, default=None, help="Diffusion radius at zoom 1 [default: 3 grid radii].")
@click.option("--adaptive/--fixed", default=True, show_default=True)
@click.option("--t-min", type=float, default=None, help="Lower color threshold [default: smallest positive value].")
@click.option("--t-max", type=float, default=None, help="Upper color threshold [default: raster max].")
@click.option("--reversed", "reversed_", is_flag=True, default=False)
@click.option("--opacity", type=float, default=1.0, show_default=True)
@click.option("--png", "png_path", type=click.Path(), required=True)
@_guard
def render_cmd(city_dir, metric, filter_, viewport, width, height, zoom,
               radius_px, adaptive, t_min, t_max, reversed_, opacity, png_path):
    """Render one cached metric field to a contour PNG."""
    city_dir = Path(city_dir)
    metric_kind = _parse_metrics(metric)[0]
    tf = _parse_filters(filter_)[0]
    field_path = city_dir / store.FIELDS_DIR / entropy.field_cache_name(metric_kind, tf)
    if not field_path.exists():
        raise FileNotFoundError(f"field cache {field_path} missing; run `uf metrics` first")
    f = entropy.load_field(field_path)
    cfg = geo.load_city_config(city_dir / store.CITY_CONFIG)
    lattice = geo.build_lattice(cfg)
    vp = _parse_viewport(viewport, width, height, zoom) if viewport else raster.Viewport(
        cfg.bbox, width, height, zoom
    )
    base = radius_px if radius_px is not None else raster.default_radius_px(lattice, vp)
    params = raster.DiffusionParams(radius_px=base, adaptive=adaptive, viewport=vp)
    ras = raster.rasterize_field(f, lattice, params)
    if t_max is None:
        t_max = ras.value_range[1]
    if t_min is None:
        positive = ras.values[ras.values > 0]
        t_min = float(positive.min()) if positive.size else 0.0
    rgba = raster.apply_color_filter(ras, raster.ColorFilter(t_min, t_max, reversed_), opacity)
    raster.save_png(rgba, png_path)
    click.echo(f"render: {metric_kind.value}/{tf.slug} -> {png_path} "
               f"(range {ras.value_range[0]:.4g}..{ras.value_range[1]:.4g})")


@main.command(name="report")
@click.option("--city", "city_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--metric", required=True, help="Metric name, comma list, or 'all'.")
@click.option("--filter", "filter_", default="all", show_default=True)
@click.option("--bins", type=int, default=40, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@_guard
def report_cmd(city_dir, metric, filter_, bins, out_dir):
    """Write distribution figures and per-division stats tables for cached fields."""
    from . import report

    written = report.write_report(Path(city_dir), _parse_metrics(metric),
                                  _parse_filters(filter_)[0], bins, Path(out_dir))
    for path in written:
        click.echo(f"report: {path}")


@main.command(name="serve")
@click.option("--data", "data_dir", type=click.Path(), default=None,
              help="Data root with one subdirectory per city [env UF_DATA_DIR].")
@click.option("--port", type=int, default=None, help="Listen port [env UF_PORT, default 8642].")
@click.option("--host", default="127.0.0.1", show_default=True)
@_guard
def serve_cmd(data_dir, port, host):
    """Serve rasters, histograms, region stats and comparison bundles over HTTP."""
    import uvicorn

    from .service import create_app

    data_dir = data_dir or os.environ.get("UF_DATA_DIR")
    if not data_dir:
        raise click.UsageError("provide --data or set UF_DATA_DIR")
    if not Path(data_dir).is_dir():
        raise FileNotFoundError(f"data dir {data_dir} does not exist")
    port = port or int(os.environ.get("UF_PORT", "8642"))
    app = create_app(data_dir)
    click.echo(f"serving {data_dir} on {host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
