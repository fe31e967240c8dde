"""City workspace layout and read-only snapshots for the CLI and API.

A city directory is the unit every pipeline stage reads from and writes to:

    <city>/
      city.json            lattice configuration
      pois.csv             POI inventory
      divisions.geojson    DIV + SUBDISTRICT polygons
      demographics.csv     per-DIV gdp / population / house_price
      records.txt          raw rows (synth output or real feed)
      shards/              ingest output + manifest.json
      profiles.ufgp        per-cell POI-class profiles
      fields/              <metric>_<filter>.ufmf caches

Snapshots are immutable after load; the API serves concurrent reads from
one snapshot and swaps it wholesale on reload.
"""
from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

import numpy as np

from . import entropy, geo, ingest

CITY_CONFIG = "city.json"
POIS_CSV = "pois.csv"
DIVISIONS_GEOJSON = "divisions.geojson"
DEMOGRAPHICS_CSV = "demographics.csv"
RECORDS_TXT = "records.txt"
SHARDS_DIR = "shards"
PROFILES_FILE = "profiles.ufgp"
FIELDS_DIR = "fields"

DEMOGRAPHIC_KEYS = ("gdp", "population", "house_price")


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_stage_manifest(path, stage: str, params: dict, inputs: dict, outputs: dict, elapsed_s: float) -> dict:
    manifest = {
        "stage": stage,
        "params": params,
        "inputs": inputs,  # name -> sha256 of upstream artifacts
        "outputs": outputs,
        "elapsed_s": round(elapsed_s, 3),
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return manifest


@dataclass
class CityData:
    path: Path
    config: geo.CityConfig
    lattice: geo.Lattice
    epoch: date
    profiles: np.ndarray | None = None
    divisions: list = field(default_factory=list)  # DIV level, file order
    subdistricts: list = field(default_factory=list)
    cell_div: np.ndarray | None = None
    cell_sub: np.ndarray | None = None
    fields: dict = field(default_factory=dict)  # (metric, filter_slug) -> GridMetricField
    ingest_manifest: dict | None = None

    @property
    def name(self) -> str:
        return self.config.name

    def divisions_at(self, level: str):
        if level == geo.LEVEL_DIV:
            return self.divisions, self.cell_div
        if level == geo.LEVEL_SUBDISTRICT:
            return self.subdistricts, self.cell_sub
        return [], None

    def field_for(self, metric, tfilter) -> entropy.GridMetricField | None:
        return self.fields.get((entropy.MetricKind(metric).value, tfilter.slug))

    def field_context(self, p_scope: str = "filtered") -> entropy.FieldContext:
        return entropy.FieldContext(
            lattice=self.lattice,
            bbox=self.config.bbox,
            epoch=self.epoch,
            profiles=self.profiles,
            cell_div=self.cell_div,
            n_divisions=len(self.divisions),
            p_scope=p_scope,
        )

    def cached_filters(self) -> list:
        return sorted({slug for (_m, slug) in self.fields})

    def cached_metrics(self) -> list:
        return sorted({m for (m, _s) in self.fields})

    def demographics_vector(self, key: str) -> np.ndarray:
        return np.asarray([d.demographics.get(key, 0.0) for d in self.divisions], dtype=np.float64)


def load_city(city_dir, with_fields: bool = True) -> CityData:
    city_dir = Path(city_dir)
    cfg = geo.load_city_config(city_dir / CITY_CONFIG)
    lattice = geo.build_lattice(cfg)

    epoch = date(1970, 1, 1)
    ingest_manifest = None
    manifest_path = city_dir / SHARDS_DIR / ingest.MANIFEST_NAME
    if manifest_path.exists():
        ingest_manifest = ingest.load_manifest(city_dir / SHARDS_DIR)
        epoch = date.fromisoformat(ingest_manifest["epoch"])

    data = CityData(path=city_dir, config=cfg, lattice=lattice, epoch=epoch,
                    ingest_manifest=ingest_manifest)

    profiles_path = city_dir / PROFILES_FILE
    if profiles_path.exists():
        data.profiles = geo.load_profiles(profiles_path)

    div_path = city_dir / DIVISIONS_GEOJSON
    if div_path.exists():
        data.divisions = geo.load_divisions(div_path, level=geo.LEVEL_DIV)
        data.subdistricts = geo.load_divisions(div_path, level=geo.LEVEL_SUBDISTRICT)
        if data.divisions:
            data.cell_div = geo.cell_division_map(lattice, data.divisions)
        if data.subdistricts:
            data.cell_sub = geo.cell_division_map(lattice, data.subdistricts)

    demo_path = city_dir / DEMOGRAPHICS_CSV
    if demo_path.exists() and data.divisions:
        geo.load_demographics(demo_path, data.divisions)

    if with_fields:
        fields_dir = city_dir / FIELDS_DIR
        if fields_dir.is_dir():
            for path in sorted(fields_dir.glob("*.ufmf")):
                f = entropy.load_field(path)
                data.fields[(f.metric.value, f.tfilter.slug)] = f
    return data


class CityStore:
    """All cities under one data root, loaded once and served immutably."""

    def __init__(self, data_dir):
        self.data_dir = Path(data_dir)
        if not self.data_dir.is_dir():
            raise FileNotFoundError(f"data dir {self.data_dir} does not exist")
        self.loaded_at = time.time()
        self.cities: dict[str, CityData] = {}
        for sub in sorted(self.data_dir.iterdir()):
            if (sub / CITY_CONFIG).exists():
                city = load_city(sub)
                self.cities[city.name] = city

    def get(self, name: str) -> CityData | None:
        return self.cities.get(name)

    def descriptors(self) -> list:
        out = []
        for name in sorted(self.cities):
            c = self.cities[name]
            out.append({
                "name": name,
                "bbox": list(c.config.bbox),
                "lattice": {"cols": c.lattice.cols, "rows": c.lattice.rows,
                            "step_m": c.lattice.step_m},
                "division_levels": [
                    lvl for lvl, divs in (
                        (geo.LEVEL_DIV, c.divisions), (geo.LEVEL_SUBDISTRICT, c.subdistricts)
                    ) if divs
                ],
                "cached_metrics": c.cached_metrics(),
                "cached_filters": c.cached_filters(),
                "epoch": c.epoch.isoformat(),
            })
        return out
