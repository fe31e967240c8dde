"""Deterministic synthetic cities and archetype-driven movement records.

Everything is drawn from a single splitmix64 stream seeded by the spec, so
identical specs replay byte-identical files on any platform. Four movement
archetypes give each metric a known qualitative signature:

  HOMEBODY   one POI class, one division  -> vibrancy and commutation 0
  COMMUTER   two classes, two divisions   -> mid-range user entropies
  WANDERER   uniform classes + divisions  -> vibrancy near ln(10)
  TOURIST    home division plus rare trips to the attraction division
             -> high record entropy (fluidity) where the attraction is

The generated city reserves a quiet "home site": one class-0 POI with an
exclusion ring that keeps every other POI out of influence range, so
homebody cells stay one-hot and their user entropy is exactly zero.
"""
from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path

from .entropy import BAND_MINUTES
from .geo import (
    METERS_PER_DEGREE,
    N_POI_CLASSES,
    CityConfig,
    LEVEL_DIV,
    LEVEL_SUBDISTRICT,
    Poi,
    save_city_config,
    save_pois,
)

_MASK64 = (1 << 64) - 1

HOME_ANCHOR_ID = "HOME"
HOME_EXCLUSION_M = 1200.0  # keeps foreign POIs outside 500 m of homebody cells
JITTER_SIGMA_M = 50.0
JITTER_MAX_M = 450.0  # stays inside the POI's 500 m influence


class SplitMix64:
    """Seedable, portable PRNG (splitmix64); the only randomness source here."""

    def __init__(self, seed: int):
        self.state = seed & _MASK64
        self._spare_gauss = None

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return (z ^ (z >> 31)) & _MASK64

    def uniform(self) -> float:
        return (self.next_u64() >> 11) / float(1 << 53)

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] inclusive."""
        if hi < lo:
            raise ValueError("empty range")
        return lo + self.next_u64() % (hi - lo + 1)

    def gauss(self, sigma: float = 1.0) -> float:
        if self._spare_gauss is not None:
            z = self._spare_gauss
            self._spare_gauss = None
            return z * sigma
        u1 = self.uniform()
        while u1 <= 0.0:
            u1 = self.uniform()
        u2 = self.uniform()
        r = math.sqrt(-2.0 * math.log(u1))
        self._spare_gauss = r * math.sin(2.0 * math.pi * u2)
        return r * math.cos(2.0 * math.pi * u2) * sigma

    def choice(self, cumulative: list) -> int:
        """Index drawn from a cumulative weight list (last entry = total)."""
        u = self.uniform() * cumulative[-1]
        return min(bisect_right(cumulative, u), len(cumulative) - 1)


def _cumulative(weights) -> list:
    total = 0.0
    out = []
    for w in weights:
        if w < 0:
            raise ValueError("weights must be non-negative")
        total += w
        out.append(total)
    if total <= 0:
        raise ValueError("weights must not be all zero")
    return out


@dataclass
class ArchetypeSpec:
    name: str
    poi_class_weights: list  # length 10
    division_weights: list  # length k*k, row-major tiles
    records_per_user: tuple  # (lo, hi) inclusive
    time_profile: list  # length 7, morning..night + midnight

    def __post_init__(self):
        if len(self.poi_class_weights) != N_POI_CLASSES:
            raise ValueError("poi_class_weights must have 10 entries")
        if len(self.time_profile) != 7:
            raise ValueError("time_profile must have 7 entries")
        _cumulative(self.poi_class_weights)
        _cumulative(self.division_weights)
        _cumulative(self.time_profile)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "poi_class_weights": self.poi_class_weights,
            "division_weights": self.division_weights,
            "records_per_user": list(self.records_per_user),
            "time_profile": self.time_profile,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ArchetypeSpec":
        return cls(
            name=d["name"],
            poi_class_weights=d["poi_class_weights"],
            division_weights=d["division_weights"],
            records_per_user=tuple(d["records_per_user"]),
            time_profile=d["time_profile"],
        )


@dataclass
class SyntheticCitySpec:
    seed: int
    bbox: tuple
    divisions_k: int
    pois_per_class: int
    users_per_archetype: dict
    archetypes: list = field(default_factory=list)
    name: str = "synthville"
    days: int = 14
    epoch: date = date(2015, 7, 1)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "name": self.name,
            "bbox": list(self.bbox),
            "divisions_k": self.divisions_k,
            "pois_per_class": self.pois_per_class,
            "users_per_archetype": self.users_per_archetype,
            "days": self.days,
            "epoch": self.epoch.isoformat(),
            "archetypes": [a.to_dict() for a in self.archetypes],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticCitySpec":
        return cls(
            seed=int(d["seed"]),
            bbox=tuple(d["bbox"]),
            divisions_k=int(d["divisions_k"]),
            pois_per_class=int(d["pois_per_class"]),
            users_per_archetype=dict(d["users_per_archetype"]),
            archetypes=[ArchetypeSpec.from_dict(a) for a in d.get("archetypes", [])],
            name=d.get("name", "synthville"),
            days=int(d.get("days", 14)),
            epoch=date.fromisoformat(d.get("epoch", "2015-07-01")),
        )

    def city_config(self) -> CityConfig:
        lon_min, lat_min, lon_max, lat_max = self.bbox
        return CityConfig(name=self.name, bbox=self.bbox, ref_lat=(lat_min + lat_max) / 2.0)


def load_spec(path) -> SyntheticCitySpec:
    with open(path, "r", encoding="utf-8") as f:
        return SyntheticCitySpec.from_dict(json.load(f))


def save_spec(spec: SyntheticCitySpec, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(spec.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")


def default_spec(seed: int = 20150701) -> SyntheticCitySpec:
    """Tuned default: ~1e5 records, 2x2 divisions, attraction in the last tile.

    Record volumes keep every archetype inside the [1, 2500]-per-month
    cleansing window over the 14-day span.
    """
    uniform_div = [0.25, 0.25, 0.25, 0.25]
    profile = [0.13, 0.17, 0.12, 0.17, 0.20, 0.16, 0.05]
    archetypes = [
        ArchetypeSpec(
            name="HOMEBODY",
            poi_class_weights=[1, 0, 0, 0, 0, 0, 0, 0, 0, 0],
            division_weights=[1.0, 0.0, 0.0, 0.0],
            records_per_user=(400, 600),
            time_profile=profile,
        ),
        ArchetypeSpec(
            name="COMMUTER",
            poi_class_weights=[0, 0, 0, 0.5, 0, 0, 0, 0.5, 0, 0],
            division_weights=[0.0, 0.5, 0.5, 0.0],
            records_per_user=(400, 600),
            time_profile=profile,
        ),
        ArchetypeSpec(
            name="WANDERER",
            poi_class_weights=[0.1] * 10,
            division_weights=uniform_div,
            records_per_user=(1000, 1000),
            time_profile=profile,
        ),
        ArchetypeSpec(
            name="TOURIST",
            poi_class_weights=[0.05, 0.20, 0.05, 0.10, 0.05, 0.05, 0.20, 0.10, 0.15, 0.05],
            division_weights=[0.2833, 0.2833, 0.2834, 0.15],
            records_per_user=(400, 600),
            time_profile=profile,
        ),
    ]
    return SyntheticCitySpec(
        seed=seed,
        bbox=(116.20, 39.75, 116.32, 39.84),
        divisions_k=2,
        pois_per_class=24,
        users_per_archetype={"HOMEBODY": 60, "COMMUTER": 50, "WANDERER": 25, "TOURIST": 40},
        archetypes=archetypes,
    )


# ---------------------------------------------------------------------------
# City generation
# ---------------------------------------------------------------------------

def _tile_polygon(bbox, k, row, col):
    lon_min, lat_min, lon_max, lat_max = bbox
    w = (lon_max - lon_min) / k
    h = (lat_max - lat_min) / k
    x0, y0 = lon_min + col * w, lat_min + row * h
    x1, y1 = x0 + w, y0 + h
    return [[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]]


def _division_features(bbox, k, level, prefix):
    feats = []
    for row in range(k):
        for col in range(k):
            idx = row * k + col
            feats.append({
                "type": "Feature",
                "properties": {"id": f"{prefix}{idx}", "name": f"{prefix}{idx}", "level": level},
                "geometry": {"type": "Polygon", "coordinates": [_tile_polygon(bbox, k, row, col)]},
            })
    return feats


def home_anchor_lonlat(spec: SyntheticCitySpec) -> tuple:
    """Center of the first (bottom-left) division tile."""
    lon_min, lat_min, lon_max, lat_max = spec.bbox
    k = spec.divisions_k
    return (
        lon_min + (lon_max - lon_min) / k / 2.0,
        lat_min + (lat_max - lat_min) / k / 2.0,
    )


def _meters_between(spec, lon1, lat1, lon2, lat2):
    ref = (spec.bbox[1] + spec.bbox[3]) / 2.0
    dx = (lon1 - lon2) * METERS_PER_DEGREE * math.cos(math.radians(ref))
    dy = (lat1 - lat2) * METERS_PER_DEGREE
    return math.hypot(dx, dy)


def generate_city(spec: SyntheticCitySpec, out_dir) -> dict:
    """Write city config, POIs, divisions, and demographics; returns the paths.

    Uniform POIs are re-drawn while they fall inside the home-site exclusion
    ring, so the reserved class-0 anchor keeps one-hot influence.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = SplitMix64(spec.seed)
    lon_min, lat_min, lon_max, lat_max = spec.bbox
    anchor_lon, anchor_lat = home_anchor_lonlat(spec)

    pois = [Poi(id=HOME_ANCHOR_ID, class_id=0, lon=anchor_lon, lat=anchor_lat, kind="point")]
    for class_id in range(N_POI_CLASSES):
        for i in range(spec.pois_per_class):
            for _ in range(1000):
                lon = lon_min + rng.uniform() * (lon_max - lon_min)
                lat = lat_min + rng.uniform() * (lat_max - lat_min)
                if _meters_between(spec, lon, lat, anchor_lon, anchor_lat) > HOME_EXCLUSION_M:
                    break
            else:
                raise RuntimeError("could not place a POI outside the home exclusion ring")
            if rng.uniform() < 0.2:
                kind, radius = "area", 50.0 + rng.uniform() * 150.0
            else:
                kind, radius = "point", 0.0
            pois.append(Poi(
                id=f"P{class_id}_{i:04d}", class_id=class_id,
                lon=lon, lat=lat, kind=kind, radius_m=radius,
            ))

    k = spec.divisions_k
    features = _division_features(spec.bbox, k, LEVEL_DIV, "D")
    features += _division_features(spec.bbox, 2 * k, LEVEL_SUBDISTRICT, "S")
    geojson = {"type": "FeatureCollection", "features": features}

    demo_rows = []
    for idx in range(k * k):
        demo_rows.append((
            f"D{idx}",
            round(50.0 + rng.uniform() * 450.0, 2),  # gdp
            int(1e5 + rng.uniform() * 9e5),  # population
            int(1e4 + rng.uniform() * 9e4),  # house_price
        ))

    paths = {
        "city": out_dir / "city.json",
        "pois": out_dir / "pois.csv",
        "divisions": out_dir / "divisions.geojson",
        "demographics": out_dir / "demographics.csv",
    }
    save_city_config(spec.city_config(), paths["city"])
    save_pois(pois, paths["pois"])
    with open(paths["divisions"], "w", encoding="utf-8") as f:
        json.dump(geojson, f, indent=2, sort_keys=True)
        f.write("\n")
    with open(paths["demographics"], "w", encoding="utf-8") as f:
        f.write("division_id,gdp,population,house_price\n")
        for row in demo_rows:
            f.write(",".join(str(x) for x in row) + "\n")
    return {k_: str(v) for k_, v in paths.items()}


# ---------------------------------------------------------------------------
# Record generation
# ---------------------------------------------------------------------------

def _pois_by_division_class(spec: SyntheticCitySpec, pois):
    """POI ids bucketed by (division tile index, class); tiles are row-major."""
    lon_min, lat_min, lon_max, lat_max = spec.bbox
    k = spec.divisions_k
    buckets: dict = {}
    for p in pois:
        col = min(int((p.lon - lon_min) / (lon_max - lon_min) * k), k - 1)
        row = min(int((p.lat - lat_min) / (lat_max - lat_min) * k), k - 1)
        buckets.setdefault((row * k + col, p.class_id), []).append(p)
    return buckets


def _nearest_of_class(pois, class_id, lon, lat, spec):
    best = None
    best_d = float("inf")
    for p in pois:
        if p.class_id != class_id:
            continue
        d = _meters_between(spec, p.lon, p.lat, lon, lat)
        if d < best_d:
            best, best_d = p, d
    return best


def generate_records(spec: SyntheticCitySpec, pois, out_path) -> dict:
    """Write archetype movement records in the raw ingest row format.

    Every line parses back exactly; locations are jittered around the chosen
    POI (sigma 50 m, capped inside its influence range and the bbox).
    """
    rng = SplitMix64(spec.seed ^ 0xA5A5A5A5A5A5A5A5)
    lon_min, lat_min, lon_max, lat_max = spec.bbox
    k = spec.divisions_k
    buckets = _pois_by_division_class(spec, pois)
    anchor = next((p for p in pois if p.id == HOME_ANCHOR_ID), None)
    ref_cos = math.cos(math.radians((lat_min + lat_max) / 2.0))
    sigma_lon = JITTER_SIGMA_M / (METERS_PER_DEGREE * ref_cos)
    sigma_lat = JITTER_SIGMA_M / METERS_PER_DEGREE
    tile_centers = [
        (
            lon_min + (c + 0.5) * (lon_max - lon_min) / k,
            lat_min + (r + 0.5) * (lat_max - lat_min) / k,
        )
        for r in range(k)
        for c in range(k)
    ]

    n_lines = 0
    user_index = 0
    with open(out_path, "w", encoding="utf-8") as out:
        for arch in spec.archetypes:
            n_users = int(spec.users_per_archetype.get(arch.name, 0))
            cum_class = _cumulative(arch.poi_class_weights)
            cum_div = _cumulative(arch.division_weights)
            cum_time = _cumulative(arch.time_profile)
            for _ in range(n_users):
                mid = str(1_000_000_000_000 + user_index)
                user_index += 1
                n_records = rng.randint(*arch.records_per_user)
                for _ in range(n_records):
                    div_idx = rng.choice(cum_div)
                    class_id = rng.choice(cum_class)
                    if arch.name == "HOMEBODY" and anchor is not None:
                        poi = anchor
                    else:
                        cands = buckets.get((div_idx, class_id))
                        if cands:
                            poi = cands[rng.randint(0, len(cands) - 1)]
                        else:
                            cx, cy = tile_centers[div_idx]
                            poi = _nearest_of_class(pois, class_id, cx, cy, spec)
                    if poi is None:  # class has no POIs anywhere
                        base_lon, base_lat = tile_centers[div_idx]
                    else:
                        base_lon, base_lat = poi.lon, poi.lat
                    lon, lat = base_lon, base_lat
                    for _ in range(64):
                        cand_lon = base_lon + rng.gauss(sigma_lon)
                        cand_lat = base_lat + rng.gauss(sigma_lat)
                        if not (lon_min <= cand_lon <= lon_max and lat_min <= cand_lat <= lat_max):
                            continue
                        if _meters_between(spec, cand_lon, cand_lat, base_lon, base_lat) <= JITTER_MAX_M:
                            lon, lat = cand_lon, cand_lat
                            break

                    band = rng.choice(cum_time)
                    lo_min, hi_min = BAND_MINUTES[band]
                    minute = rng.randint(lo_min, hi_min - 1)
                    day = spec.epoch + timedelta(days=rng.randint(0, spec.days - 1))
                    src = "GPS" if rng.uniform() < 0.7 else "WIFI"
                    out.write(
                        f"{minute // 60:02d}:{minute % 60:02d}"
                        f"/{day.month:02d}/{day.day:02d}/{day.year:04d},"
                        f"{lon:.7f},{lat:.7f},{mid},{src}\n"
                    )
                    n_lines += 1
    return {"records": n_lines, "users": user_index, "path": str(out_path)}
