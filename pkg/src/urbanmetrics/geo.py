"""Square-lattice city grid, POI influence profiles, and administrative divisions.

The city is covered by a square lattice of points (default spacing 200 m).
The Voronoi cell of each lattice point is its grid cell, so nearest-point
assignment and index rounding coincide: a record is assigned to a cell with
two multiplications and two roundings.

Each cell center carries a probability vector over the 10 POI classes,
computed by summing Gaussian influence of all POIs within a fixed valid
range (500 m) and normalizing across classes. Cells with no POI in range
keep an all-zero vector and are excluded from POI-based metrics downstream.
"""
from __future__ import annotations

import csv
import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

METERS_PER_DEGREE = 111320.0

POI_CLASS_NAMES = [
    "Food & Supply",
    "Entertainment & Leisure",
    "Education",
    "Transportation",
    "Healthcare & Emergency",
    "Financial & Bank",
    "Accommodation",
    "Office & Commercial",
    "Natural Landscape",
    "Factory & Manufacturer",
]
N_POI_CLASSES = len(POI_CLASS_NAMES)

PROFILE_MAGIC = b"UFGP"


class UnsupportedRegionError(ValueError):
    """Bounding box is degenerate or crosses a pole/antimeridian."""


@dataclass(frozen=True)
class CityConfig:
    name: str
    bbox: tuple[float, float, float, float]  # lon_min, lat_min, lon_max, lat_max
    ref_lat: float
    lattice_step_m: float = 200.0
    poi_valid_range_m: float = 500.0

    def __post_init__(self):
        lon_min, lat_min, lon_max, lat_max = self.bbox
        if not (lon_max > lon_min and lat_max > lat_min):
            raise UnsupportedRegionError(f"degenerate bbox {self.bbox}")
        if self.lattice_step_m <= 0:
            raise ValueError("lattice_step_m must be positive")
        if self.poi_valid_range_m < self.lattice_step_m / 2:
            raise ValueError("poi_valid_range_m must cover at least half a lattice step")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "bbox": list(self.bbox),
            "ref_lat": self.ref_lat,
            "lattice_step_m": self.lattice_step_m,
            "poi_valid_range_m": self.poi_valid_range_m,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CityConfig":
        return cls(
            name=d["name"],
            bbox=tuple(d["bbox"]),
            ref_lat=d["ref_lat"],
            lattice_step_m=d.get("lattice_step_m", 200.0),
            poi_valid_range_m=d.get("poi_valid_range_m", 500.0),
        )


def load_city_config(path) -> CityConfig:
    with open(path, "r", encoding="utf-8") as f:
        return CityConfig.from_dict(json.load(f))


def save_city_config(cfg: CityConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(cfg.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")


@dataclass(frozen=True)
class Lattice:
    lon0: float
    lat0: float
    step_lon: float  # degrees per cell
    step_lat: float
    cols: int
    rows: int
    ref_lat: float
    step_m: float

    @property
    def n_cells(self) -> int:
        return self.cols * self.rows

    def cell_center(self, col: int, row: int) -> tuple[float, float]:
        return self.lon0 + col * self.step_lon, self.lat0 + row * self.step_lat

    def center_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Lon/lat of every cell center, shape (rows, cols) each."""
        lons = self.lon0 + np.arange(self.cols) * self.step_lon
        lats = self.lat0 + np.arange(self.rows) * self.step_lat
        return np.broadcast_to(lons, (self.rows, self.cols)), np.broadcast_to(
            lats[:, None], (self.rows, self.cols)
        )

    def meters_xy(self, lon, lat):
        """Equirectangular projection to meters, origin at the lattice origin."""
        mx = METERS_PER_DEGREE * math.cos(math.radians(self.ref_lat))
        return (np.asarray(lon) - self.lon0) * mx, (np.asarray(lat) - self.lat0) * METERS_PER_DEGREE


def build_lattice(cfg: CityConfig) -> Lattice:
    """Lay the square lattice over the city bbox, origin at the lower-left corner.

    Degree steps are derived from the metric step at the reference latitude;
    column/row counts take the ceiling so the lattice always covers the bbox.
    """
    lon_min, lat_min, lon_max, lat_max = cfg.bbox
    if lat_min < -89.0 or lat_max > 89.0 or abs(cfg.ref_lat) >= 89.0:
        raise UnsupportedRegionError("bbox reaches a pole")
    if lon_min < -180.0 or lon_max > 180.0:
        raise UnsupportedRegionError("bbox crosses the antimeridian")
    step_lat = cfg.lattice_step_m / METERS_PER_DEGREE
    step_lon = cfg.lattice_step_m / (METERS_PER_DEGREE * math.cos(math.radians(cfg.ref_lat)))
    # tiny slack so a span that is an exact multiple of the step does not
    # gain a spurious extra row/column from float noise
    cols = int(math.ceil((lon_max - lon_min) / step_lon - 1e-9))
    rows = int(math.ceil((lat_max - lat_min) / step_lat - 1e-9))
    if cols < 1 or rows < 1:
        raise UnsupportedRegionError("bbox smaller than one lattice step")
    return Lattice(
        lon0=lon_min, lat0=lat_min,
        step_lon=step_lon, step_lat=step_lat,
        cols=cols, rows=rows,
        ref_lat=cfg.ref_lat, step_m=cfg.lattice_step_m,
    )


def _round_half_away(x: float) -> int:
    # indices are computed with round-half-away-from-zero so every
    # implementation of the grid agrees on tie cells
    return math.floor(x + 0.5) if x >= 0 else math.ceil(x - 0.5)


def assign_grid(lon: float, lat: float, lattice: Lattice, bbox=None):
    """Map a point to its (col, row) cell, or None if outside the bbox.

    Rounding to the nearest lattice point is exactly the Voronoi-cell
    membership of the square lattice.
    """
    if bbox is not None:
        lon_min, lat_min, lon_max, lat_max = bbox
        if not (lon_min <= lon <= lon_max and lat_min <= lat <= lat_max):
            return None
    col = _round_half_away((lon - lattice.lon0) / lattice.step_lon)
    row = _round_half_away((lat - lattice.lat0) / lattice.step_lat)
    col = min(max(col, 0), lattice.cols - 1)
    row = min(max(row, 0), lattice.rows - 1)
    return col, row


def assign_grid_array(lons: np.ndarray, lats: np.ndarray, lattice: Lattice, bbox):
    """Vectorized assign_grid. Returns (cols, rows, in_bbox_mask)."""
    lons = np.asarray(lons, dtype=np.float64)
    lats = np.asarray(lats, dtype=np.float64)
    lon_min, lat_min, lon_max, lat_max = bbox
    inside = (lons >= lon_min) & (lons <= lon_max) & (lats >= lat_min) & (lats <= lat_max)
    # arguments are non-negative inside the bbox, so floor(x+0.5) is
    # round-half-away-from-zero here
    cols = np.floor((lons - lattice.lon0) / lattice.step_lon + 0.5).astype(np.int64)
    rows = np.floor((lats - lattice.lat0) / lattice.step_lat + 0.5).astype(np.int64)
    np.clip(cols, 0, lattice.cols - 1, out=cols)
    np.clip(rows, 0, lattice.rows - 1, out=rows)
    return cols, rows, inside


# ---------------------------------------------------------------------------
# POIs and per-cell class profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Poi:
    id: str
    class_id: int
    lon: float
    lat: float
    kind: str = "point"  # "point" | "area"
    radius_m: float = 0.0

    def __post_init__(self):
        if not 0 <= self.class_id < N_POI_CLASSES:
            raise ValueError(f"class_id {self.class_id} outside [0, {N_POI_CLASSES - 1}]")
        if self.kind not in ("point", "area"):
            raise ValueError(f"unknown POI kind {self.kind!r}")
        if self.kind == "area" and self.radius_m <= 0:
            raise ValueError("area POI needs radius_m > 0")

    @property
    def sigma_m(self) -> float:
        # influence spread: 1.5x radius for area POIs, 100 m for point POIs
        return 1.5 * self.radius_m if self.kind == "area" else 100.0


def load_pois(path) -> list[Poi]:
    pois = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        for row in csv.DictReader(f):
            pois.append(Poi(
                id=row["id"],
                class_id=int(row["class_id"]),
                lon=float(row["lon"]),
                lat=float(row["lat"]),
                kind=row["kind"],
                radius_m=float(row["radius_m"] or 0.0),
            ))
    return pois


def save_pois(pois, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(["id", "class_id", "lon", "lat", "kind", "radius_m"])
        for p in pois:
            w.writerow([p.id, p.class_id, f"{p.lon:.7f}", f"{p.lat:.7f}", p.kind, f"{p.radius_m:g}"])


def gaussian_pdf(dist_m, sigma_m: float):
    """1-D normal density of the center distance, the influence weight of one POI."""
    d = np.asarray(dist_m, dtype=np.float64)
    return np.exp(-(d * d) / (2.0 * sigma_m**2)) / (sigma_m * math.sqrt(2.0 * math.pi))


def grid_poi_profiles(lattice: Lattice, pois, cfg: CityConfig) -> np.ndarray:
    """Per-cell probability vectors over POI classes, shape (rows, cols, 10).

    Every POI scatters its Gaussian influence onto all cell centers within
    the valid range; afterwards each non-empty cell is normalized across
    classes. Cells with no POI in range stay all-zero.
    """
    q = np.zeros((lattice.rows, lattice.cols, N_POI_CLASSES), dtype=np.float64)
    if pois:
        _scatter_poi_influence(q, lattice, pois, cfg.poi_valid_range_m)
    totals = q.sum(axis=2)
    nonzero = totals > 0
    q[nonzero] /= totals[nonzero][:, None]
    return q


def _scatter_poi_influence(q: np.ndarray, lattice: Lattice, pois, valid_range_m: float) -> None:
    mx = METERS_PER_DEGREE * math.cos(math.radians(lattice.ref_lat))
    my = METERS_PER_DEGREE
    # window of cells that can be within the valid range of one POI
    wc = int(math.ceil(valid_range_m / (lattice.step_lon * mx))) + 1
    wr = int(math.ceil(valid_range_m / (lattice.step_lat * my))) + 1
    for p in pois:
        px = (p.lon - lattice.lon0) * mx
        py = (p.lat - lattice.lat0) * my
        c0 = int(round(px / (lattice.step_lon * mx)))
        r0 = int(round(py / (lattice.step_lat * my)))
        cols = np.arange(max(c0 - wc, 0), min(c0 + wc + 1, lattice.cols))
        rows = np.arange(max(r0 - wr, 0), min(r0 + wr + 1, lattice.rows))
        if cols.size == 0 or rows.size == 0:
            continue
        dx = cols * (lattice.step_lon * mx) - px
        dy = rows * (lattice.step_lat * my) - py
        d2 = dx[None, :] ** 2 + dy[:, None] ** 2
        within = d2 <= valid_range_m**2
        if not within.any():
            continue
        w = np.where(
            within,
            np.exp(-d2 / (2.0 * p.sigma_m**2)) / (p.sigma_m * math.sqrt(2.0 * math.pi)),
            0.0,
        )
        q[np.ix_(rows, cols, [p.class_id])] += w[:, :, None]


def save_profiles(path, q: np.ndarray) -> None:
    """Binary profile cache: magic, cols/rows/classes (u32 LE), row-major f32 vectors."""
    rows, cols, classes = q.shape
    with open(path, "wb") as f:
        f.write(PROFILE_MAGIC)
        f.write(struct.pack("<III", cols, rows, classes))
        f.write(np.ascontiguousarray(q, dtype="<f4").tobytes())


def load_profiles(path) -> np.ndarray:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != PROFILE_MAGIC:
            raise ValueError(f"not a profile cache: bad magic {magic!r}")
        cols, rows, classes = struct.unpack("<III", f.read(12))
        data = np.frombuffer(f.read(), dtype="<f4")
    if data.size != cols * rows * classes:
        raise ValueError("profile cache truncated")
    return data.reshape(rows, cols, classes).astype(np.float64)


# ---------------------------------------------------------------------------
# Administrative divisions
# ---------------------------------------------------------------------------

LEVEL_DIV = "DIV"
LEVEL_SUBDISTRICT = "SUBDISTRICT"


@dataclass
class Division:
    id: str
    name: str
    level: str
    rings: list  # list of (n, 2) float arrays, lon/lat; exterior first, holes after
    demographics: dict = field(default_factory=dict)

    def bbox(self):
        pts = np.vstack(self.rings)
        return pts[:, 0].min(), pts[:, 1].min(), pts[:, 0].max(), pts[:, 1].max()


def point_in_rings(lon: float, lat: float, rings) -> bool:
    """Even-odd rule over all rings; holes flip containment naturally."""
    inside = False
    for ring in rings:
        xs = ring[:, 0]
        ys = ring[:, 1]
        n = len(ring)
        j = n - 1
        for i in range(n):
            if (ys[i] > lat) != (ys[j] > lat):
                x_cross = xs[j] + (lat - ys[j]) * (xs[i] - xs[j]) / (ys[i] - ys[j])
                if lon < x_cross:
                    inside = not inside
            j = i
    return inside


def division_of(lon: float, lat: float, divisions):
    """Id of the single division containing the point at this level, or None."""
    for d in divisions:
        lon_min, lat_min, lon_max, lat_max = d.bbox()
        if not (lon_min <= lon <= lon_max and lat_min <= lat <= lat_max):
            continue
        if point_in_rings(lon, lat, d.rings):
            return d.id
    return None


def load_divisions(path, level: str | None = None) -> list[Division]:
    """GeoJSON FeatureCollection with properties id, name, level."""
    with open(path, "r", encoding="utf-8") as f:
        gj = json.load(f)
    divisions = []
    for feat in gj.get("features", []):
        props = feat.get("properties", {})
        if level is not None and props.get("level") != level:
            continue
        geom = feat.get("geometry", {})
        rings = []
        if geom.get("type") == "Polygon":
            polys = [geom["coordinates"]]
        elif geom.get("type") == "MultiPolygon":
            polys = geom["coordinates"]
        else:
            raise ValueError(f"unsupported geometry type {geom.get('type')!r}")
        for poly in polys:
            for ring in poly:
                rings.append(np.asarray(ring, dtype=np.float64))
        divisions.append(Division(
            id=str(props["id"]),
            name=props.get("name", str(props["id"])),
            level=props.get("level", LEVEL_DIV),
            rings=rings,
        ))
    return divisions


def validate_disjoint(divisions, samples: int = 200, rng_seed: int = 7) -> list[tuple]:
    """Sample-based overlap check; returns offending (point, id, id) triples."""
    if len(divisions) < 2:
        return []
    pts = np.vstack([np.vstack(d.rings) for d in divisions])
    lon_min, lat_min = pts.min(axis=0)
    lon_max, lat_max = pts.max(axis=0)
    rng = np.random.default_rng(rng_seed)
    bad = []
    for _ in range(samples):
        lon = rng.uniform(lon_min, lon_max)
        lat = rng.uniform(lat_min, lat_max)
        hits = [d.id for d in divisions if point_in_rings(lon, lat, d.rings)]
        if len(hits) > 1:
            bad.append(((lon, lat), hits[0], hits[1]))
    return bad


def cell_division_map(lattice: Lattice, divisions) -> np.ndarray:
    """Index of the division containing each cell center, -1 outside all.

    Shape (rows, cols) int32; indexes into the `divisions` list order.
    """
    out = np.full((lattice.rows, lattice.cols), -1, dtype=np.int32)
    lons, lats = lattice.center_arrays()
    for idx, d in enumerate(divisions):
        lon_min, lat_min, lon_max, lat_max = d.bbox()
        cand = (
            (lons >= lon_min) & (lons <= lon_max) &
            (lats >= lat_min) & (lats <= lat_max) & (out == -1)
        )
        rr, cc = np.nonzero(cand)
        for r, c in zip(rr.tolist(), cc.tolist()):
            if point_in_rings(lons[r, c], lats[r, c], d.rings):
                out[r, c] = idx
    return out


def load_demographics(path, divisions) -> dict:
    """Attach gdp/population/house_price rows to divisions by id.

    Unknown division ids are skipped and listed in the returned report.
    """
    by_id = {d.id: d for d in divisions}
    report = {"attached": 0, "unknown_ids": []}
    with open(path, "r", encoding="utf-8", newline="") as f:
        for row in csv.DictReader(f):
            div = by_id.get(str(row["division_id"]))
            if div is None:
                report["unknown_ids"].append(str(row["division_id"]))
                continue
            for key in ("gdp", "population", "house_price"):
                if row.get(key) not in (None, ""):
                    div.demographics[key] = float(row[key])
            report["attached"] += 1
    return report
