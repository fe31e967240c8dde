"""Check-in record ingestion: parse, source-filter, device cleansing, sharding.

Input rows look like ``20:10/07/03/2015, 116.3336266,39.890955,1470076020481,GPS``
(the date part is month/day/year). Only GPS and WIFI records are kept, the
timestamp is discretized to 10-minute slots counted from midnight of the
dataset's first day, devices outside the [1, 2500] records-per-month window
are removed, and the survivors are hash-partitioned into per-device shard
files so downstream stages can process shards in parallel without I/O
conflicts.

Shard lines reuse the input row format with the timeslot in place of the
timestamp, so shards stay greppable.
"""
from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from pathlib import Path

SOURCES = ("GPS", "WIFI", "BASE_STATION", "IP")
KEPT_SOURCES = frozenset({"GPS", "WIFI"})

# records-per-month cleansing window, inclusive at both ends
RATE_MIN = 1.0
RATE_MAX = 2500.0
DAYS_PER_MONTH = 30.0

DEFAULT_SHARDS = 10000
SHARD_NAME = "shard_%05d.rec"
MANIFEST_NAME = "manifest.json"
PARTIAL_MARKER = ".partial"


class RecordParseError(ValueError):
    """One malformed input line; collected with its line number, never fatal."""

    def __init__(self, reason: str, detail: str = "", line_no: int = 0):
        at = f" (line {line_no})" if line_no else ""
        super().__init__(f"{reason}: {detail}{at}" if detail else f"{reason}{at}")
        self.reason = reason
        self.line_no = line_no


@dataclass(frozen=True)
class RawRecord:
    time: datetime  # minute precision
    lon: float
    lat: float
    mid: str
    src: str


@dataclass(frozen=True)
class CleanRecord:
    timeslot: int  # 10-minute interval index since epoch midnight
    lon: float
    lat: float
    mid: str
    src: str
    cell: tuple | None = None  # (col, row), assigned by the grid stage


@dataclass(frozen=True)
class DeviceSummary:
    mid: str
    record_count: int
    months_spanned: float

    @property
    def monthly_rate(self) -> float:
        return self.record_count / self.months_spanned


def parse_record(line: str, line_no: int = 0) -> RawRecord:
    """Decode one ``HH:MM/MM/DD/YYYY,lon,lat,mid,src`` row.

    A single space after each comma is tolerated. Raises RecordParseError
    for a wrong field count, unparseable numbers, an impossible calendar
    instant, out-of-range coordinates, or an unknown source.
    """
    parts = line.rstrip("\n").split(",")
    if len(parts) != 5:
        raise RecordParseError("field_count", f"expected 5 fields, got {len(parts)}", line_no)
    ts_text, lon_text, lat_text, mid, src = (p.strip(" ") for p in parts)
    try:
        clock, month, day, year = ts_text.split("/")
        hh, mm = clock.split(":")
        when = datetime(int(year), int(month), int(day), int(hh), int(mm))
    except ValueError as exc:
        raise RecordParseError("bad_time", ts_text, line_no) from exc
    try:
        lon = float(lon_text)
        lat = float(lat_text)
    except ValueError as exc:
        raise RecordParseError("bad_number", f"{lon_text!r},{lat_text!r}", line_no) from exc
    if not (-180.0 <= lon <= 180.0):
        raise RecordParseError("lon_range", lon_text, line_no)
    if not (-90.0 <= lat <= 90.0):
        raise RecordParseError("lat_range", lat_text, line_no)
    if src not in SOURCES:
        raise RecordParseError("bad_src", src, line_no)
    if not mid:
        raise RecordParseError("empty_mid", line_no=line_no)
    return RawRecord(time=when, lon=lon, lat=lat, mid=mid, src=src)


def filter_and_discretize(rec: RawRecord, epoch: date) -> CleanRecord | None:
    """Keep GPS/WIFI records, discretized to 10-minute slots; None means dropped."""
    if rec.src not in KEPT_SOURCES:
        return None
    if rec.time.date() < epoch:
        raise ValueError(f"record predates epoch {epoch}: {rec.time}")
    minutes = (rec.time - datetime(epoch.year, epoch.month, epoch.day)) // timedelta(minutes=1)
    return CleanRecord(timeslot=minutes // 10, lon=rec.lon, lat=rec.lat, mid=rec.mid, src=rec.src)


def cleanse_devices(summaries) -> set:
    """Mids whose monthly record rate falls inside the inclusive [1, 2500] window."""
    return {s.mid for s in summaries if RATE_MIN <= s.monthly_rate <= RATE_MAX}


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a; seedless and stable across platforms so shards replay."""
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def shard_index(mid: str, shard_count: int) -> int:
    return fnv1a64(mid.encode("ascii")) % shard_count


def format_shard_line(rec: CleanRecord) -> str:
    return f"{rec.timeslot},{rec.lon!r},{rec.lat!r},{rec.mid},{rec.src}\n"


def parse_shard_line(line: str) -> CleanRecord:
    slot, lon, lat, mid, src = line.rstrip("\n").split(",")
    return CleanRecord(timeslot=int(slot), lon=float(lon), lat=float(lat), mid=mid, src=src)


@dataclass
class ShardSet:
    out_dir: Path
    shard_count: int
    record_counts: list  # records per shard
    digests: list  # sha256 hex per shard

    def shard_path(self, idx: int) -> Path:
        return self.out_dir / (SHARD_NAME % idx)

    @property
    def total_records(self) -> int:
        return sum(self.record_counts)


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def shard_by_device(records, shard_count: int, out_dir, workers: int = 1) -> ShardSet:
    """Partition a stream of CleanRecords into per-device shard files.

    The pure sharding operation: no source filtering or cleansing, every
    input record lands in exactly one shard (hash(mid) mod B), records of a
    device stay contiguous and shards are ordered by mid. Two runs over the
    same stream produce byte-identical files.
    """
    if shard_count < 1:
        raise ValueError("shard_count must be >= 1")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    marker = out_dir / PARTIAL_MARKER
    for stale in out_dir.glob("shard_*.rec*"):
        stale.unlink()
    marker.write_text("sharding in progress\n")

    spool = _ShardSpool(out_dir, shard_count)
    for rec in records:
        # spool rows carry absolute minutes; epoch 0 makes that timeslot*10
        spool.add(rec.timeslot * 10, RawRecord(None, rec.lon, rec.lat, rec.mid, rec.src))
    spool.flush()

    jobs = [
        (spool.tmp_path(i), out_dir / (SHARD_NAME % i), 0, None)
        for i in range(shard_count)
    ]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_finalize_shard, jobs))
    else:
        results = [_finalize_shard(j) for j in jobs]
    marker.unlink()
    return ShardSet(
        out_dir=out_dir,
        shard_count=shard_count,
        record_counts=[r[0] for r in results],
        digests=[r[2] for r in results],
    )


class _ShardSpool:
    """Pass-1 spool: append parsed records to per-shard temp files.

    A single router thread owns all appends (one writer per file); buffers
    bound memory, not file handles.
    """

    def __init__(self, out_dir: Path, shard_count: int, flush_every: int = 200_000):
        self.out_dir = out_dir
        self.shard_count = shard_count
        self.buffers = [[] for _ in range(shard_count)]
        self.buffered = 0
        self.flush_every = flush_every
        self._mid_cache: dict[str, int] = {}

    def tmp_path(self, idx: int) -> Path:
        return self.out_dir / (SHARD_NAME % idx + ".tmp")

    def add(self, minutes_abs: int, rec: RawRecord) -> None:
        idx = self._mid_cache.get(rec.mid)
        if idx is None:
            idx = shard_index(rec.mid, self.shard_count)
            if len(self._mid_cache) < 1_000_000:
                self._mid_cache[rec.mid] = idx
        self.buffers[idx].append(f"{minutes_abs},{rec.lon!r},{rec.lat!r},{rec.mid},{rec.src}\n")
        self.buffered += 1
        if self.buffered >= self.flush_every:
            self.flush()

    def flush(self) -> None:
        for idx, buf in enumerate(self.buffers):
            if buf:
                with open(self.tmp_path(idx), "a", encoding="utf-8") as f:
                    f.writelines(buf)
                buf.clear()
        self.buffered = 0


def _finalize_shard(args):
    """Pass 2 for one shard: cleanse by monthly rate, sort by mid, rewrite."""
    tmp_path, final_path, epoch_minutes, months_spanned = args
    by_mid: dict[str, list] = {}
    if tmp_path.exists():
        with open(tmp_path, "r", encoding="utf-8") as f:
            for line in f:
                minutes_abs, rest = line.split(",", 1)
                timeslot = (int(minutes_abs) - epoch_minutes) // 10
                mid = rest.rsplit(",", 2)[-2]
                by_mid.setdefault(mid, []).append(f"{timeslot},{rest}")
    if months_spanned is None:  # cleansing disabled: pure sort pass
        kept_mids = set(by_mid)
    else:
        kept_mids = cleanse_devices(
            DeviceSummary(mid, len(lines), months_spanned) for mid, lines in by_mid.items()
        )
    removed = sum(len(lines) for mid, lines in by_mid.items() if mid not in kept_mids)
    kept = 0
    with open(final_path, "w", encoding="utf-8") as f:
        for mid in sorted(by_mid):
            if mid not in kept_mids:
                continue
            f.writelines(by_mid[mid])
            kept += len(by_mid[mid])
    if tmp_path.exists():
        tmp_path.unlink()
    return kept, removed, _sha256_file(final_path)


def ingest_file(
    input_path,
    out_dir,
    shard_count: int = DEFAULT_SHARDS,
    epoch: date | None = None,
    cleanse: bool = True,
    workers: int = 1,
) -> dict:
    """Run the full ingest pipeline on one record file; returns the manifest.

    Totality is accounted exactly: every input line is either rejected,
    dropped by source, removed by device cleansing, or lands in a shard.
    A ``.partial`` marker guards interrupted runs; finding one (or any
    stale shard files) triggers a clean restart of the output directory.
    """
    if shard_count < 1:
        raise ValueError("shard_count must be >= 1")
    input_path = Path(input_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    marker = out_dir / PARTIAL_MARKER

    for stale in out_dir.glob("shard_*.rec*"):
        stale.unlink()
    marker.write_text("ingest in progress\n")
    t0 = time.monotonic()

    spool = _ShardSpool(out_dir, shard_count)
    rejected: dict[str, int] = {}
    rejected_lines: list = []  # (line_no, reason) sample, capped
    dropped_src = 0
    input_lines = 0
    min_day = None
    max_day = None
    ref = datetime(1970, 1, 1)

    try:
        with open(input_path, "r", encoding="utf-8") as f:
            for line_no, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                input_lines += 1
                try:
                    rec = parse_record(line, line_no)
                except RecordParseError as exc:
                    rejected[exc.reason] = rejected.get(exc.reason, 0) + 1
                    if len(rejected_lines) < 100:
                        rejected_lines.append((line_no, exc.reason))
                    continue
                if rec.src not in KEPT_SOURCES:
                    dropped_src += 1
                    continue
                day = rec.time.date()
                min_day = day if min_day is None or day < min_day else min_day
                max_day = day if max_day is None or day > max_day else max_day
                spool.add((rec.time - ref) // timedelta(minutes=1), rec)
        spool.flush()

        if epoch is None:
            epoch = min_day
        elif min_day is not None and min_day < epoch:
            raise ValueError(f"records predate the requested epoch {epoch}")
        if epoch is None:  # nothing survived the filters
            epoch = date(1970, 1, 1)
            dataset_days = 1
        else:
            dataset_days = max(((max_day or epoch) - epoch).days + 1, 1)
        months_spanned = dataset_days / DAYS_PER_MONTH if cleanse else None
        epoch_minutes = (datetime(epoch.year, epoch.month, epoch.day) - ref) // timedelta(minutes=1)

        jobs = [
            (spool.tmp_path(i), out_dir / (SHARD_NAME % i), epoch_minutes, months_spanned)
            for i in range(shard_count)
        ]
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_finalize_shard, jobs))
        else:
            results = [_finalize_shard(j) for j in jobs]
    except OSError:
        # leave the marker in place: a rerun must restart the whole shard set
        raise
    counts = [r[0] for r in results]
    dropped_cleanse = sum(r[1] for r in results)
    digests = [r[2] for r in results]

    manifest = {
        "input": str(input_path),
        "input_digest": _sha256_file(input_path),
        "input_lines": input_lines,
        "rejected": dict(sorted(rejected.items())),
        "rejected_total": sum(rejected.values()),
        "rejected_sample": rejected_lines,
        "dropped_src": dropped_src,
        "dropped_cleanse": dropped_cleanse,
        "sharded": sum(counts),
        "shard_count": shard_count,
        "epoch": epoch.isoformat(),
        "dataset_days": dataset_days,
        "cleanse": cleanse,
        "shards": [
            {"file": SHARD_NAME % i, "records": counts[i], "sha256": digests[i]}
            for i in range(shard_count)
        ],
        "elapsed_s": round(time.monotonic() - t0, 3),
    }
    assert (
        manifest["input_lines"]
        == manifest["rejected_total"] + dropped_src + dropped_cleanse + manifest["sharded"]
    ), "totality accounting broke"
    with open(out_dir / MANIFEST_NAME, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")
    marker.unlink()
    return manifest


def load_manifest(shard_dir) -> dict:
    with open(Path(shard_dir) / MANIFEST_NAME, "r", encoding="utf-8") as f:
        return json.load(f)


def shard_paths(shard_dir) -> list:
    shard_dir = Path(shard_dir)
    if (shard_dir / PARTIAL_MARKER).exists():
        raise RuntimeError(f"{shard_dir} holds a partial ingest run; re-run ingest")
    return sorted(shard_dir.glob("shard_*.rec"))


def iter_shard_devices(shard_path):
    """Yield (mid, list_of_CleanRecord) groups; shard order is already by mid."""
    cur_mid = None
    cur: list = []
    with open(shard_path, "r", encoding="utf-8") as f:
        for line in f:
            rec = parse_shard_line(line)
            if rec.mid != cur_mid:
                if cur:
                    yield cur_mid, cur
                cur_mid = rec.mid
                cur = []
            cur.append(rec)
    if cur:
        yield cur_mid, cur
