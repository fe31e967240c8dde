#!/usr/bin/env python3
"""Regenerate the colorization parity fixtures.

Builds a small deterministic city with the urbanmetrics CLI, captures three
rasters through the public surfaces (the /raster wire bytes and the
`uf render` PNG export, same parameters), and freezes them plus their
parameters under tests/fixtures/. The vitest parity suite then re-colorizes
the wire bytes in TypeScript and compares against the PNG at +-1 LSB.

Run from frontend/:  python3 scripts/make_goldens.py
"""
import json
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from urbanmetrics import synth
from urbanmetrics.service import create_app

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

GOLDENS = [
    {
        "name": "density_plain",
        "metric": "density",
        "filter": "all",
        "width": 200,
        "height": 150,
        "zoom": 1.0,
        "radius_px": 8.0,
        "adaptive": True,
        "t_min": 0.5,
        "t_max": 40.0,
        "reversed": False,
        "opacity": 1.0,
    },
    {
        "name": "vibrancy_reversed",
        "metric": "vibrancy",
        "filter": "all",
        "width": 160,
        "height": 120,
        "zoom": 2.0,
        "radius_px": 5.0,
        "adaptive": True,
        "t_min": 0.2,
        "t_max": 2.1,
        "reversed": True,
        "opacity": 0.8,
    },
    {
        "name": "fluidity_step",
        "metric": "fluidity",
        "filter": "all",
        "width": 180,
        "height": 135,
        "zoom": 1.0,
        "radius_px": 6.0,
        "adaptive": False,
        "t_min": 1.0,
        "t_max": 1.0,
        "reversed": False,
        "opacity": 0.55,
    },
]


def run(args):
    proc = subprocess.run([sys.executable, "-m", "urbanmetrics.cli", *args],
                          capture_output=True, text=True)
    if proc.returncode != 0:
        raise RuntimeError(f"uf {' '.join(args)} failed:\n{proc.stdout}\n{proc.stderr}")


def main():
    FIXTURES.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        city = root / "goldenville"
        spec = synth.default_spec(seed=20150703)
        spec.name = "goldenville"
        spec.users_per_archetype = {"HOMEBODY": 8, "COMMUTER": 6, "WANDERER": 4, "TOURIST": 5}
        for a in spec.archetypes:
            a.records_per_user = (80, 120) if a.name != "WANDERER" else (300, 300)
        spec_path = root / "spec.json"
        synth.save_spec(spec, spec_path)

        run(["synth", "--spec", str(spec_path), "--out", str(city)])
        run(["ingest", "--input", str(city / "records.txt"), "--city", str(city),
             "--shards", "8"])
        run(["grid-profiles", "--city", str(city)])
        run(["metrics", "--city", str(city), "--metric", "density,vibrancy,fluidity",
             "--filter", "all"])

        client = TestClient(create_app(root))
        manifest = []
        for g in GOLDENS:
            resp = client.get("/raster", params={
                "city": "goldenville", "metric": g["metric"], "filter": g["filter"],
                "width": g["width"], "height": g["height"], "zoom": g["zoom"],
                "radius_px": g["radius_px"], "adaptive": g["adaptive"],
            })
            resp.raise_for_status()
            (FIXTURES / f"{g['name']}.bin").write_bytes(resp.content)

            png_path = FIXTURES / f"{g['name']}.png"
            run([
                "render", "--city", str(city), "--metric", g["metric"],
                "--filter", g["filter"],
                "--width", str(g["width"]), "--height", str(g["height"]),
                "--zoom", str(g["zoom"]), "--radius-px", str(g["radius_px"]),
                "--adaptive" if g["adaptive"] else "--fixed",
                "--t-min", str(g["t_min"]), "--t-max", str(g["t_max"]),
                *(["--reversed"] if g["reversed"] else []),
                "--opacity", str(g["opacity"]),
                "--png", str(png_path),
            ])
            manifest.append(g)
        (FIXTURES / "goldens.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"wrote {len(GOLDENS)} goldens to {FIXTURES}")


if __name__ == "__main__":
    main()
