"""Shared fixtures: two small synthetic cities built through the real CLI."""
from __future__ import annotations

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from urbanmetrics import cli, synth


def run_cli(args, expect_exit: int = 0):
    result = CliRunner().invoke(cli.main, args, catch_exceptions=False)
    assert result.exit_code == expect_exit, f"uf {' '.join(args)} -> {result.output}"
    return result


def mini_spec(seed: int = 99) -> synth.SyntheticCitySpec:
    spec = synth.default_spec(seed=seed)
    spec.name = "minington"
    spec.users_per_archetype = {"HOMEBODY": 6, "COMMUTER": 5, "WANDERER": 3, "TOURIST": 4}
    for a in spec.archetypes:
        a.records_per_user = (200, 200) if a.name == "WANDERER" else (50, 80)
    return spec


def morning_only_spec(seed: int = 7) -> synth.SyntheticCitySpec:
    """Tiny city whose records all fall in the morning band."""
    spec = synth.default_spec(seed=seed)
    spec.name = "twotown"
    spec.pois_per_class = 6
    spec.users_per_archetype = {"HOMEBODY": 2, "WANDERER": 2}
    profile = [1.0, 0, 0, 0, 0, 0, 0]
    spec.archetypes = [a for a in spec.archetypes if a.name in ("HOMEBODY", "WANDERER")]
    for a in spec.archetypes:
        a.records_per_user = (30, 40)
        a.time_profile = profile
    return spec


def build_city(data_dir: Path, spec: synth.SyntheticCitySpec, shards: int = 8,
               metrics: str = "all", extra_density_filters: str | None = None) -> Path:
    city_dir = data_dir / spec.name
    spec_path = data_dir / f"{spec.name}_spec.json"
    synth.save_spec(spec, spec_path)
    run_cli(["synth", "--spec", str(spec_path), "--out", str(city_dir)])
    run_cli(["ingest", "--input", str(city_dir / "records.txt"), "--city", str(city_dir),
             "--shards", str(shards), "--workers", "2"])
    run_cli(["grid-profiles", "--city", str(city_dir)])
    run_cli(["metrics", "--city", str(city_dir), "--metric", metrics, "--filter", "all",
             "--workers", "1"])
    if extra_density_filters:
        run_cli(["metrics", "--city", str(city_dir), "--metric", "density",
                 "--filter", extra_density_filters, "--workers", "1"])
    return city_dir


@pytest.fixture(scope="session")
def data_dir(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("cities")
    build_city(
        root, mini_spec(), shards=8,
        extra_density_filters=(
            "morning,forenoon,noon,afternoon,evening,night,midnight,weekday,weekend"
        ),
    )
    build_city(root, morning_only_spec(), shards=4,
               metrics="density,vibrancy", extra_density_filters="night")
    return root


@pytest.fixture(scope="session")
def mini_city(data_dir) -> Path:
    return data_dir / "minington"


@pytest.fixture(scope="session")
def mini_manifest(mini_city) -> dict:
    with open(mini_city / "shards" / "manifest.json", "r", encoding="utf-8") as f:
        return json.load(f)
