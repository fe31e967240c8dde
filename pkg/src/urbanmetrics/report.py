"""Static reports for cached fields: distribution figures plus stats tables.

For each requested metric the report emits the grid-mean histogram as a PNG
figure and as CSV, and one shared per-division table with count-weighted
means, so results can be eyeballed and diffed without the interactive UI.
"""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from . import entropy, store

FIGSIZE = (7.0, 4.0)
DPI = 120


def write_report(city_dir: Path, metrics, tfilter, bins: int, out_dir: Path) -> list:
    city = store.load_city(city_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    fields = {}
    for m in metrics:
        f = city.field_for(m, tfilter)
        if f is None:
            raise FileNotFoundError(
                f"field cache for {entropy.MetricKind(m).value}/{tfilter.slug} missing; "
                f"run `uf metrics` first"
            )
        fields[entropy.MetricKind(m).value] = f

    for name, f in fields.items():
        h = entropy.field_histogram(f, bins)
        stem = f"{name}_{tfilter.slug}_histogram"
        csv_path = out_dir / f"{stem}.csv"
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bin_lo", "bin_hi", "count", "density"])
            for i in range(len(h.counts)):
                w.writerow([
                    f"{h.edges[i]:.9g}", f"{h.edges[i + 1]:.9g}",
                    int(h.counts[i]), f"{h.densities[i]:.9g}",
                ])
        written.append(csv_path)

        fig, ax = plt.subplots(figsize=FIGSIZE)
        widths = h.edges[1:] - h.edges[:-1]
        ax.bar(h.edges[:-1], h.densities, width=widths, align="edge",
               color="#4a7fb5", edgecolor="white", linewidth=0.3)
        ax.set_xlabel(f"grid-average {name}")
        ax.set_ylabel("probability density")
        ax.set_title(f"{city.name}: {name} ({tfilter.slug}), {f.n_cells} cells")
        fig.tight_layout()
        png_path = out_dir / f"{stem}.png"
        fig.savefig(png_path, dpi=DPI)
        plt.close(fig)
        written.append(png_path)

    if city.divisions and city.cell_div is not None:
        table_path = out_dir / f"division_stats_{tfilter.slug}.csv"
        with open(table_path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["division_id", "n_cells"]
                       + [f"{m}_mean" for m in fields]
                       + [f"{m}_count" for m in fields])
            for idx, d in enumerate(city.divisions):
                mask = entropy.cells_for_division(city.cell_div, idx)
                stats = entropy.region_stats(fields, mask)
                means = [
                    "" if stats.metrics[m]["mean"] is None else f"{stats.metrics[m]['mean']:.9g}"
                    for m in fields
                ]
                counts = [stats.metrics[m]["count"] for m in fields]
                w.writerow([d.id, stats.n_cells] + means + counts)
        written.append(table_path)
    return written
