"""Result serialization and figure rendering.

Per-run results go to a long-format CSV
(`topology,threshold_pct,run,delivery_ratio,node,mean_occ_pct,max_occ_pct`);
aggregates carry `mean,ci95` columns. The report path joins per-run CSVs
from one or more sweep manifests into tidy tables keyed by
(topology, threshold, metric) and renders the corresponding figures
(delivery ratio and HAPS buffer occupancy vs cloud threshold) as PNGs
alongside the delimited output.
"""

from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .errors import DataError
from .simengine import MonteCarloReport
from .weather import FailureStats

RUNS_CSV_HEADER = [
    "topology",
    "threshold_pct",
    "run",
    "delivery_ratio",
    "node",
    "mean_occ_pct",
    "max_occ_pct",
]
AGGREGATE_CSV_HEADER = ["topology", "threshold_pct", "metric", "node", "mean", "ci95"]


def write_runs_csv(reports: Iterable[MonteCarloReport], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RUNS_CSV_HEADER)
        for report in reports:
            for agg in report.aggregates:
                for summary in agg.runs:
                    for node in sorted(summary.node_occupancy):
                        mean_occ, max_occ = summary.node_occupancy[node]
                        writer.writerow(
                            [
                                report.topology,
                                repr(agg.threshold_pct),
                                summary.run_index,
                                repr(summary.delivery_ratio),
                                node,
                                repr(mean_occ),
                                repr(max_occ),
                            ]
                        )


def write_aggregate_csv(reports: Iterable[MonteCarloReport], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(AGGREGATE_CSV_HEADER)
        for report in reports:
            for agg in report.aggregates:
                writer.writerow(
                    [
                        report.topology,
                        repr(agg.threshold_pct),
                        "delivery_ratio",
                        "",
                        repr(agg.delivery_mean),
                        repr(agg.delivery_ci95),
                    ]
                )
                for node in sorted(agg.node_mean_occ):
                    mean, ci = agg.node_mean_occ[node]
                    writer.writerow(
                        [report.topology, repr(agg.threshold_pct), "mean_occ_pct", node, repr(mean), repr(ci)]
                    )
                    mean, ci = agg.node_max_occ[node]
                    writer.writerow(
                        [report.topology, repr(agg.threshold_pct), "max_occ_pct", node, repr(mean), repr(ci)]
                    )


@dataclass
class RunRow:
    topology: str
    threshold_pct: float
    run: int
    delivery_ratio: float
    node: str
    mean_occ_pct: float
    max_occ_pct: float


def read_runs_csv(path: str | Path) -> list[RunRow]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty runs CSV") from None
        if [h.strip() for h in header] != RUNS_CSV_HEADER:
            raise DataError(f"{path}: unexpected runs CSV header")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append(
                    RunRow(
                        row[0],
                        float(row[1]),
                        int(row[2]),
                        float(row[3]),
                        row[4],
                        float(row[5]),
                        float(row[6]),
                    )
                )
            except (ValueError, IndexError) as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from None
    return rows


def tidy_aggregate(rows: list[RunRow]) -> list[dict]:
    """Recompute mean/ci95 per (topology, threshold, metric, node) from runs."""
    ratio_samples: dict[tuple, dict[int, float]] = defaultdict(dict)
    occ_samples: dict[tuple, list[tuple[float, float]]] = defaultdict(list)
    for r in rows:
        ratio_samples[(r.topology, r.threshold_pct)][r.run] = r.delivery_ratio
        occ_samples[(r.topology, r.threshold_pct, r.node)].append(
            (r.mean_occ_pct, r.max_occ_pct)
        )

    def mean_ci(values: list[float]) -> tuple[float, float]:
        n = len(values)
        mean = float(np.mean(values))
        ci = 1.96 * float(np.std(values, ddof=1)) / math.sqrt(n) if n > 1 else 0.0
        return mean, ci

    out = []
    for (topology, threshold), per_run in sorted(ratio_samples.items()):
        mean, ci = mean_ci(list(per_run.values()))
        out.append(
            {
                "topology": topology,
                "threshold_pct": threshold,
                "metric": "delivery_ratio",
                "node": "",
                "mean": mean,
                "ci95": ci,
                "n_runs": len(per_run),
            }
        )
    for (topology, threshold, node), samples in sorted(occ_samples.items()):
        for metric, values in (
            ("mean_occ_pct", [s[0] for s in samples]),
            ("max_occ_pct", [s[1] for s in samples]),
        ):
            mean, ci = mean_ci(values)
            out.append(
                {
                    "topology": topology,
                    "threshold_pct": threshold,
                    "metric": metric,
                    "node": node,
                    "mean": mean,
                    "ci95": ci,
                    "n_runs": len(values),
                }
            )
    return out


def write_tidy_csv(
    tidy_rows: list[dict], path: str | Path, warnings: list[str] | None = None
) -> None:
    with open(path, "w", newline="") as fh:
        for warning in warnings or []:
            fh.write(f"# warning: {warning}\n")
        writer = csv.writer(fh)
        writer.writerow(AGGREGATE_CSV_HEADER + ["n_runs"])
        for row in tidy_rows:
            writer.writerow(
                [
                    row["topology"],
                    repr(row["threshold_pct"]),
                    row["metric"],
                    row["node"],
                    repr(row["mean"]),
                    repr(row["ci95"]),
                    row["n_runs"],
                ]
            )


def load_manifest(path: Path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: cannot read manifest: {exc}") from None


# --- figures -----------------------------------------------------------------


def plot_contact_histogram(
    histogram: list[tuple[float, float, int]], title: str, path: str | Path
) -> None:
    fig, ax = plt.subplots(figsize=(8, 5))
    if histogram:
        lefts = [row[0] for row in histogram]
        widths = [row[1] - row[0] for row in histogram]
        counts = [row[2] for row in histogram]
        ax.bar(lefts, counts, width=widths, align="edge", edgecolor="black")
    ax.set_xlabel("Contact duration (s)")
    ax.set_ylabel("Count")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_ttf_ttr(stats_by_site: dict[str, list[FailureStats]], path: str | Path) -> None:
    fig, (ax_ttf, ax_ttr) = plt.subplots(2, 1, figsize=(8, 8), sharex=True)
    for site, stats in sorted(stats_by_site.items()):
        thresholds = [s.cloud_threshold_pct for s in stats]
        ax_ttf.plot(thresholds, [s.mean_ttf_s / 3600.0 for s in stats], marker="o", label=site)
        ax_ttr.plot(thresholds, [s.mean_ttr_s / 3600.0 for s in stats], marker="o", label=site)
    ax_ttf.set_ylabel("Mean TTF (h)")
    ax_ttr.set_ylabel("Mean TTR (h)")
    ax_ttr.set_xlabel("Cloud threshold (%)")
    for ax in (ax_ttf, ax_ttr):
        ax.grid(True, alpha=0.3)
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_delivery_ratio(tidy_rows: list[dict], path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(8, 5))
    by_topology: dict[str, list[dict]] = defaultdict(list)
    for row in tidy_rows:
        if row["metric"] == "delivery_ratio":
            by_topology[row["topology"]].append(row)
    for topology, rows in sorted(by_topology.items()):
        rows.sort(key=lambda r: r["threshold_pct"])
        x = [r["threshold_pct"] for r in rows]
        y = [r["mean"] for r in rows]
        err = [r["ci95"] for r in rows]
        ax.errorbar(x, y, yerr=err, marker="o", capsize=3, label=topology)
    ax.set_xlabel("Cloud threshold (%)")
    ax.set_ylabel("Delivery ratio")
    ax.set_ylim(-0.02, 1.05)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_buffer_occupancy(tidy_rows: list[dict], path: str | Path) -> None:
    """Mean and max HAPS buffer occupancy vs cloud threshold."""
    fig, ax = plt.subplots(figsize=(8, 5))
    groups: dict[tuple[str, str, str], list[dict]] = defaultdict(list)
    for row in tidy_rows:
        if row["metric"] in ("mean_occ_pct", "max_occ_pct") and row["node"].startswith("HAPS"):
            groups[(row["topology"], row["node"], row["metric"])].append(row)
    for (topology, node, metric), rows in sorted(groups.items()):
        rows.sort(key=lambda r: r["threshold_pct"])
        x = [r["threshold_pct"] for r in rows]
        y = [r["mean"] for r in rows]
        style = "-" if metric == "mean_occ_pct" else "--"
        label = f"{topology} {node} ({'mean' if metric == 'mean_occ_pct' else 'max'})"
        ax.plot(x, y, style, marker="o", label=label)
    ax.set_xlabel("Cloud threshold (%)")
    ax.set_ylabel("Buffer occupancy (% of generated bundles)")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
