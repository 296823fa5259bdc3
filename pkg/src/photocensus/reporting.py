"""Report assembly: one JSON document with a stable key order, delimited
per-cluster and per-strategy tables, and histogram figures rendered to files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .census import IndividualStats, PopulationEstimate, StrategyStats, format_rate
from .lca.engine import RunResult
from .pipeline import FunnelReport


def build_report_document(
    funnel: FunnelReport | None,
    run: RunResult | None,
    estimate: PopulationEstimate | None,
    individuals: IndividualStats | None,
    strategies: StrategyStats | None,
    config: dict | None = None,
) -> dict:
    """Single report document; key order is fixed and stable."""
    doc: dict = {"report_version": 1}
    doc["config"] = config or {}
    doc["funnel"] = (
        {
            "stages": [
                {
                    "name": s.name,
                    "input_count": s.input_count,
                    "output_count": s.output_count,
                    "enabled": s.enabled,
                    "detail": s.detail,
                }
                for s in funnel.stages
            ],
            "final_count": len(funnel.final_annotation_ids),
            "encounters": len(funnel.encounters),
        }
        if funnel is not None
        else None
    )
    doc["run"] = (
        {
            "cluster_count": run.cluster_count,
            "algorithmic_reviews": run.algorithmic_reviews,
            "human_reviews": run.human_reviews,
            "total_reviews": run.total_reviews,
            "automation_rate": run.automation_rate,
            "automation_rate_display": format_rate(run.automation_rate),
            "converged": run.converged,
        }
        if run is not None
        else None
    )
    doc["estimate"] = estimate.to_dict() if estimate is not None else None
    doc["individual_stats"] = individuals.to_dict() if individuals is not None else None
    doc["strategy_stats"] = strategies.to_dict() if strategies is not None else None
    return doc


def write_report_json(doc: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def write_cluster_csv(individuals: IndividualStats, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cluster_id", "encounters", "cameras"])
        for cluster_id in sorted(individuals.per_cluster):
            encounters, cameras = individuals.per_cluster[cluster_id]
            writer.writerow([cluster_id, encounters, cameras])


def write_strategy_csv(strategies: StrategyStats, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["strategy", "cameras", "total_individuals", "avg_per_camera", "new_per_camera"])
        for name in sorted(strategies.rows):
            row = strategies.rows[name]
            writer.writerow([name, row["cameras"], row["total"], row["avg"], row["new"]])


def render_figures(
    individuals: IndividualStats | None,
    strategies: StrategyStats | None,
    out_dir: str | Path,
) -> list[Path]:
    """Histogram of encounters per individual, of cameras per individual, and
    a per-strategy sightings bar chart; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    if individuals is not None and individuals.per_cluster:
        encounter_counts = [e for e, _ in individuals.per_cluster.values()]
        camera_counts = [c for _, c in individuals.per_cluster.values()]

        fig, ax = plt.subplots(figsize=(6, 4))
        bins = range(1, max(encounter_counts) + 2)
        ax.hist(encounter_counts, bins=bins, align="left", rwidth=0.85, color="#3b6ea5")
        ax.set_xlabel("encounters per individual")
        ax.set_ylabel("individuals")
        ax.set_title(f"Encounters per individual (mean {individuals.mean_encounters})")
        fig.tight_layout()
        path = out / "encounters_per_individual.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

        fig, ax = plt.subplots(figsize=(6, 4))
        bins = range(1, max(camera_counts) + 2)
        ax.hist(camera_counts, bins=bins, align="left", rwidth=0.85, color="#4a8f5d")
        ax.set_xlabel("distinct cameras per individual")
        ax.set_ylabel("individuals")
        ax.set_title(f"Cameras per individual (mean {individuals.mean_cameras})")
        fig.tight_layout()
        path = out / "cameras_per_individual.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    if strategies is not None and strategies.rows:
        names = sorted(strategies.rows)
        totals = [strategies.rows[n]["total"] for n in names]
        news = [strategies.rows[n]["new_total"] for n in names]
        fig, ax = plt.subplots(figsize=(7, 4))
        x = range(len(names))
        ax.bar([i - 0.2 for i in x], totals, width=0.4, label="individuals sighted", color="#3b6ea5")
        ax.bar([i + 0.2 for i in x], news, width=0.4, label="first sightings", color="#c06c3a")
        ax.set_xticks(list(x))
        ax.set_xticklabels(names, rotation=20, ha="right")
        ax.set_ylabel("individuals")
        ax.set_title("Sightings by camera placement strategy")
        ax.legend()
        fig.tight_layout()
        path = out / "individuals_per_strategy.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    return written


def summary_table(doc: dict) -> str:
    """Human-readable run summary for terminal output."""
    lines = []
    run = doc.get("run")
    if run:
        lines.append(f"clusters:          {run['cluster_count']}")
        lines.append(f"algorithmic:       {run['algorithmic_reviews']}")
        lines.append(f"human:             {run['human_reviews']}")
        lines.append(f"automation rate:   {run['automation_rate_display']}")
        lines.append(f"converged:         {run['converged']}")
    estimate = doc.get("estimate")
    if estimate:
        low, high = estimate["ci95"]
        lines.append(
            f"population:        {estimate['n_hat']:.1f} +/- {estimate['stderr']:.1f} "
            f"(95% CI {low:.1f}-{high:.1f}, {estimate['method']})"
        )
    individuals = doc.get("individual_stats")
    if individuals:
        lines.append(f"mean encounters:   {individuals['mean_encounters']}")
        lines.append(f"mean cameras:      {individuals['mean_cameras']}")
    return "\n".join(lines)
