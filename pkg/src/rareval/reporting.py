"""Figure rendering for run reports.

Reads the delimited report files written by the runner and renders the
companion figures (overall MAE per scenario, cold-start MAE by interaction
count) as PNG files next to them. Plotting is presentation only; every
number lives in the CSVs.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def _read_csv(path: Path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def render_report_figures(run_dir: str | Path) -> list[Path]:
    """Render figures for a run directory; returns the files written."""
    run_dir = Path(run_dir)
    written: list[Path] = []

    rows = [r for r in _read_csv(run_dir / "report.csv") if r["status"] == "ok" and r["mae"]]
    if rows:
        fig, ax = plt.subplots(figsize=(max(4, 0.9 * len(rows)), 3.2))
        labels = [r["scenario_id"] for r in rows]
        ax.bar(range(len(rows)), [float(r["mae"]) for r in rows], color="#4878b0")
        ax.set_xticks(range(len(rows)))
        ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
        ax.set_ylabel("MAE")
        ax.set_title(rows[0]["predictor_id"])
        fig.tight_layout()
        path = run_dir / "mae_by_scenario.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)

    cold = _read_csv(run_dir / "cold_start.csv") if (run_dir / "cold_start.csv").exists() else []
    by_scenario: dict[str, list[tuple[int, float]]] = {}
    for r in cold:
        if r["mae"]:
            by_scenario.setdefault(r["scenario_id"], []).append((int(r["f"]), float(r["mae"])))
    if by_scenario:
        fig, ax = plt.subplots(figsize=(5, 3.2))
        for sid, pts in by_scenario.items():
            pts.sort()
            ax.plot([f for f, _ in pts], [m for _, m in pts], marker="o", label=sid)
        ax.set_xlabel("training interactions per user (f)")
        ax.set_ylabel("MAE")
        ax.legend(fontsize=7)
        fig.tight_layout()
        path = run_dir / "cold_start.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)

    return written
