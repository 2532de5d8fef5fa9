"""CSV/JSON outputs and PNG figures for training and evaluation runs."""
from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ..sim.floorplan import FloorPlan  # noqa: E402
from .tasks import CATEGORIES  # noqa: E402
from .train import write_csv  # noqa: E402

EVAL_COLUMNS = ("task", "episode", "steps", "success", "terminated_by", "category", "npl")

STYLE = {
    "figure.figsize": (6.0, 3.8),
    "figure.dpi": 110,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "legend.frameon": False,
}


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _moving_average(x, k):
    x = np.asarray(x, dtype=float)
    if len(x) == 0 or k <= 1:
        return x
    k = min(k, len(x))
    c = np.cumsum(np.insert(x, 0, 0.0))
    head = c[1:k] / np.arange(1, k)
    return np.concatenate([head, (c[k:] - c[:-k]) / k])


def plot_learning_curve(episodes: list[dict], path, window: int = 10) -> Path:
    """Steps per episode and rolling success rate over training order."""
    steps = [int(r["steps"]) for r in episodes]
    wins = [int(r["success"]) for r in episodes]
    tasks = [int(r["task"]) for r in episodes]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(steps, lw=0.7, color="0.6", label="actions")
        ax.plot(_moving_average(steps, window), lw=1.5, color="C0", label=f"actions ({window}-ep mean)")
        ax.set_xlabel("episode")
        ax.set_ylabel("actions per episode")
        for i in range(1, len(tasks)):
            if tasks[i] != tasks[i - 1]:
                ax.axvline(i - 0.5, color="0.85", lw=0.6, zorder=0)
        ax2 = ax.twinx()
        ax2.plot(_moving_average(wins, window), color="C3", lw=1.2, label="success rate")
        ax2.set_ylim(-0.02, 1.02)
        ax2.set_ylabel("success rate")
        ax2.grid(False)
        h1, l1 = ax.get_legend_handles_labels()
        h2, l2 = ax2.get_legend_handles_labels()
        ax.legend(h1 + h2, l1 + l2, loc="upper right", fontsize=8)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return Path(path)


def plot_npl(reports: dict, path) -> Path:
    """Grouped bars: mean NPL per link-state category for each policy."""
    labels = list(reports)
    cats = [c for c in CATEGORIES if any(c in reports[k]["categories"] for k in labels)]
    width = 0.8 / max(len(labels), 1)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        x = np.arange(len(cats))
        for i, k in enumerate(labels):
            stats = [reports[k]["categories"].get(c, {}) for c in cats]
            mean = [s.get("npl_mean") or np.nan for s in stats]
            err = [s.get("npl_std") or 0.0 for s in stats]
            ax.bar(x + (i - (len(labels) - 1) / 2) * width, mean, width, yerr=err, capsize=2, label=k)
        ax.axhline(1.0, color="k", lw=0.6, ls="--")
        ax.set_xticks(x, cats)
        ax.set_ylabel("NPL (successful episodes)")
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return Path(path)


def plot_trajectory(plan: FloorPlan, points, path, start=None, title: str = "") -> Path:
    """Occupancy grid with one executed trajectory and the transmitter."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    w = h = plan.extent
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 4.5))
        ax.imshow(plan.occupied, origin="lower", cmap="Greys", extent=(0, w, 0, h), interpolation="nearest")
        if len(pts):
            ax.plot(pts[:, 0], pts[:, 1], color="C0", lw=1.2)
            ax.plot(*(pts[0] if start is None else start), "o", color="C2", ms=5, label="start")
        ax.plot(plan.tx[0], plan.tx[1], "*", color="C3", ms=10, label="tx")
        ax.set_xlim(0, w)
        ax.set_ylim(0, h)
        ax.set_aspect("equal")
        ax.grid(False)
        ax.set_xlabel("x [m]")
        ax.set_ylabel("y [m]")
        if title:
            ax.set_title(title, fontsize=9)
        ax.legend(loc="upper right", fontsize=7)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return Path(path)


def write_eval_outputs(out_dir, report, rows: list, plan: FloorPlan | None = None, trajectory=None) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "episodes": write_csv(out / "eval_episodes.csv", rows, EVAL_COLUMNS),
        "summary": write_json(out / "summary.json", report.to_dict()),
        "npl": plot_npl({report.policy: report.to_dict()}, out / "npl_by_category.png"),
    }
    if plan is not None and trajectory is not None:
        files["trajectory"] = plot_trajectory(plan, trajectory, out / "trajectory.png", title=report.policy)
    return files
