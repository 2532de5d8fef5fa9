"""Evaluation by normalized path length (NPL) with common random numbers."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..sim.floorplan import FloorPlan
from .agent import Agent, episode_rngs, run_episode
from .config import RunConfig
from .tasks import CATEGORIES, TaskSpec, shortest_actions, task_plan

EVAL_STREAM = 1_000_003  # offset keeping evaluation seeds apart from training seeds


@dataclass
class TaskResult:
    task: str
    category: str
    shortest: int
    repeats: int
    success_rate: float
    npl_mean: float | None
    npl_std: float | None
    npls: list = field(default_factory=list)


@dataclass
class EvalReport:
    policy: str
    tasks: list
    categories: dict
    overall: dict

    def to_dict(self) -> dict:
        return {
            "policy": self.policy,
            "categories": self.categories,
            "overall": self.overall,
            "tasks": [{k: v for k, v in asdict(t).items() if k != "npls"} for t in self.tasks],
        }

    def category_npl(self, category: str) -> float | None:
        return self.categories.get(category, {}).get("npl_mean")


def _stats(npls, successes, n):
    npls = np.asarray(npls, dtype=float)
    return {
        "npl_mean": float(npls.mean()) if len(npls) else None,
        "npl_std": float(npls.std()) if len(npls) else None,
        "success_rate": float(successes / n) if n else None,
        "episodes": int(n),
    }


def evaluate(cfg: RunConfig, agent: Agent, tasks: list[TaskSpec], plans: dict,
             repeats: int | None = None, seed: int | None = None, rows: list | None = None) -> EvalReport:
    """Run every task ``repeats`` times; NPL averages successful episodes only.

    Environment noise for (task, repeat) depends only on the seed, so two
    policies evaluated with the same seed see the same noise streams.
    """
    repeats = cfg.eval_repeats if repeats is None else repeats
    seed = cfg.seed if seed is None else seed
    results = []
    for ti, task in enumerate(tasks):
        base: FloorPlan = plans[task.map_id]
        plan = task_plan(base, task)
        shortest = shortest_actions(plan, plan.cell_center(*task.start_cell), task.heading)
        npls, wins = [], 0
        for r in range(repeats):
            log = run_episode(base, task, agent, cfg, episode_rngs(seed + EVAL_STREAM, ti, r),
                              train=False, task_index=ti, episode=r)
            npl = log.steps / shortest if log.success and shortest > 0 else None
            if log.success:
                wins += 1
                npls.append(npl)
            if rows is not None:
                rows.append({"task": ti, "episode": r, "steps": log.steps, "success": int(log.success),
                             "terminated_by": log.terminated_by, "category": task.category,
                             "npl": "" if npl is None else round(npl, 6)})
        arr = np.asarray(npls, dtype=float)
        results.append(TaskResult(task.key(), task.category, shortest, repeats, wins / repeats,
                                  float(arr.mean()) if len(arr) else None,
                                  float(arr.std()) if len(arr) else None, npls))
    categories = {}
    for cat in CATEGORIES:
        sel = [t for t in results if t.category == cat]
        if not sel:
            continue
        pooled = [v for t in sel for v in t.npls]
        categories[cat] = _stats(pooled, sum(t.success_rate * t.repeats for t in sel),
                                 sum(t.repeats for t in sel))
    overall = _stats([v for t in results for v in t.npls],
                     sum(t.success_rate * t.repeats for t in results), sum(t.repeats for t in results))
    return EvalReport(agent.label, results, categories, overall)
