"""Sequential training over a task list with sliding-window early stopping."""
from __future__ import annotations

import csv
import logging
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import ppo
from ..dsl import ast, load_program
from ..perception import policy_input_size
from ..sim.floorplan import read_map
from .agent import Agent, episode_rngs, run_episode
from .config import RunConfig
from .tasks import TaskSpec, default_task, generate_tasks

log = logging.getLogger(__name__)

EPISODE_COLUMNS = ("task", "episode", "steps", "success", "terminated_by")
TRANSITION_COLUMNS = ("task", "episode", "t", "sampled", "executed", "compliant", "weight", "cost",
                      "corrected_cost", "ell_before", "ell_after", "done")
ROTATION_STREAM = 500_000  # episode-index offset for rotation episodes

DROPS = {
    "snr": ("SNR prior", "Cost Correction"),
    "linkstate": ("Link State Prior",),
}


def load_suite(cfg: RunConfig):
    """Plans keyed by map name, and the task list the config asks for."""
    plans = {}
    for p in cfg.map_paths():
        plan = read_map(p)
        plans[plan.name] = plan
    if cfg.tasks == "header":
        tasks = [default_task(plan, cfg.max_reflections) for plan in plans.values()]
    else:
        tasks = generate_tasks(list(plans.values()), rng=np.random.default_rng(cfg.seed),
                               max_reflections=cfg.max_reflections)
    if cfg.categories:
        tasks = [t for t in tasks if t.category in cfg.categories]
    return plans, tasks


def build_program(cfg: RunConfig, drop: tuple = ()) -> ast.Program:
    program = load_program(cfg.program_path().read_text(encoding="utf-8"))
    names = []
    for d in drop:
        names += DROPS[d]
    return program.without(*names) if names else program


def make_agent(kind: str, cfg: RunConfig, drop: tuple = (), net: ppo.PolicyNet | None = None) -> Agent:
    program = build_program(cfg, drop) if kind in ("piprl", "wan") else None
    if kind in ("piprl", "nprl") and net is None:
        net = ppo.PolicyNet(policy_input_size(cfg.max_paths), cfg.hidden, seed=cfg.seed)
    label = kind if not drop else f"{kind}-no-{'-'.join(drop)}"
    return Agent(kind, program, net if kind in ("piprl", "nprl") else None, label)


@dataclass
class TrainResult:
    agent: Agent
    episodes: list = field(default_factory=list)
    transitions: list = field(default_factory=list)
    episodes_to_stop: dict = field(default_factory=dict)  # task index -> episodes run
    updates: int = 0
    checkpoint: Path | None = None

    def summary(self) -> dict:
        return {
            "policy": self.agent.label,
            "episodes_to_stop": {str(k): v for k, v in self.episodes_to_stop.items()},
            "total_episodes": len(self.episodes),
            "ppo_updates": self.updates,
            "success_rate": float(np.mean([r["success"] for r in self.episodes])) if self.episodes else None,
        }


def early_stop(window: deque, threshold: int) -> bool:
    return sum(window) >= threshold


def train(cfg: RunConfig, kind: str = "piprl", drop: tuple = (), out_dir=None, resume: bool = False,
          plans=None, tasks: list[TaskSpec] | None = None) -> TrainResult:
    """Train on tasks in order. Each task ends early once the last
    ``early_stop_window`` episodes contain at least ``early_stop_successes`` successes.
    """
    if plans is None or tasks is None:
        plans, tasks = load_suite(cfg)
    agent = make_agent(kind, cfg, drop)
    pcfg = cfg.ppo()
    update_rng = np.random.default_rng([cfg.seed, 7919])
    schedule_rng = np.random.default_rng([cfg.seed, 104729])
    result = TrainResult(agent)
    out = Path(out_dir) if out_dir is not None else None
    ckpt = out / "checkpoint.npz" if out is not None else None
    done_tasks = 0

    if resume and ckpt is not None and ckpt.exists():
        net, _, rng_state, extra = ppo.load_checkpoint(ckpt)
        if extra.get("kind") != kind or tuple(extra.get("drop", ())) != tuple(drop):
            raise ValueError("checkpoint was written by a different policy variant")
        if agent.net is not None:
            agent.net = net
        if rng_state is not None:
            update_rng = rng_state
        schedule_rng.bit_generator.state = extra["schedule_rng"]
        done_tasks = int(extra["completed_tasks"])
        result.updates = int(extra.get("updates", 0))
        result.episodes_to_stop = {int(k): v for k, v in extra.get("episodes_to_stop", {}).items()}
        result.episodes = [r for r in _read_csv(out / "episodes.csv") if int(r["task"]) < done_tasks]
        result.transitions = [r for r in _read_csv(out / "transitions.csv") if int(r["task"]) < done_tasks]
        log.info("resuming after %d completed task(s)", done_tasks)

    buffer = ppo.RolloutBuffer()

    def update(final: bool = False):
        if agent.net is None:
            buffer.clear()
            return
        if len(buffer) < min(pcfg.batch_size, pcfg.rollout):
            if final:
                buffer.clear()
            return  # too small for a minibatch: carry it into the next task
        ppo.compute_advantages(buffer, pcfg)
        ppo.ppo_update(agent.net, buffer, pcfg, update_rng)
        result.updates += 1
        buffer.clear()

    def run(ti: int, episode: int, phase: str):
        ep_log = run_episode(plans[tasks[ti].map_id], tasks[ti], agent, cfg,
                             episode_rngs(cfg.seed, ti, episode), train=True, buffer=buffer,
                             on_buffer_full=update, task_index=ti, episode=episode)
        result.episodes.append({"task": ti, "episode": episode, "steps": ep_log.steps,
                                "success": int(ep_log.success), "terminated_by": ep_log.terminated_by,
                                "phase": phase})
        for row in ep_log.transitions:
            result.transitions.append({"task": ti, "episode": episode, **row})
        return ep_log

    for ti in range(done_tasks, len(tasks)):
        window: deque = deque(maxlen=cfg.early_stop_window)
        n = 0
        for episode in range(cfg.episodes_per_task):
            ep_log = run(ti, episode, "task")
            n += 1
            window.append(int(ep_log.success))
            if early_stop(window, cfg.early_stop_successes):
                break
        result.episodes_to_stop[ti] = n
        log.info("task %d (%s): %d episode(s)", ti, tasks[ti].category, n)
        if kind == "nprl" and ti > 0 and cfg.rotation_tasks > 0:
            k = min(cfg.rotation_tasks, ti)
            for prev in sorted(schedule_rng.choice(ti, size=k, replace=False).tolist()):
                for e in range(cfg.rotation_episodes):
                    run(int(prev), ROTATION_STREAM * (ti + 1) + e, "rotation")
        update(final=ti == len(tasks) - 1)
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
            _write_logs(out, result)
            if agent.net is not None:
                ppo.save_checkpoint(ckpt, agent.net, pcfg, update_rng, extra={
                    "kind": kind, "drop": list(drop), "completed_tasks": ti + 1,
                    "updates": result.updates, "schedule_rng": schedule_rng.bit_generator.state,
                    "episodes_to_stop": result.episodes_to_stop, "seed": cfg.seed,
                })
                result.checkpoint = ckpt
    return result


def _write_logs(out: Path, result: TrainResult) -> None:
    write_csv(out / "episodes.csv", result.episodes, EPISODE_COLUMNS + ("phase",))
    write_csv(out / "transitions.csv", result.transitions, TRANSITION_COLUMNS)


def write_csv(path, rows, columns) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(r.get(k, "")) for k in columns})
    return path


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _read_csv(path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        return []
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for r in csv.DictReader(fh):
            rows.append(r)
    return rows
