"""Program ablations: train each variant on the same suite, then compare NPL."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

from .. import ppo
from .config import RunConfig
from .evaluate import EvalReport, evaluate
from .train import DROPS, load_suite, make_agent, train

log = logging.getLogger(__name__)


@dataclass
class VariantRun:
    label: str
    drop: tuple
    report: EvalReport
    rows: list
    train_summary: dict


def variant_label(drop: tuple) -> str:
    return "piprl" if not drop else "piprl-no-" + "-".join(drop)


def run_variant(cfg: RunConfig, drop: tuple, plans, tasks, out_dir=None, reuse: bool = False) -> VariantRun:
    """Train the (possibly ablated) PiPRL agent, then evaluate it on the same tasks."""
    for d in drop:
        if d not in DROPS:
            raise ValueError(f"unknown ablation {d!r}; expected one of {sorted(DROPS)}")
    out = Path(out_dir) / variant_label(drop) if out_dir is not None else None
    ckpt = out / "checkpoint.npz" if out is not None else None
    if reuse and ckpt is not None and ckpt.exists():
        net, _, _, extra = ppo.load_checkpoint(ckpt)
        agent = make_agent("piprl", cfg, drop, net)
        summary = {"policy": agent.label, "reused_checkpoint": str(ckpt), "ppo_updates": extra.get("updates")}
    else:
        result = train(cfg, "piprl", drop, out_dir=out, plans=plans, tasks=tasks)
        agent, summary = result.agent, result.summary()
    rows: list = []
    report = evaluate(cfg, agent, tasks, plans, rows=rows)
    log.info("%s: 2+-NLOS NPL %s", agent.label, report.category_npl("2+-NLOS"))
    return VariantRun(agent.label, drop, report, rows, summary)


def ablate(cfg: RunConfig, drops=(("linkstate",), ("snr",)), out_dir=None, reuse: bool = False,
           plans=None, tasks=None) -> dict[str, VariantRun]:
    """Full program plus one run per ablation, all on the same tasks and seeds."""
    if plans is None or tasks is None:
        plans, tasks = load_suite(cfg)
    runs = {}
    for drop in ((),) + tuple(tuple(d) for d in drops):
        run = run_variant(cfg, drop, plans, tasks, out_dir, reuse)
        runs[run.label] = run
    return runs


def ordering_holds(runs: dict[str, VariantRun], category: str = "2+-NLOS") -> bool:
    """PiPRL < LinkState-ablated < SNR-ablated on mean NPL for ``category``."""
    try:
        a = runs["piprl"].report.category_npl(category)
        b = runs["piprl-no-linkstate"].report.category_npl(category)
        c = runs["piprl-no-snr"].report.category_npl(category)
    except KeyError:
        return False
    if a is None or b is None or c is None:
        return False
    return a < b < c
