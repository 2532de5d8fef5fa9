"""One navigation episode for any policy kind.

Per decision: observe, perceive, ask the policy (the program runtime for
PiPRL) for a directive, then execute it with the planner. Neural decisions
become PPO transitions when training.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .. import ppo
from ..angles import PI_SET
from ..dsl import ast
from ..perception import build_policy_input, estimate_link_state, estimate_pose, path_features
from ..planner import Navigator
from ..runtime import (CostCorrection, DelegateNeural, EpisodeMemory, ExecuteOptionDirective,
                       LinkStateTermination, Primitive, TerminateEpisode, Waypoint, apply_effects,
                       bind, step)
from ..sim.env import AgentState, observe, step_agent, target_found
from ..sim.floorplan import FloorPlan
from .config import RunConfig
from .tasks import TaskSpec, task_plan

KINDS = ("piprl", "nprl", "wan", "random")
REVERSE_AOA = "reverse AoA"


@dataclass
class Agent:
    kind: str
    program: ast.Program | None = None
    net: ppo.PolicyNet | None = None
    variant: str = ""  # label for ablated programs

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.kind in ("piprl", "wan") and self.program is None:
            raise ValueError(f"{self.kind} needs a program")
        if self.kind in ("piprl", "nprl") and self.net is None:
            raise ValueError(f"{self.kind} needs a network")

    @property
    def label(self) -> str:
        return self.variant or self.kind


@dataclass
class Percept:
    pose: tuple
    features: object
    link_state: int | None
    snr: float
    x: np.ndarray


@dataclass
class EpisodeLog:
    steps: int = 0
    success: bool = False
    terminated_by: str = ""
    decisions: int = 0
    neural_steps: int = 0
    transitions: list = field(default_factory=list)  # dict rows
    path: list = field(default_factory=list)  # true (x, y) after each action


def episode_rngs(seed: int, task_index: int, episode: int):
    """Environment streams (pose noise, wireless) shared by all policies, plus the agent's own."""
    ss = np.random.SeedSequence([int(seed), int(task_index), int(episode)])
    pose_ss, wireless_ss, agent_ss = ss.spawn(3)
    return (np.random.default_rng(pose_ss), np.random.default_rng(wireless_ss),
            np.random.default_rng(agent_ss))


def _effect_hooks(kinds, weight: float):
    hooks = []
    for k in kinds:
        if k is CostCorrection:
            hooks.append(CostCorrection(weight))
        elif k is LinkStateTermination:
            hooks.append(LinkStateTermination())
    return hooks


def run_episode(base_plan: FloorPlan, task: TaskSpec, agent: Agent, cfg: RunConfig, rngs, *,
                train: bool = False, buffer: ppo.RolloutBuffer | None = None,
                on_buffer_full=None, task_index: int = 0, episode: int = 0) -> EpisodeLog:
    plan = task_plan(base_plan, task)
    pose_rng, wireless_rng, agent_rng = rngs
    noise, prop_cfg, model = cfg.noise(), cfg.propagation(), cfg.model()
    start = plan.cell_center(*task.start_cell)
    state = AgentState(start[0], start[1], task.heading)
    nav = Navigator(plan)
    mem = EpisodeMemory()
    log = EpisodeLog(path=[state.position])
    net = agent.net
    epsilon = cfg.epsilon if train else 0.0

    def sense(st):
        obs = observe(plan, st, noise, pose_rng, prop_cfg, with_propagation=False)
        return estimate_pose(obs, plan).as_tuple()

    def perceive(st) -> Percept:
        obs = observe(plan, st, noise, wireless_rng, prop_cfg)
        pose = estimate_pose(obs, plan).as_tuple()
        feats = path_features(obs.propagation, cfg.max_paths, model)
        ell = estimate_link_state(obs.propagation, cfg.link_error, wireless_rng)
        snr = feats.overall_snr if cfg.snr_source == "overall" else feats.rows[0][0]
        return Percept(pose, feats, ell, snr, build_policy_input(feats, ell, model))

    def found(st) -> bool:
        return target_found(plan, st.x, st.y)

    def on_step(st, action):
        log.path.append(st.position)

    def go(until, st):
        budget = min(cfg.option_budget, cfg.action_cap - log.steps)
        if budget <= 0:
            return st, "action_cap"
        res = nav.run_option(st, until, budget, sense, found, on_step)
        log.steps += len(res.actions)
        return res.states[-1], res.reason

    def random_waypoint(pose):
        angle = PI_SET[int(agent_rng.integers(len(PI_SET)))]
        wp, _ = ppo.waypoint_and_cost(pose, angle, plan.tx, plan.extent)
        return wp

    percept = perceive(state)
    excluded: set = set()
    hold = False  # after a backtrack, keep the pre-step movement angle
    for t in range(cfg.horizon):
        if found(state):
            log.success, log.terminated_by = True, "success"
            break
        if log.steps >= cfg.action_cap:
            log.terminated_by = "action_cap"
            break
        log.decisions += 1
        if not hold:
            mem.update_motion(percept.pose)
        hold = False
        directive = _decide(agent, plan, percept, mem, state)
        before, mem_before = state, replace(mem)

        if isinstance(directive, TerminateEpisode):
            log.success = found(state)
            log.terminated_by = "success" if log.success else directive.reason
            break
        if isinstance(directive, Primitive):
            state = step_agent(plan, state, directive.action)
            log.steps += 1
            log.path.append(state.position)
        elif isinstance(directive, ExecuteOptionDirective):
            # the transmitter lies in front of the first wall on the arrival ray
            nav.explore_from(state.x, state.y)
            until = nav.clip_to_visible((directive.init.x, directive.init.y),
                                        (directive.until.x, directive.until.y))
            state, _ = go(until, state)
        elif directive == "explore":
            state, _ = go(random_waypoint(percept.pose), state)
        elif isinstance(directive, DelegateNeural):
            allowed = (tuple(a for a in directive.restriction if a not in excluded)
                       or tuple(a for a in PI_SET if a not in excluded) or directive.restriction)
            tr = ppo.select_action(net, percept.x, allowed, agent_rng, epsilon)
            wp, cost = ppo.waypoint_and_cost(percept.pose, tr.executed_angle, plan.tx, plan.extent)
            state, _ = go(wp, state)
            success = found(state)
            nxt = perceive(state)
            hooks = _effect_hooks(directive.effects, tr.weight)
            corrected, terminate = apply_effects(hooks, cost, nxt.link_state, percept.link_state,
                                                 no_signal=cfg.max_reflections + 2)
            tr.cost, tr.corrected_cost = cost, corrected
            _, tr.next_value = ppo.forward(net, nxt.x)
            tr.terminal = success
            out_of_time = t == cfg.horizon - 1 or log.steps >= cfg.action_cap
            tr.end = success or out_of_time or (terminate and train)
            tr.reason = "success" if success else ("link_state" if terminate else "")
            log.neural_steps += 1
            log.transitions.append({
                "t": t, "sampled": tr.sampled_angle, "executed": tr.executed_angle,
                "compliant": int(tr.compliant), "weight": tr.weight, "cost": cost,
                "corrected_cost": corrected, "ell_before": _fmt_ell(percept.link_state),
                "ell_after": _fmt_ell(nxt.link_state), "done": int(tr.end),
            })
            if train and buffer is not None:
                buffer.add(tr)
                if on_buffer_full is not None and len(buffer) >= cfg.rollout:
                    on_buffer_full()
            mem.commit(percept.snr, percept.link_state)
            percept = nxt
            if success:
                continue
            if terminate:
                if train:
                    log.terminated_by = "link_state"
                    break
                if cfg.eval_reset == "backtrack":
                    # reset: return to where the neural step started, restore the
                    # memory of that decision and rule the failed angle out
                    state, _ = go(before.position, state)
                    percept = perceive(state)
                    mem, hold = mem_before, True
                    excluded = excluded | {tr.executed_angle}
                    continue
            excluded = set()
            continue
        else:
            raise RuntimeError(f"unhandled directive {directive!r}")

        mem.commit(percept.snr, percept.link_state)
        percept = perceive(state)
    else:
        log.terminated_by = "horizon"
    if not log.terminated_by:
        log.terminated_by = "success" if found(state) else "horizon"
    log.success = log.terminated_by == "success"
    return log


def _fmt_ell(ell):
    return "" if ell is None else int(ell)


def _decide(agent: Agent, plan: FloorPlan, percept: Percept, mem: EpisodeMemory, state):
    kind = agent.kind
    if kind == "random":
        return "explore"
    if kind == "nprl":
        return DelegateNeural(PI_SET, ())
    if percept.link_state is None:
        return "explore"  # nothing detected: wander
    feats = mem.features(percept.pose, percept.features.strongest, percept.snr, percept.link_state)
    bindings = bind(agent.program, feats, found=target_found(plan, state.x, state.y), extent=plan.extent)
    if kind == "wan":
        if percept.link_state <= 2:
            return step(agent.program, bindings, policy=REVERSE_AOA)
        return "explore"
    return step(agent.program, bindings)
