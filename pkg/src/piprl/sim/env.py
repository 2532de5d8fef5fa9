"""Agent kinematics and noisy observations."""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from ..angles import wrap
from .floorplan import FloorPlan
from .propagation import DEFAULT_MODEL, PathLossModel, PropagationResult, trace_paths

A_F, A_L, A_R = "a_F", "a_L", "a_R"
ACTIONS = (A_F, A_L, A_R)
FORWARD_STEP = 0.25  # m
TURN_STEP = 10.0  # deg; a_L = -10, a_R = +10
GOAL_RADIUS = 0.5  # m


@dataclass(frozen=True)
class AgentState:
    x: float
    y: float
    phi: float
    steps: int = 0

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class NoiseModel:
    sigma_xy: float = 0.05
    sigma_phi: float = 1.0
    sigma_angle: float = 2.0

    @classmethod
    def exact(cls) -> "NoiseModel":
        return cls(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class Observation:
    pose: tuple  # noisy (x, y, phi) reading
    propagation: PropagationResult
    found: bool  # true pose within GOAL_RADIUS of the transmitter


def step_agent(plan: FloorPlan, state: AgentState, action: str) -> AgentState:
    if action == A_F:
        rad = np.radians(state.phi)
        nx = state.x + FORWARD_STEP * np.cos(rad)
        ny = state.y + FORWARD_STEP * np.sin(rad)
        if plan.blocked((state.x, state.y), (nx, ny)) or not plan.is_free(nx, ny):
            return replace(state, steps=state.steps + 1)
        return AgentState(float(nx), float(ny), state.phi, state.steps + 1)
    if action == A_L:
        return AgentState(state.x, state.y, wrap(state.phi - TURN_STEP), state.steps + 1)
    if action == A_R:
        return AgentState(state.x, state.y, wrap(state.phi + TURN_STEP), state.steps + 1)
    raise ValueError(f"unknown action {action!r}")


def target_found(plan: FloorPlan, x: float, y: float, radius: float = GOAL_RADIUS) -> bool:
    return float(np.hypot(x - plan.tx[0], y - plan.tx[1])) <= radius


@lru_cache(maxsize=8192)
def _trace_cached(plan, x, y, max_reflections, max_paths, model):
    return trace_paths(plan, (x, y), max_reflections, max_paths, model)


@dataclass(frozen=True)
class PropagationConfig:
    max_reflections: int = 3
    max_paths: int = 5
    model: PathLossModel = DEFAULT_MODEL


def propagate(plan: FloorPlan, x: float, y: float, config: PropagationConfig = PropagationConfig()):
    return _trace_cached(plan, float(x), float(y), config.max_reflections, config.max_paths, config.model)


def observe(plan: FloorPlan, state: AgentState, noise: NoiseModel, rng: np.random.Generator,
            config: PropagationConfig = PropagationConfig(), with_propagation: bool = True) -> Observation:
    dx, dy, dphi = rng.normal(size=3) * (noise.sigma_xy, noise.sigma_xy, noise.sigma_phi)
    pose = (state.x + float(dx), state.y + float(dy), wrap(state.phi + float(dphi)))
    prop = PropagationResult((), None)
    if with_propagation:
        exact = propagate(plan, state.x, state.y, config)
        if exact.paths:
            jitter = rng.normal(size=(len(exact.paths), 2)) * noise.sigma_angle
            paths = tuple(replace(p, aoa=wrap(p.aoa + float(j[0])), aod=wrap(p.aod + float(j[1])))
                          for p, j in zip(exact.paths, jitter))
            prop = PropagationResult(paths, exact.link_state)
    return Observation(pose, prop, target_found(plan, state.x, state.y))
