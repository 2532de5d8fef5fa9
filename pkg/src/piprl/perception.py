"""Pose, path and link-state features derived from noisy observations.

These stand in for learned SLAM and wireless front ends: each function
returns the quantity the learned module would, built from the simulator's
readings plus configurable noise.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .angles import wrap
from .sim.floorplan import FloorPlan
from .sim.propagation import DEFAULT_MODEL, PathLossModel, PropagationResult


@dataclass(frozen=True)
class PoseEstimate:
    x: float
    y: float
    phi: float

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.phi)


@dataclass(frozen=True)
class PathFeatures:
    """Fixed-length (snr, aoa, aod) rows, strongest first, padded with sentinels."""
    rows: tuple
    detected: int
    overall_snr: float

    @property
    def strongest(self) -> tuple[float, float, float]:
        return self.rows[0]


def estimate_pose(observation, plan: FloorPlan, previous: PoseEstimate | None = None) -> PoseEstimate:
    x, y, phi = observation.pose
    x, y = plan.nearest_free(*plan.clip(x, y))
    return PoseEstimate(float(x), float(y), wrap(phi))


def path_features(prop: PropagationResult, max_paths: int = 5,
                  model: PathLossModel = DEFAULT_MODEL) -> PathFeatures:
    rows = [(p.snr, wrap(p.aoa), wrap(p.aod)) for p in prop.paths[:max_paths]]
    detected = len(rows)
    rows += [(model.snr_floor, 0.0, 0.0)] * (max_paths - detected)
    overall = float(sum(r[0] for r in rows[:detected]))
    return PathFeatures(tuple(rows), detected, overall)


def estimate_link_state(prop: PropagationResult, error_rate: float, rng: np.random.Generator) -> int | None:
    """Noisy link state: the true value, or a neighbouring class with probability ``error_rate``.

    ``None`` means no signal. The draw is always consumed so the rng stream
    does not depend on the outcome.
    """
    u, coin = rng.random(2)
    if prop.link_state is None:
        return None
    true = prop.link_state
    if u >= error_rate:
        return true
    if true == 1:
        return 2
    return true + 1 if coin < 0.5 else true - 1


def _norm_snr(g: float, model: PathLossModel) -> float:
    return (g - model.snr_floor) / (model.g0 - model.snr_floor)


def build_policy_input(features: PathFeatures, link_state: int | None,
                       model: PathLossModel = DEFAULT_MODEL) -> np.ndarray:
    """Vector of length 3N + 2 with every component in [-1, 1].

    Per path: normalized SNR in [0, 1], AoA / 180, AoD / 180. Then the link
    state divided by 4 (0 for no signal) and the mean normalized SNR over
    all N slots, which is the overall SNR on the same scale.
    """
    out = []
    gs = []
    for g, aoa, aod in features.rows:
        gn = float(np.clip(_norm_snr(g, model), 0.0, 1.0))
        gs.append(gn)
        out += [gn, wrap(aoa) / 180.0, wrap(aod) / 180.0]
    ell = 0.0 if link_state is None else min(link_state / 4.0, 1.0)
    out += [ell, float(np.mean(gs))]
    return np.array(out, dtype=float)


def decode_policy_input(vec: np.ndarray, max_paths: int, model: PathLossModel = DEFAULT_MODEL):
    """Inverse of :func:`build_policy_input` for in-range inputs."""
    rows = []
    for n in range(max_paths):
        gn, a, d = vec[3 * n:3 * n + 3]
        rows.append((gn * (model.g0 - model.snr_floor) + model.snr_floor, a * 180.0, d * 180.0))
    return rows, vec[3 * max_paths] * 4.0


def policy_input_size(max_paths: int) -> int:
    return 3 * max_paths + 2
