"""Navigation tasks: a start cell, a transmitter cell and the link category at the start."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from ..angles import bearing, wrap
from ..sim.env import FORWARD_STEP, GOAL_RADIUS, TURN_STEP
from ..sim.floorplan import FloorPlan, segment_hits
from ..sim.propagation import trace_paths

CATEGORIES = ("LOS", "1-NLOS", "2+-NLOS")
DEFAULT_QUOTA = {"LOS": 3, "1-NLOS": 3, "2+-NLOS": 4}
MAX_SAMPLES = 100_000
MIN_SEPARATION = 1.5  # m between start and transmitter
CLEARANCE = 5  # cells kept free around a sampled transmitter


class CategoryUnsatisfiable(RuntimeError):
    pass


def category_of(link_state) -> str | None:
    if link_state is None:
        return None
    if link_state == 1:
        return "LOS"
    if link_state == 2:
        return "1-NLOS"
    return "2+-NLOS"


@dataclass(frozen=True)
class TaskSpec:
    map_id: str
    tx_cell: tuple
    start_cell: tuple
    category: str
    heading: float = 0.0

    def key(self) -> str:
        return f"{self.map_id}:{self.tx_cell[0]},{self.tx_cell[1]}"


def task_plan(plan: FloorPlan, task: TaskSpec) -> FloorPlan:
    tx = plan.cell_center(*task.tx_cell)
    if plan.tx == tx:
        return plan
    return FloorPlan(plan.occupied, tx, plan.cell_center(*task.start_cell), plan.cell, plan.name)


def default_task(plan: FloorPlan, max_reflections: int = 3) -> TaskSpec:
    """The task written in the map header."""
    start = plan.cell_of(*plan.start)
    tx = plan.cell_of(*plan.tx)
    ell = trace_paths(plan, plan.start, max_reflections).link_state
    return TaskSpec(plan.name, tx, start, category_of(ell) or "none")


def _los_mask(plan: FloorPlan, origin, cells: np.ndarray, chunk: int = 4096) -> np.ndarray:
    centers = (cells + 0.5) * plan.cell
    out = np.zeros(len(cells), dtype=bool)
    for i in range(0, len(cells), chunk):
        q = centers[i:i + chunk]
        p = np.broadcast_to(np.asarray(origin, dtype=float), q.shape)
        out[i:i + chunk] = ~segment_hits(p, q, plan.walls).any(axis=1)
    return out


def generate_tasks(plans, quota: dict | None = None, rng: np.random.Generator | None = None,
                   max_reflections: int = 3, max_samples: int = MAX_SAMPLES) -> list[TaskSpec]:
    """Rejection-sample transmitter cells per map until each category quota is met.

    The start cell is the one in the map header. By reciprocity the start is
    used as the trace source, so every candidate reuses one image tree.
    """
    quota = dict(DEFAULT_QUOTA if quota is None else quota)
    rng = rng if rng is not None else np.random.default_rng(0)
    tasks = []
    for plan in plans:
        start_cell = plan.cell_of(*plan.start)
        clear = ~ndimage.binary_dilation(plan.occupied, iterations=CLEARANCE)
        ys, xs = np.nonzero(clear)
        cells = np.stack([xs, ys], axis=1)
        far = np.hypot(*((cells + 0.5) * plan.cell - np.asarray(plan.start)).T) >= MIN_SEPARATION
        cells = cells[far]
        los = _los_mask(plan, plan.start, cells)
        pools = {"LOS": cells[los], "NLOS": cells[~los]}
        for cat in CATEGORIES:
            need = quota.get(cat, 0)
            if need <= 0:
                continue
            pool = pools["LOS" if cat == "LOS" else "NLOS"]
            order = rng.permutation(len(pool))[:max_samples]
            found = []
            for i in order:
                cx, cy = (int(v) for v in pool[i])
                if cat == "LOS":
                    ell = 1
                else:
                    ell = trace_paths(plan, plan.cell_center(cx, cy), max_reflections,
                                      source=plan.start).link_state
                if category_of(ell) == cat:
                    found.append((cx, cy))
                    if len(found) == need:
                        break
            if len(found) < need:
                raise CategoryUnsatisfiable(
                    f"map {plan.name!r} has only {len(found)} {cat} cell(s) among "
                    f"{len(order)} samples, {need} required")
            tasks += [TaskSpec(plan.name, c, start_cell, cat) for c in found]
    return tasks


# -- shortest action count ---------------------------------------------------

def _corner_nodes(plan: FloorPlan, offset: float = 1e-4) -> np.ndarray:
    ends = np.concatenate([plan.walls[:, :2], plan.walls[:, 2:]])
    ends = np.unique(np.round(ends, 9), axis=0)
    shifts = np.array([(1, 1), (1, -1), (-1, 1), (-1, -1)], dtype=float) * offset
    cand = (ends[:, None, :] + shifts[None]).reshape(-1, 2)
    keep = [plan.is_free(x, y) for x, y in cand]
    return cand[np.array(keep, dtype=bool)] if len(cand) else cand


def geodesic_distance(plan: FloorPlan, a, b) -> float:
    """Shortest obstacle-avoiding distance by a visibility graph over wall corners."""
    if plan.line_of_sight(a, b):
        return float(math.hypot(b[0] - a[0], b[1] - a[1]))
    nodes = np.concatenate([np.asarray([a, b], dtype=float), _corner_nodes(plan)])
    n = len(nodes)
    ii, jj = np.triu_indices(n, k=1)
    hits = np.zeros(len(ii), dtype=bool)
    for s in range(0, len(ii), 20000):
        sl = slice(s, s + 20000)
        hits[sl] = segment_hits(nodes[ii[sl]], nodes[jj[sl]], plan.walls, u_tol=0.0).any(axis=1)
    ok = ~hits
    w = np.hypot(*(nodes[ii[ok]] - nodes[jj[ok]]).T)
    graph = csr_matrix((w, (ii[ok], jj[ok])), shape=(n, n))
    dist, pred = dijkstra(graph, directed=False, indices=0, return_predecessors=True)
    return float(dist[1])


def _first_leg(plan: FloorPlan, a, b) -> float:
    if plan.line_of_sight(a, b):
        return bearing(b[0] - a[0], b[1] - a[1])
    nodes = np.concatenate([np.asarray([a, b], dtype=float), _corner_nodes(plan)])
    n = len(nodes)
    ii, jj = np.triu_indices(n, k=1)
    hits = segment_hits(nodes[ii], nodes[jj], plan.walls, u_tol=0.0).any(axis=1)
    ok = ~hits
    w = np.hypot(*(nodes[ii[ok]] - nodes[jj[ok]]).T)
    graph = csr_matrix((w, (ii[ok], jj[ok])), shape=(n, n))
    _, pred = dijkstra(graph, directed=False, indices=1, return_predecessors=True)
    nxt = pred[0]
    if nxt < 0:
        return 0.0
    return bearing(*(nodes[nxt] - nodes[0]))


def shortest_actions(plan: FloorPlan, start, heading: float = 0.0, goal=None,
                     radius: float = GOAL_RADIUS) -> int:
    """Lower bound on primitive actions to come within ``radius`` of the goal.

    Forward moves: ceil((geodesic - radius) / 0.25). Turns: the rotation to
    the first leg of the geodesic, less the 10 deg any heading can be off.
    """
    goal = plan.tx if goal is None else goal
    d = geodesic_distance(plan, start, goal)
    if not math.isfinite(d):
        raise ValueError("goal unreachable from start")
    forward = max(0, math.ceil((d - radius) / FORWARD_STEP - 1e-9))
    if forward == 0:
        return 0
    delta = abs(wrap(_first_leg(plan, start, goal) - heading))
    turns = max(0, math.ceil((delta - TURN_STEP) / TURN_STEP - 1e-9))
    return forward + turns
