"""Fast Marching planning toward a waypoint and a primitive-action controller."""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable

import numba
import numpy as np
from scipy import ndimage

from .angles import bearing, wrap
from .sim.env import A_F, A_L, A_R, AgentState, FORWARD_STEP, step_agent
from .sim.floorplan import FloorPlan

ALIGN_THRESHOLD = 5.0  # deg
DEFAULT_HORIZON = 50  # cells, 2.5 m
VISIBILITY_RADIUS = 3.0  # m
ARRIVAL_RADIUS = 0.25  # m
CLEARANCE_CELLS = 2
CLEARANCE_COST = 5.0
SEED_RADIUS = 4  # cells initialized exactly around the source


class GoalOccupied(ValueError):
    pass


class Unreachable(RuntimeError):
    pass


@numba.njit(cache=True)
def _fmm_core(cost, seed_i, seed_j, seed_t):
    ny, nx = cost.shape
    T = np.full((ny, nx), np.inf)
    accepted = np.zeros((ny, nx), dtype=np.bool_)
    heap = [(0.0, seed_i[0], seed_j[0])]
    for k in range(len(seed_i)):
        T[seed_i[k], seed_j[k]] = seed_t[k]
        heapq.heappush(heap, (seed_t[k], seed_i[k], seed_j[k]))
    di = (-1, 1, 0, 0)
    dj = (0, 0, -1, 1)
    while len(heap) > 0:
        t, i, j = heapq.heappop(heap)
        if accepted[i, j] or t > T[i, j]:
            continue
        accepted[i, j] = True
        for k in range(4):
            ni = i + di[k]
            nj = j + dj[k]
            if ni < 0 or ni >= ny or nj < 0 or nj >= nx:
                continue
            if accepted[ni, nj] or not np.isfinite(cost[ni, nj]):
                continue
            a = np.inf
            if ni > 0 and accepted[ni - 1, nj]:
                a = T[ni - 1, nj]
            if ni < ny - 1 and accepted[ni + 1, nj] and T[ni + 1, nj] < a:
                a = T[ni + 1, nj]
            b = np.inf
            if nj > 0 and accepted[ni, nj - 1]:
                b = T[ni, nj - 1]
            if nj < nx - 1 and accepted[ni, nj + 1] and T[ni, nj + 1] < b:
                b = T[ni, nj + 1]
            f = cost[ni, nj]
            if abs(a - b) >= f:
                tn = min(a, b) + f
            else:
                tn = 0.5 * (a + b + math.sqrt(2.0 * f * f - (a - b) * (a - b)))
            if tn < T[ni, nj]:
                T[ni, nj] = tn
                heapq.heappush(heap, (tn, ni, nj))
    return T


@numba.njit(cache=True)
def _descend(T, blocked, si, sj, max_steps):
    """Steepest descent over 8 neighbours without cutting blocked corners."""
    ny, nx = T.shape
    path = np.empty((max_steps + 1, 2), dtype=np.int64)
    path[0, 0] = si
    path[0, 1] = sj
    n = 1
    i, j = si, sj
    while T[i, j] > 0.0 and n <= max_steps:
        best = T[i, j]
        bi, bj = -1, -1
        for a in range(-1, 2):
            for b in range(-1, 2):
                if a == 0 and b == 0:
                    continue
                ni, nj = i + a, j + b
                if ni < 0 or ni >= ny or nj < 0 or nj >= nx:
                    continue
                if a != 0 and b != 0 and (blocked[i + a, j] or blocked[i, j + b]):
                    continue
                if T[ni, nj] < best:
                    best = T[ni, nj]
                    bi, bj = ni, nj
        if bi < 0:
            break
        i, j = bi, bj
        path[n, 0] = i
        path[n, 1] = j
        n += 1
    return path[:n]


@numba.njit(cache=True)
def _raycast_explore(occupied, explored, ci, cj, radius_cells, n_rays):
    ny, nx = occupied.shape
    changed = False
    for r in range(n_rays):
        ang = 2.0 * math.pi * r / n_rays
        dx = math.cos(ang) * 0.5
        dy = math.sin(ang) * 0.5
        x = cj + 0.5
        y = ci + 0.5
        steps = int(radius_cells * 2)
        for _ in range(steps + 1):
            j = int(math.floor(x))
            i = int(math.floor(y))
            if i < 0 or i >= ny or j < 0 or j >= nx:
                break
            if not explored[i, j]:
                explored[i, j] = True
                if occupied[i, j]:
                    changed = True
            if occupied[i, j]:
                break
            x += dx
            y += dy
    return changed


def _seed_disc(cost, gi, gj, radius):
    """Exact distances in a small visible disc around the source.

    First-order marching is least accurate next to a point source; starting
    from exact values there keeps the far field within a few percent.
    """
    ny, nx = cost.shape
    i0, i1 = max(gi - radius, 0), min(gi + radius + 1, ny)
    j0, j1 = max(gj - radius, 0), min(gj + radius + 1, nx)
    ii, jj = np.mgrid[i0:i1, j0:j1]
    dist = np.hypot(ii - gi, jj - gj)
    keep = (dist <= radius) & np.isfinite(cost[ii, jj])
    blocked = ~np.isfinite(cost)
    order = np.argsort(dist[keep], kind="stable")
    accepted = {(gi, gj)}
    out_i, out_j, out_t = [gi], [gj], [0.0]
    for i, j, d in zip(ii[keep][order], jj[keep][order], dist[keep][order]):
        if (i, j) == (gi, gj):
            continue
        n = int(np.ceil(d * 2)) + 1
        ci = np.rint(np.linspace(gi, i, n)).astype(int)
        cj = np.rint(np.linspace(gj, j, n)).astype(int)
        if blocked[ci, cj].any():
            continue
        # a seeded cell must step (without cutting a corner) to a nearer seeded
        # cell, otherwise descent can stall on an exact value it cannot follow
        if not any((i + a, j + b) in accepted and np.hypot(i + a - gi, j + b - gj) < d
                   and not (a and b and (blocked[i + a, j] or blocked[i, j + b]))
                   for a in (-1, 0, 1) for b in (-1, 0, 1) if a or b):
            continue
        accepted.add((i, j))
        out_i.append(i)
        out_j.append(j)
        out_t.append(d * cost[ci, cj].max())
    return np.array(out_i, dtype=np.int64), np.array(out_j, dtype=np.int64), np.array(out_t)


@dataclass
class ArrivalField:
    T: np.ndarray  # arrival time in cells, inf where unreachable
    source: tuple  # (col, row) of the goal cell
    explored: np.ndarray
    blocked: np.ndarray


def planning_cost(plan: FloorPlan, explored: np.ndarray, clearance: int = 0) -> np.ndarray:
    """Per-cell traversal cost: 1 in free or unexplored cells, inf in known obstacles."""
    known = plan.occupied & explored
    cost = np.ones(known.shape)
    if clearance > 0 and known.any():
        near = ndimage.binary_dilation(known, iterations=clearance)
        cost[near] = CLEARANCE_COST
    cost[known] = np.inf
    return cost


def fmm_solve(plan: FloorPlan, explored: np.ndarray | None, goal_cell, clearance: int = 0,
              cost: np.ndarray | None = None) -> ArrivalField:
    """First-order upwind eikonal solution with the goal as source."""
    if explored is None:
        explored = np.ones_like(plan.occupied)
    if cost is None:
        cost = planning_cost(plan, explored, clearance)
    gx, gy = goal_cell
    if not np.isfinite(cost[gy, gx]):
        raise GoalOccupied(f"goal cell {goal_cell} is a known obstacle")
    si, sj, st = _seed_disc(cost, int(gy), int(gx), SEED_RADIUS)
    T = _fmm_core(cost, si, sj, st)
    return ArrivalField(T, (int(gx), int(gy)), explored, ~np.isfinite(cost))


def descent_path(field: ArrivalField, start_cell) -> np.ndarray:
    """Cells (col, row) from start to goal following steepest descent of T."""
    sx, sy = start_cell
    if not np.isfinite(field.T[sy, sx]):
        raise Unreachable(f"cell {start_cell} cannot reach the goal")
    rows = _descend(field.T, field.blocked, int(sy), int(sx), field.T.size)
    return rows[:, ::-1].copy()


def path_length_cells(path: np.ndarray) -> float:
    if len(path) < 2:
        return 0.0
    steps = np.diff(path, axis=0)
    return float(np.hypot(steps[:, 0], steps[:, 1]).sum())


def extract_short_term_goal(field: ArrivalField, pose, horizon: int = DEFAULT_HORIZON, cell: float = 0.05):
    """Point on the descent path at arc length ``horizon`` cells, or the goal if nearer."""
    ny, nx = field.T.shape
    start = (int(np.clip(np.floor(pose[0] / cell), 0, nx - 1)), int(np.clip(np.floor(pose[1] / cell), 0, ny - 1)))
    path = descent_path(field, start)
    steps = np.hypot(*np.diff(path, axis=0).T) if len(path) > 1 else np.zeros(0)
    arc = np.concatenate(([0.0], np.cumsum(steps)))
    idx = int(np.searchsorted(arc, horizon - 1e-9))
    idx = min(idx, len(path) - 1)
    cx, cy = path[idx]
    return ((cx + 0.5) * cell, (cy + 0.5) * cell), path[: idx + 1]


def control_step(pose, target, threshold: float = ALIGN_THRESHOLD) -> str:
    """Turn toward the target until aligned within ``threshold``, then move forward.

    Headings grow counter-clockwise and a_R adds +10 deg, so a positive
    bearing error is reduced by a_R.
    """
    error = wrap(bearing(target[0] - pose[0], target[1] - pose[1]) - pose[2])
    if error > threshold:
        return A_R
    if error < -threshold:
        return A_L
    return A_F


def _on_course(pose, target, tolerance: float = 0.5 * ARRIVAL_RADIUS) -> bool:
    """Target ahead and within ``tolerance`` of the heading line: driving straight gets there."""
    dx, dy = target[0] - pose[0], target[1] - pose[1]
    phi = math.radians(pose[2])
    along = dx * math.cos(phi) + dy * math.sin(phi)
    across = -dx * math.sin(phi) + dy * math.cos(phi)
    return along > 0.0 and abs(across) <= tolerance


def _segment_clear(blocked: np.ndarray, p, q, cell: float) -> bool:
    n = int(np.ceil(np.hypot(q[0] - p[0], q[1] - p[1]) / (cell * 0.5))) + 1
    xs = np.linspace(p[0], q[0], n)
    ys = np.linspace(p[1], q[1], n)
    cx = np.clip(np.floor(xs / cell).astype(int), 0, blocked.shape[1] - 1)
    cy = np.clip(np.floor(ys / cell).astype(int), 0, blocked.shape[0] - 1)
    return not blocked[cy, cx].any()


@dataclass
class OptionResult:
    states: list
    actions: list
    reason: str  # "arrived", "budget", "found", "unreachable"


@dataclass
class Navigator:
    """Per-episode planning state: explored mask plus a cached arrival field."""
    plan: FloorPlan
    horizon: int = DEFAULT_HORIZON
    clearance: int = CLEARANCE_CELLS
    explored: np.ndarray = None
    _version: int = 0
    _field_key: tuple = None
    _field: ArrivalField = None
    _cost: np.ndarray = None
    _cost_version: int = -1

    def __post_init__(self):
        if self.explored is None:
            self.explored = np.zeros_like(self.plan.occupied)

    def explore_from(self, x: float, y: float):
        cx, cy = self.plan.cell_of(*self.plan.clip(x, y))
        radius = VISIBILITY_RADIUS / self.plan.cell
        if _raycast_explore(self.plan.occupied, self.explored, cy, cx, radius, 720):
            self._version += 1

    def cost(self) -> np.ndarray:
        if self._cost_version != self._version:
            self._cost = planning_cost(self.plan, self.explored, self.clearance)
            self._cost_version = self._version
        return self._cost

    def reachable_goal(self, point) -> tuple[int, int]:
        """Cell for a waypoint, moved to the nearest cell outside known obstacles."""
        x, y = self.plan.clip(*point)
        cx, cy = self.plan.cell_of(x, y)
        cost = self.cost()
        if np.isfinite(cost[cy, cx]) and cost[cy, cx] <= 1.0:
            return cx, cy
        bad = cost > 1.0
        _, idx = ndimage.distance_transform_edt(bad, return_indices=True)
        return int(idx[1][cy, cx]), int(idx[0][cy, cx])

    def clip_to_visible(self, origin, target, margin: float = 0.15):
        """Shorten ``origin -> target`` to stop ``margin`` before the first seen wall on it."""
        ox, oy = origin[0], origin[1]
        dx, dy = target[0] - ox, target[1] - oy
        length = math.hypot(dx, dy)
        if length < 1e-9:
            return tuple(target)
        seen_wall = self.plan.occupied & self.explored
        step = self.plan.cell * 0.5
        n = int(length / step) + 1
        for k in range(1, n + 1):
            s = min(k * step, length)
            x, y = ox + dx * s / length, oy + dy * s / length
            if not (0.0 <= x < self.plan.extent and 0.0 <= y < self.plan.extent):
                break
            cx, cy = self.plan.cell_of(x, y)
            if seen_wall[cy, cx]:
                keep = max(s - margin, 0.0)
                return ox + dx * keep / length, oy + dy * keep / length
        return tuple(target)

    def field_for(self, goal_cell) -> ArrivalField:
        key = (goal_cell, self._version)
        if key != self._field_key:
            self._field = fmm_solve(self.plan, self.explored, goal_cell, cost=self.cost())
            self._field_key = key
        return self._field

    def short_term_goal(self, pose, goal_cell):
        field = self.field_for(goal_cell)
        sub, path = extract_short_term_goal(field, pose, self.horizon, self.plan.cell)
        if len(path) < 2:
            return sub
        # farthest point of that prefix reachable in a straight line that keeps
        # clear of known walls; the next path cell is always acceptable
        avoid = self.cost() > 1.0
        here = self.plan.cell_of(*self.plan.clip(pose[0], pose[1]))
        if avoid[here[1], here[0]]:
            avoid = field.blocked
        for cx, cy in path[:1:-1]:
            point = self.plan.cell_center(int(cx), int(cy))
            if _segment_clear(avoid, pose[:2], point, self.plan.cell):
                return point
        return self.plan.cell_center(int(path[1][0]), int(path[1][1]))

    def run_option(self, state: AgentState, until, budget: int,
                   sense: Callable[[AgentState], tuple], done: Callable[[AgentState], bool] | None = None,
                   on_step: Callable[[AgentState, str], None] | None = None) -> OptionResult:
        """Drive toward ``until`` with primitive actions, replanning every step."""
        states, actions = [state], []
        goal_cell = self.reachable_goal(until)
        for _ in range(budget):
            pose = sense(state)
            self.explore_from(state.x, state.y)
            if np.hypot(pose[0] - until[0], pose[1] - until[1]) <= ARRIVAL_RADIUS:
                return OptionResult(states, actions, "arrived")
            try:
                target = self.short_term_goal(pose, goal_cell)
            except (Unreachable, GoalOccupied):
                goal_cell = self.reachable_goal(until)
                try:
                    target = self.short_term_goal(pose, goal_cell)
                except (Unreachable, GoalOccupied):
                    return OptionResult(states, actions, "unreachable")
            if np.hypot(target[0] - pose[0], target[1] - pose[1]) < 1e-9:
                target = until
            bumped = bool(actions) and actions[-1] == A_F and states[-1].position == states[-2].position
            if bumped:
                # the last forward move hit a wall: aim at the adjacent path cell
                path = descent_path(self.field_for(goal_cell), self.plan.cell_of(*self.plan.clip(pose[0], pose[1])))
                if len(path) > 1:
                    target = self.plan.cell_center(int(path[1][0]), int(path[1][1]))
            action = control_step(pose, target)
            if action != A_F and not bumped and _on_course(pose, target):
                action = A_F
            elif actions and {action, actions[-1]} == {A_L, A_R}:
                # undoing the previous turn only chases heading noise when the
                # bearing sits between two 10 deg headings
                action = A_F
            state = step_agent(self.plan, state, action)
            states.append(state)
            actions.append(action)
            if on_step is not None:
                on_step(state, action)
            if done is not None and done(state):
                return OptionResult(states, actions, "found")
        pose = sense(state)
        if np.hypot(pose[0] - until[0], pose[1] - until[1]) <= ARRIVAL_RADIUS:
            return OptionResult(states, actions, "arrived")
        return OptionResult(states, actions, "budget")
