"""Multipath propagation by the 2-D image-source method.

Only specular reflections off wall segments are modeled (no diffraction).
For a transmitter the tree of mirror images is built once per floor plan
and cached; tracing to a receiver then back-projects every reflection
sequence, keeps those whose reflection points land on their walls, and
rejects any whose legs are occluded.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..angles import bearing
from .floorplan import FloorPlan, segment_hits

_EPS = 1e-9


@dataclass(frozen=True)
class PathLossModel:
    g0: float = 40.0          # dB at the reference distance
    ref_distance: float = 1.0  # m
    reflection_loss: float = 6.0  # dB per reflection
    snr_floor: float = -10.0  # dB; weaker paths are not detected


DEFAULT_MODEL = PathLossModel()


def compute_snr(length: float, reflections: int, model: PathLossModel = DEFAULT_MODEL) -> float:
    if length <= 0:
        raise ValueError("path length must be positive")
    return model.g0 - 20.0 * np.log10(length / model.ref_distance) - reflections * model.reflection_loss


@dataclass(frozen=True)
class RayPath:
    vertices: tuple  # ((x, y), ...) from transmitter to receiver
    reflections: int
    length: float
    aoa: float  # degrees, from the receiver back along the incoming ray
    aod: float  # degrees, departure direction at the transmitter
    snr: float  # dB
    walls: tuple = ()  # wall index of each reflection, transmitter side first


@dataclass(frozen=True)
class PropagationResult:
    paths: tuple
    link_state: int | None  # None when nothing is detected

    @property
    def detected(self) -> bool:
        return bool(self.paths)

    @property
    def strongest(self) -> RayPath | None:
        return self.paths[0] if self.paths else None

    @property
    def overall_snr(self) -> float:
        return float(sum(p.snr for p in self.paths))


NO_SIGNAL = PropagationResult((), None)


def _image_tree(plan: FloorPlan, source, max_reflections: int):
    """Per order k: (sequences (n, k) wall ids, images (n, k, 2))."""
    key = ("images", round(source[0], 12), round(source[1], 12))
    tree = plan._cache.get(key)
    if tree is not None and len(tree) > max_reflections:
        return tree
    walls, normals = plan.walls, plan.normals
    anchors = walls[:, :2]
    tree = [(np.zeros((1, 0), dtype=np.int64), np.zeros((1, 0, 2)))]
    src = np.asarray(source, dtype=float)
    for k in range(1, max_reflections + 1):
        seqs, imgs = tree[-1]
        last = imgs[:, -1, :] if k > 1 else np.broadcast_to(src, (1, 2))
        dist = np.einsum("nsd,sd->ns", last[:, None, :] - anchors[None, :, :], normals)
        ok = dist > _EPS
        if k > 1:
            ok[np.arange(len(seqs)), seqs[:, -1]] = False
        parent, wall = np.nonzero(ok)
        reflected = last[parent] - 2.0 * dist[parent, wall][:, None] * normals[wall]
        new_seqs = np.concatenate([seqs[parent], wall[:, None]], axis=1)
        new_imgs = np.concatenate([imgs[parent], reflected[:, None, :]], axis=1)
        tree.append((new_seqs, new_imgs))
    plan._cache[key] = tree
    return tree


def _backtrack(plan: FloorPlan, source, rx, seqs, imgs):
    """Reflection points for each sequence, plus a validity mask."""
    walls, normals = plan.walls, plan.normals
    n, k = seqs.shape
    points = np.zeros((n, k, 2))
    valid = np.ones(n, dtype=bool)
    current = np.broadcast_to(np.asarray(rx, dtype=float), (n, 2)).copy()
    for j in range(k - 1, -1, -1):
        w = seqs[:, j]
        a = walls[w, :2]
        e = walls[w, 2:] - a
        # the point we leave from must be on the reflecting side of this wall
        side = np.einsum("nd,nd->n", current - a, normals[w])
        valid &= side > _EPS
        d = imgs[:, j, :] - current
        denom = d[:, 0] * e[:, 1] - d[:, 1] * e[:, 0]
        ap = a - current
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (ap[:, 0] * e[:, 1] - ap[:, 1] * e[:, 0]) / denom
            u = (ap[:, 0] * d[:, 1] - ap[:, 1] * d[:, 0]) / denom
        valid &= (np.abs(denom) > 1e-15) & (t > _EPS) & (t < 1.0 - _EPS) & (u > _EPS) & (u < 1.0 - _EPS)
        with np.errstate(invalid="ignore"):
            points[:, j, :] = current + t[:, None] * d
        current = np.where(valid[:, None], points[:, j, :], current)
    return points, valid


def trace_paths(plan: FloorPlan, rx, max_reflections: int = 3, max_paths: int = 5,
                model: PathLossModel = DEFAULT_MODEL, source=None) -> PropagationResult:
    """All specular paths from the transmitter (or ``source``) to ``rx``."""
    src = np.asarray(plan.tx if source is None else source, dtype=float)
    rx = np.asarray(rx, dtype=float)
    tree = _image_tree(plan, tuple(src), max_reflections)
    found: list[RayPath] = []

    for k in range(0, max_reflections + 1):
        seqs, imgs = tree[k]
        if k == 0:
            chains = np.stack([src, rx])[None]
            wall_ids = np.zeros((1, 0), dtype=np.int64)
        else:
            if len(seqs) == 0:
                continue
            # the receiver must face the last reflecting wall
            last = seqs[:, -1]
            facing = np.einsum("nd,nd->n", rx - plan.walls[last, :2], plan.normals[last]) > _EPS
            seqs, imgs = seqs[facing], imgs[facing]
            if len(seqs) == 0:
                continue
            points, valid = _backtrack(plan, src, rx, seqs, imgs)
            if not valid.any():
                continue
            points, wall_ids = points[valid], seqs[valid]
            n = len(points)
            chains = np.concatenate([np.broadcast_to(src, (n, 1, 2)), points,
                                     np.broadcast_to(rx, (n, 1, 2))], axis=1)
        starts = chains[:, :-1, :].reshape(-1, 2)
        ends = chains[:, 1:, :].reshape(-1, 2)
        hits = segment_hits(starts, ends, plan.walls)
        clear = ~hits.any(axis=1).reshape(len(chains), k + 1).any(axis=1)
        for chain, ids in zip(chains[clear], wall_ids[clear]):
            legs = np.diff(chain, axis=0)
            length = float(np.hypot(legs[:, 0], legs[:, 1]).sum())
            if length <= 0:
                continue
            snr = compute_snr(length, k, model)
            if snr < model.snr_floor:
                continue
            found.append(RayPath(
                vertices=tuple((float(x), float(y)) for x, y in chain),
                reflections=k,
                length=length,
                aoa=bearing(*(chain[-2] - chain[-1])),
                aod=bearing(*(chain[1] - chain[0])),
                snr=float(snr),
                walls=tuple(int(i) for i in ids),
            ))

    if not found:
        return NO_SIGNAL
    found.sort(key=lambda p: (-p.snr, p.reflections, p.length, p.aoa))
    kept = tuple(found[:max_paths])
    return PropagationResult(kept, 1 + min(p.reflections for p in kept))


def has_line_of_sight(plan: FloorPlan, a, b) -> bool:
    return plan.line_of_sight(a, b)
