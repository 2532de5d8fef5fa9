"""Synthetic floor plans: the bundled suite and the generators behind it.

Every map is an M x M grid with a one-cell outer wall. Interior walls are
two cells (10 cm) thick so each one contributes four short wall segments.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from ..sim.floorplan import dump_map, load_map

WALL = 2  # interior wall thickness, cells


def blank(m: int) -> np.ndarray:
    occ = np.zeros((m, m), dtype=bool)
    occ[0, :] = occ[-1, :] = occ[:, 0] = occ[:, -1] = True
    return occ


def vwall(occ, x: int, y0: int, y1: int, doors=()):
    """Vertical wall at column x spanning rows y0..y1, with (start, width) door gaps."""
    occ[y0:y1, x:x + WALL] = True
    for d0, w in doors:
        occ[d0:d0 + w, x:x + WALL] = False


def hwall(occ, y: int, x0: int, x1: int, doors=()):
    occ[y:y + WALL, x0:x1] = True
    for d0, w in doors:
        occ[y:y + WALL, d0:d0 + w] = False


def empty_room(m: int = 200):
    return blank(m)


def two_room(m: int = 120):
    occ = blank(m)
    h = m // 2
    vwall(occ, h, 0, m, doors=[(m - 30, 16)])
    return occ


def l_corridor():
    """L-shaped free region inside a 40 x 40 grid: six boundary segments."""
    occ = np.ones((40, 40), dtype=bool)
    occ[5:15, 5:35] = False   # horizontal arm along the bottom
    occ[5:35, 5:15] = False   # vertical arm on the left
    return occ


def multi_room(m: int, rng: np.random.Generator):
    occ = blank(m)
    cx = int(rng.integers(m * 2 // 5, m * 3 // 5))
    cy = int(rng.integers(m * 2 // 5, m * 3 // 5))
    dw = 18
    vwall(occ, cx, 0, cy, doors=[(int(rng.integers(6, cy - dw - 4)), dw)])
    vwall(occ, cx, cy, m, doors=[(int(rng.integers(cy + 6, m - dw - 6)), dw)])
    hwall(occ, cy, 0, cx, doors=[(int(rng.integers(6, cx - dw - 4)), dw)])
    hwall(occ, cy, cx + WALL, m)
    return occ


def corridor(m: int, rng: np.random.Generator):
    occ = blank(m)
    y0 = int(rng.integers(m // 3, m // 2))
    w = 24
    hwall(occ, y0, 0, m, doors=[(int(rng.integers(10, m // 2 - 20)), 18)])
    hwall(occ, y0 + w, 0, m, doors=[(int(rng.integers(m // 2, m - 30)), 18)])
    return occ


def maze(m: int, rng: np.random.Generator):
    occ = blank(m)
    third = m // 3
    vwall(occ, third, 0, m - 30)
    vwall(occ, 2 * third, 30, m)
    hwall(occ, m // 2, 2 * third + WALL, m, doors=[(int(rng.integers(2 * third + 6, m - 24)), 18)])
    return occ


ARCHETYPES = {"multi_room": multi_room, "corridor": corridor, "maze": maze}


def _pick_cells(occ, rng, n=2, margin=6):
    from scipy.ndimage import binary_dilation
    clear = ~binary_dilation(occ, iterations=margin)
    ys, xs = np.nonzero(clear)
    picks = rng.choice(len(xs), size=n, replace=False)
    return [(int(xs[i]), int(ys[i])) for i in picks]


def bundled_suite(seed: int = 7):
    """(name, occupancy, start cell, tx cell) for every bundled map."""
    rng = np.random.default_rng(seed)
    out = []
    occ = empty_room(200)
    out.append(("empty", occ, (40, 100), (100, 100)))
    occ = two_room(120)
    out.append(("two_room", occ, (84, 30), (14, 105)))
    out.append(("l_corridor", l_corridor(), (8, 30), (30, 8)))
    kinds = ["multi_room", "corridor", "maze"]
    for i in range(8):
        kind = kinds[i % 3]
        occ = ARCHETYPES[kind](160, rng)
        s, t = _pick_cells(occ, rng)
        out.append((f"train_{i + 1:02d}_{kind}", occ, s, t))
    for i in range(3):
        kind = kinds[i % 3]
        occ = ARCHETYPES[kind](160, rng)
        s, t = _pick_cells(occ, rng)
        out.append((f"test_{i + 1:02d}_{kind}", occ, s, t))
    return out


def write_suite(directory, seed: int = 7) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, occ, s, t in bundled_suite(seed):
        text = dump_map(occ, s, t)
        load_map(text, name)  # validates
        p = directory / f"{name}.map"
        p.write_text(text, encoding="utf-8")
        paths.append(p)
    return paths
