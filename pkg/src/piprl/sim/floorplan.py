"""Occupancy-grid floor plans and their wall-segment representation.

Map file format (plain text, LF terminated)::

    M Sx Sy Tx Ty
    <M rows of M characters, '#' occupied, '.' free>

``Sx Sy`` is the start cell and ``Tx Ty`` the transmitter cell, both as
(column, row-from-bottom) indices. Rows are listed top to bottom, so the
first row holds the largest y. Cells are 5 cm squares; the world origin is
the bottom-left corner of the grid and everything outside the grid counts
as occupied.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

CELL_SIZE = 0.05


class MapFormatError(ValueError):
    pass


def _runs(mask: np.ndarray):
    """Yield (start, stop) for each maximal run of True in a 1-D mask."""
    padded = np.concatenate(([False], mask, [False]))
    diff = np.diff(padded.astype(np.int8))
    starts = np.flatnonzero(diff == 1)
    stops = np.flatnonzero(diff == -1)
    return zip(starts.tolist(), stops.tolist())


def extract_walls(occupied: np.ndarray, cell: float = CELL_SIZE):
    """Wall segments bounding the free space, merged into maximal runs.

    Returns ``(walls, normals)`` where ``walls`` is (S, 4) of x1, y1, x2, y2
    in meters and ``normals`` is (S, 2), unit vectors pointing into free space.
    """
    ny, nx = occupied.shape
    occ = np.pad(occupied, 1, constant_values=True)
    walls, normals = [], []

    # vertical boundaries at x = i * cell, between columns i-1 and i
    for i in range(nx + 1):
        left = occ[1:-1, i]
        right = occ[1:-1, i + 1]
        for mask, normal in ((left & ~right, (1.0, 0.0)), (~left & right, (-1.0, 0.0))):
            for a, b in _runs(mask):
                walls.append((i * cell, a * cell, i * cell, b * cell))
                normals.append(normal)
    # horizontal boundaries at y = j * cell, between rows j-1 and j
    for j in range(ny + 1):
        below = occ[j, 1:-1]
        above = occ[j + 1, 1:-1]
        for mask, normal in ((below & ~above, (0.0, 1.0)), (~below & above, (0.0, -1.0))):
            for a, b in _runs(mask):
                walls.append((a * cell, j * cell, b * cell, j * cell))
                normals.append(normal)
    return np.array(walls, dtype=float).reshape(-1, 4), np.array(normals, dtype=float).reshape(-1, 2)


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def segment_hits(p, q, walls, t_min=1e-9, t_max=1.0 - 1e-9, u_tol=1e-12):
    """Boolean (n, S) matrix: does segment p[i]->q[i] cross wall j.

    ``t`` is the parameter along p->q and ``u`` along the wall. Parallel
    pairs never count as crossings.
    """
    p = np.atleast_2d(np.asarray(p, dtype=float))
    q = np.atleast_2d(np.asarray(q, dtype=float))
    r = (q - p)[:, None, :]
    a = walls[None, :, :2]
    s = (walls[:, 2:] - walls[:, :2])[None, :, :]
    denom = _cross(r, s)
    qp = a - p[:, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = _cross(qp, s) / denom
        u = _cross(qp, r) / denom
    ok = np.abs(denom) > 1e-15
    return ok & (t > t_min) & (t < t_max) & (u >= -u_tol) & (u <= 1.0 + u_tol)


class FloorPlan:
    """Immutable floor plan. Derived geometry is computed once at construction."""

    def __init__(self, occupied, tx, start=None, cell: float = CELL_SIZE, name: str = ""):
        occupied = np.array(occupied, dtype=bool)
        if occupied.ndim != 2 or occupied.shape[0] != occupied.shape[1]:
            raise MapFormatError(f"grid must be square, got shape {occupied.shape}")
        occupied.setflags(write=False)
        self.occupied = occupied
        self.cell = float(cell)
        self.name = name
        self.tx = (float(tx[0]), float(tx[1]))
        self.start = None if start is None else (float(start[0]), float(start[1]))
        if not self.is_free(*self.tx):
            raise MapFormatError(f"transmitter {self.tx} is not in free space")
        if self.start is not None and not self.is_free(*self.start):
            raise MapFormatError(f"start {self.start} is not in free space")
        self.walls, self.normals = extract_walls(occupied, self.cell)
        self.walls.setflags(write=False)
        self.normals.setflags(write=False)
        self._cache: dict = {}

    @property
    def size(self) -> int:
        return self.occupied.shape[0]

    @property
    def extent(self) -> float:
        return self.size * self.cell

    def with_tx(self, tx) -> "FloorPlan":
        return FloorPlan(self.occupied, tx, self.start, self.cell, self.name)

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        """(column, row) of the cell containing a point."""
        return int(np.floor(x / self.cell)), int(np.floor(y / self.cell))

    def cell_center(self, cx: int, cy: int) -> tuple[float, float]:
        return ((cx + 0.5) * self.cell, (cy + 0.5) * self.cell)

    def in_bounds(self, x: float, y: float) -> bool:
        return 0.0 <= x < self.extent and 0.0 <= y < self.extent

    def is_free(self, x: float, y: float) -> bool:
        if not self.in_bounds(x, y):
            return False
        cx, cy = self.cell_of(x, y)
        return not self.occupied[cy, cx]

    def blocked(self, p, q) -> bool:
        """True if the straight move p->q touches or crosses a wall."""
        return bool(segment_hits(p, q, self.walls, t_min=1e-12, t_max=1.0 + 1e-9, u_tol=1e-9).any())

    def line_of_sight(self, p, q) -> bool:
        return not segment_hits(p, q, self.walls).any()

    def clip(self, x: float, y: float, margin: float = 1e-6) -> tuple[float, float]:
        hi = self.extent - margin
        return (min(max(x, margin), hi), min(max(y, margin), hi))

    def nearest_free(self, x: float, y: float) -> tuple[float, float]:
        """Center of the free cell nearest to a point (the point itself if already free)."""
        if self.is_free(x, y):
            return (x, y)
        if "nearest" not in self._cache:
            from scipy.ndimage import distance_transform_edt
            _, idx = distance_transform_edt(self.occupied, return_indices=True)
            self._cache["nearest"] = idx
        idx = self._cache["nearest"]
        cx, cy = self.cell_of(*self.clip(x, y))
        return self.cell_center(int(idx[1][cy, cx]), int(idx[0][cy, cx]))


def load_map(text: str, name: str = "") -> FloorPlan:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise MapFormatError("empty map file")
    header = lines[0].split()
    if len(header) != 5:
        raise MapFormatError("header must be 'M Sx Sy Tx Ty'")
    try:
        m, sx, sy, tx, ty = (int(v) for v in header)
    except ValueError as exc:
        raise MapFormatError(f"non-integer header field: {exc}") from None
    if m <= 0:
        raise MapFormatError(f"bad grid size {m}")
    rows = lines[1:]
    if len(rows) != m:
        raise MapFormatError(f"expected {m} rows, found {len(rows)}")
    grid = np.zeros((m, m), dtype=bool)
    for r, row in enumerate(rows):
        if len(row) != m:
            raise MapFormatError(f"row {r + 1} has {len(row)} characters, expected {m}")
        if set(row) - {"#", "."}:
            raise MapFormatError(f"row {r + 1} contains characters other than '#' and '.'")
        grid[m - 1 - r] = np.frombuffer(row.encode(), dtype=np.uint8) == ord("#")
    for label, (cx, cy) in (("start", (sx, sy)), ("transmitter", (tx, ty))):
        if not (0 <= cx < m and 0 <= cy < m):
            raise MapFormatError(f"{label} cell ({cx}, {cy}) outside the grid")
        if grid[cy, cx]:
            raise MapFormatError(f"{label} cell ({cx}, {cy}) is occupied")
    return FloorPlan(grid, ((tx + 0.5) * CELL_SIZE, (ty + 0.5) * CELL_SIZE),
                     ((sx + 0.5) * CELL_SIZE, (sy + 0.5) * CELL_SIZE), name=name)


def read_map(path) -> FloorPlan:
    path = Path(path)
    return load_map(path.read_text(encoding="utf-8"), name=path.stem)


def dump_map(occupied: np.ndarray, start_cell, tx_cell) -> str:
    occupied = np.asarray(occupied, dtype=bool)
    m = occupied.shape[0]
    out = [f"{m} {start_cell[0]} {start_cell[1]} {tx_cell[0]} {tx_cell[1]}"]
    for r in range(m - 1, -1, -1):
        out.append("".join("#" if v else "." for v in occupied[r]))
    return "\n".join(out) + "\n"
