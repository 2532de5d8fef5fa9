"""Degree-based angle helpers shared across the package."""
from __future__ import annotations

import numpy as np

RESOLUTION = 10.0
# waypoint angles -170, -160, ..., 170, 180
PI_SET = tuple(float(a) for a in range(-170, 181, 10))


def wrap(deg):
    """Map degrees into (-180, 180]."""
    out = np.mod(np.asarray(deg, dtype=float), 360.0)
    out = np.where(out > 180.0, out - 360.0, out)
    if np.ndim(out) == 0:
        return float(out)
    return out


def circular_distance(a, b):
    d = np.abs(np.mod(np.asarray(a, dtype=float) - np.asarray(b, dtype=float), 360.0))
    d = np.minimum(d, 360.0 - d)
    return float(d) if np.ndim(d) == 0 else d


def angle_index(deg: float) -> int:
    """Position of a member of Π in :data:`PI_SET`."""
    idx = int(round((wrap(deg) + 170.0) / RESOLUTION))
    if not 0 <= idx < len(PI_SET) or abs(PI_SET[idx] - wrap(deg)) > 1e-6:
        raise ValueError(f"{deg} is not a member of the angle set")
    return idx


def bearing(dx: float, dy: float) -> float:
    return float(np.degrees(np.arctan2(dy, dx)))
