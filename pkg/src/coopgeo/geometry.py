"""Planar geometry for forwarding areas, relaying areas and planarization.

All functions are pure and work on :class:`Position` tuples in normalized
units (1.0 is the distance at which the mean channel gain is one).
"""
from __future__ import annotations

import enum
import math
from typing import Callable, NamedTuple

import numpy as np


class Position(NamedTuple):
    x: float
    y: float


class Area(enum.Enum):
    PPA = "PPA"
    NPA = "NPA"
    OUT_OF_RANGE = "OutOfRange"


class Shape(enum.Enum):
    LENS = "lens"
    REULEAUX = "reuleaux"


def distance(a: Position, b: Position) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def classify(S: Position, D: Position, F: Position, r: float) -> Area:
    """Place a candidate ``F`` in the forwarding area of ``S`` towards ``D``.

    Ties in progress go to the NPA so that a zero-progress hop is never
    treated as greedy.
    """
    if distance(S, F) > r:
        return Area.OUT_OF_RANGE
    if distance(F, D) < distance(S, D):
        return Area.PPA
    return Area.NPA


def csa_ppa(S: Position, D: Position, F: Position, r: float, nsa: int) -> int:
    """Progress band of a PPA candidate, 0 for the largest progress."""
    _check_nsa(nsa)
    if classify(S, D, F, r) is not Area.PPA:
        raise ValueError("candidate is not in the positive progress area")
    progress = distance(S, D) - distance(F, D)
    raw = math.floor(nsa * (r - progress) / (2.0 * r))
    return min(max(raw, 0), nsa // 2 - 1)


def csa_npa(S: Position, F: Position, r: float, nsa: int, D: Position | None = None) -> int:
    """Corona index of a recovery candidate.

    The NPA is cut into ``nsa / 2`` equal-area coronas around ``S``; the
    index is offset by ``nsa / 2`` so that it never collides with a PPA band.
    ``D`` is optional and only used to reject PPA candidates.
    """
    _check_nsa(nsa)
    d = distance(S, F)
    if d > r:
        raise ValueError("candidate is out of range")
    if D is not None and classify(S, D, F, r) is not Area.NPA:
        raise ValueError("candidate is not in the negative progress area")
    n = nsa // 2
    raw = math.floor((math.sqrt(n) * d / r) ** 2) + n
    return min(raw, nsa - 1)


def _check_nsa(nsa: int) -> None:
    if nsa < 2 or nsa % 2:
        raise ValueError(f"NSA must be an even integer >= 2, got {nsa}")


def reuleaux_apex(S: Position, F: Position, side: int = 1) -> Position:
    """Third vertex of the equilateral triangle on segment SF.

    ``side=1`` puts the apex to the left of the S->F direction.
    """
    d = distance(S, F)
    if d == 0.0:
        return Position(S[0], S[1])
    ux, uy = (F[0] - S[0]) / d, (F[1] - S[1]) / d
    h = math.sqrt(3.0) / 2.0 * d * (1 if side >= 0 else -1)
    return Position((S[0] + F[0]) / 2.0 - uy * h, (S[1] + F[1]) / 2.0 + ux * h)


def in_relaying_area(
    S: Position,
    F: Position,
    x: Position,
    r: float,
    shape: Shape = Shape.REULEAUX,
    side: int = 1,
) -> bool:
    if shape is Shape.LENS:
        return distance(S, x) <= r and distance(F, x) <= r
    d = distance(S, F)
    P = reuleaux_apex(S, F, side)
    return distance(S, x) <= d and distance(F, x) <= d and distance(P, x) <= d


def gabriel_violates(u: Position, v: Position, w: Position) -> bool:
    """True if ``w`` lies strictly inside the circle with diameter ``uv``."""
    cx, cy = (u[0] + v[0]) / 2.0, (u[1] + v[1]) / 2.0
    return math.hypot(w[0] - cx, w[1] - cy) < distance(u, v) / 2.0


def optimal_relay_point(S: Position, F: Position, A: float, B: float) -> Position:
    """Minimizer of ``A**2 |x-S|**2 + B |x-F|**2`` (path-loss exponent 2)."""
    a2 = A * A
    den = a2 + B
    if den == 0.0:
        raise ValueError("A**2 + B must be non-zero")
    return Position((a2 * S[0] + B * F[0]) / den, (a2 * S[1] + B * F[1]) / den)


def _arc(center: Position, radius: float, start: Position, stop: Position, n: int) -> np.ndarray:
    """Points on the shorter circular arc from ``start`` to ``stop``."""
    a0 = math.atan2(start[1] - center[1], start[0] - center[0])
    a1 = math.atan2(stop[1] - center[1], stop[0] - center[0])
    sweep = (a1 - a0 + math.pi) % (2.0 * math.pi) - math.pi
    t = a0 + sweep * np.linspace(0.0, 1.0, n)
    return np.column_stack((center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)))


def relaying_area_boundary(
    S: Position, F: Position, r: float, shape: Shape = Shape.REULEAUX, side: int = 1, n: int = 10_000
) -> np.ndarray:
    """``n`` points (approximately) tracing the boundary of the relaying area."""
    d = distance(S, F)
    if d == 0.0:
        return np.array([[S[0], S[1]]])
    if shape is Shape.LENS:
        if d > 2.0 * r:
            raise ValueError("disks do not intersect")
        h = math.sqrt(max(r * r - d * d / 4.0, 0.0))
        mx, my = (S[0] + F[0]) / 2.0, (S[1] + F[1]) / 2.0
        ux, uy = (F[0] - S[0]) / d, (F[1] - S[1]) / d
        c1 = Position(mx - uy * h, my + ux * h)
        c2 = Position(mx + uy * h, my - ux * h)
        k = n // 2
        return np.vstack((_arc(S, r, c2, c1, k), _arc(F, r, c1, c2, n - k)))
    P = reuleaux_apex(S, F, side)
    k = n // 3
    return np.vstack((
        _arc(S, d, F, P, k),
        _arc(F, d, P, S, k),
        _arc(P, d, S, F, n - 2 * k),
    ))


def farthest_point(
    S: Position,
    F: Position,
    r: float,
    shape: Shape,
    x_star: Position,
    metric: Callable[[np.ndarray], np.ndarray] | None = None,
    side: int = 1,
    n: int = 10_000,
) -> Position:
    """Point of the relaying area with the largest metric.

    ``metric`` maps an ``(n, 2)`` array of points to their metric values; by
    default it is the Euclidean distance to ``x_star``. The maximum of a
    convex metric over the (convex) area lies on its boundary, which is
    sampled densely.
    """
    if distance(S, F) == 0.0:
        return Position(x_star[0], x_star[1])
    pts = relaying_area_boundary(S, F, r, shape, side, n)
    if metric is None:
        values = np.hypot(pts[:, 0] - x_star[0], pts[:, 1] - x_star[1])
    else:
        values = np.asarray(metric(pts))
    i = int(np.argmax(values))
    return Position(float(pts[i, 0]), float(pts[i, 1]))


def segments_cross(p1: Position, p2: Position, q1: Position, q2: Position) -> bool:
    """Proper intersection of two segments (shared endpoints do not count)."""

    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return (v > 1e-12) - (v < -1e-12)

    if p1 in (q1, q2) or p2 in (q1, q2):
        return False
    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    return o1 * o2 < 0 and o3 * o4 < 0


def segment_intersection(p1: Position, p2: Position, q1: Position, q2: Position) -> Position | None:
    """Intersection point of segments p1p2 and q1q2, or None if disjoint/parallel."""
    rx, ry = p2[0] - p1[0], p2[1] - p1[1]
    sx, sy = q2[0] - q1[0], q2[1] - q1[1]
    den = rx * sy - ry * sx
    if abs(den) < 1e-15:
        return None
    qpx, qpy = q1[0] - p1[0], q1[1] - p1[1]
    t = (qpx * sy - qpy * sx) / den
    u = (qpx * ry - qpy * rx) / den
    if -1e-12 <= t <= 1 + 1e-12 and -1e-12 <= u <= 1 + 1e-12:
        return Position(p1[0] + t * rx, p1[1] + t * ry)
    return None


class Topology:
    """Nodes with ids ``0..n-1`` and unit-disk connectivity of radius ``radio_range``."""

    def __init__(self, positions, radio_range: float):
        if radio_range <= 0:
            raise ValueError("radio range must be positive")
        self.positions = [Position(float(p[0]), float(p[1])) for p in positions]
        for p in self.positions:
            if not (math.isfinite(p.x) and math.isfinite(p.y)):
                raise ValueError("coordinates must be finite")
        self.radio_range = float(radio_range)
        xy = np.array(self.positions, dtype=float).reshape(-1, 2)
        self._dist = np.hypot(xy[:, None, 0] - xy[None, :, 0], xy[:, None, 1] - xy[None, :, 1])
        adj = self._dist <= self.radio_range
        np.fill_diagonal(adj, False)
        self._adj = adj
        self._neighbors = [tuple(int(j) for j in np.flatnonzero(row)) for row in adj]

    def __len__(self) -> int:
        return len(self.positions)

    def __repr__(self) -> str:
        return f"Topology(n={len(self)}, r={self.radio_range:g})"

    def __getitem__(self, node: int) -> Position:
        return self.positions[node]

    def distance(self, u: int, v: int) -> float:
        return float(self._dist[u, v])

    def hears(self, u: int, v: int) -> bool:
        return bool(self._adj[u, v])

    def neighbors(self, u: int) -> tuple[int, ...]:
        return self._neighbors[u]

    def mean_degree(self) -> float:
        return float(self._adj.sum()) / len(self) if len(self) else 0.0

    def connected(self, u: int, v: int) -> bool:
        seen, stack = {u}, [u]
        while stack:
            w = stack.pop()
            if w == v:
                return True
            for x in self._neighbors[w]:
                if x not in seen:
                    seen.add(x)
                    stack.append(x)
        return False

    def is_connected(self) -> bool:
        return len(self) == 0 or all(self.connected(0, v) for v in range(1, len(self)))
