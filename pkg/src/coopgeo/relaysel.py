"""Location-based relay metric, best-relay choice and relay contention timers."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import optimize

from .geometry import Position, Shape, distance, farthest_point, optimal_relay_point
from .phy import QamParams

log = logging.getLogger(__name__)


@dataclass
class RelayCandidate:
    node: int
    position: Position
    metric: float
    normalized: float = 0.0
    timer: float = 0.0


def relay_metric(S: Position, F: Position, R: Position, p: float, qam: QamParams) -> float:
    """``A^2 d_SR^p + B d_RF^p``; smaller means a lower SER at the forwarder."""
    if p <= 0:
        raise ValueError("path-loss exponent must be positive")
    return qam.A**2 * distance(S, R) ** p + qam.B * distance(R, F) ** p


def select_best(candidates: list[RelayCandidate]) -> int | None:
    """Node id with the smallest metric (lowest id on ties); None if empty."""
    if not candidates:
        return None
    return min(candidates, key=lambda c: (c.metric, c.node)).node


def optimal_point(S: Position, F: Position, qam: QamParams, p: float = 2.0) -> Position:
    """Relay position minimizing the metric.

    Closed form for p = 2. Otherwise the minimizer still lies on segment SF
    (projecting onto the line shortens both distances), so a bounded 1-D
    search suffices.
    """
    if p == 2.0:
        return optimal_relay_point(S, F, qam.A, qam.B)
    if distance(S, F) == 0.0:
        return Position(S[0], S[1])

    def f(t):
        x = Position(S[0] + t * (F[0] - S[0]), S[1] + t * (F[1] - S[1]))
        return relay_metric(S, F, x, p, qam)

    res = optimize.minimize_scalar(f, bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-10})
    t = float(res.x)
    return Position(S[0] + t * (F[0] - S[0]), S[1] + t * (F[1] - S[1]))


def normalize_metric(m: float, f_star: float, f_max: float) -> float:
    """Map a metric onto [0, 1]; out-of-range values are clamped and logged."""
    if not f_max > f_star:
        raise ValueError("f_max must exceed f_star")
    value = (m - f_star) / (f_max - f_star)
    if value < 0.0 or value > 1.0:
        log.debug("metric %.6g outside [%.6g, %.6g], clamped", m, f_star, f_max)
        value = min(max(value, 0.0), 1.0)
    return value


def relay_timer(normalized: float, t_max: float, nsa: int, rng: np.random.Generator) -> float:
    """Relay contention delay: metric-driven part plus a random spread."""
    if not 0.0 <= normalized <= 1.0:
        raise ValueError("normalized metric must be in [0, 1]")
    return t_max * normalized + rng.uniform(0.0, 2.0 * t_max / nsa)


@lru_cache(maxsize=4096)
def _metric_range(S, F, r, shape, side, A, B, M, b, p):
    qam = QamParams(M=M, b=b, A=A, B=B)
    x_star = optimal_point(S, F, qam, p)
    f_star = relay_metric(S, F, x_star, p, qam)

    def f(pts):
        return qam.A**2 * np.hypot(pts[:, 0] - S[0], pts[:, 1] - S[1]) ** p + qam.B * np.hypot(
            pts[:, 0] - F[0], pts[:, 1] - F[1]
        ) ** p

    x_max = farthest_point(S, F, r, shape, x_star, metric=f, side=side)
    return x_star, f_star, relay_metric(S, F, x_max, p, qam)


def metric_range(
    S: Position, F: Position, r: float, qam: QamParams, p: float = 2.0, shape: Shape = Shape.REULEAUX, side: int = 1
) -> tuple[Position, float, float]:
    """``(x_star, f(x_star), f(x_max))`` for the relaying area of a hop (cached)."""
    S, F = Position(*map(float, S)), Position(*map(float, F))
    return _metric_range(S, F, float(r), shape, side, qam.A, qam.B, qam.M, qam.b, float(p))


def rank_relays(S: Position, F: Position, relays: dict[int, Position], p: float, qam: QamParams) -> list[int]:
    """Relay ids from best to worst metric."""
    return sorted(relays, key=lambda i: (relay_metric(S, F, relays[i], p, qam), i))


def build_candidates(
    S: Position,
    F: Position,
    relays: dict[int, Position],
    r: float,
    qam: QamParams,
    t_max: float,
    nsa: int,
    rng: np.random.Generator,
    p: float = 2.0,
    shape: Shape = Shape.REULEAUX,
    side: int = 1,
) -> list[RelayCandidate]:
    """Metric, normalized metric and contention timer for each relay.

    Iterates in node-id order so the random stream is reproducible.
    """
    if not relays or distance(S, F) == 0.0:
        return []
    _, f_star, f_max = metric_range(S, F, r, qam, p, shape, side)
    out = []
    for node in sorted(relays):
        pos = relays[node]
        m = relay_metric(S, F, pos, p, qam)
        n = normalize_metric(m, f_star, f_max) if f_max > f_star else 0.0
        out.append(RelayCandidate(node, pos, m, n, relay_timer(n, t_max, nsa, rng)))
    return out


def timers_ordered(n_i: float, n_j: float, nsa: int) -> bool:
    """True if a relay with normalized metric ``n_i`` always fires before one with ``n_j``."""
    return n_i + 2.0 / nsa < n_j or math.isclose(n_i + 2.0 / nsa, n_j)
