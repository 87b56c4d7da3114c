"""Quick invariant checks behind ``coopgeo validate``."""
from __future__ import annotations

import itertools
import math

import numpy as np

from . import kernels
from ._pykernels import qam_ser as py_qam_ser
from .geometry import Position, segments_cross
from .mac import MacConfig
from .phy import LinkStats, PhyConfig, coding_gain, qam_params, ser_closed_form
from .routing import RouteConfig, bfp_planarize, gabriel_neighbors, route
from .sim import gen_random_topology, substream


def random_neighborhood(rng: np.random.Generator, n: int, r: float = 1.0) -> dict[int, Position]:
    """``n`` points uniform in the disk of radius ``r`` around the origin."""
    rad = r * np.sqrt(rng.uniform(0.0, 1.0, n))
    ang = rng.uniform(0.0, 2.0 * math.pi, n)
    return {i + 1: Position(float(a), float(b)) for i, (a, b) in enumerate(zip(rad * np.cos(ang), rad * np.sin(ang)))}


def _check_bfp(seed: int, instances: int):
    rng = substream(seed, 101)
    mac = MacConfig()
    bad_equal = bad_planar = 0
    for _ in range(instances):
        nbrs = random_neighborhood(rng, int(rng.integers(1, 13)))
        sub = bfp_planarize(0, nbrs, Position(0.0, 0.0), 1.0, mac, rng)
        bad_equal += set(sub.neighbors) != gabriel_neighbors(Position(0.0, 0.0), nbrs)
        segs = [(Position(0.0, 0.0), nbrs[v]) for v in sub.neighbors]
        bad_planar += any(segments_cross(*a, *b) for a, b in itertools.combinations(segs, 2))
    yield "bfp_equals_gabriel", bad_equal == 0, f"{instances - bad_equal}/{instances} instances"
    yield "bfp_planar", bad_planar == 0, f"{bad_planar} crossing instances"


def _check_delivery(seed: int, instances: int):
    cfg = RouteConfig.ideal()
    delivered = 0
    for k in range(instances):
        rng = substream(seed, 102, k)
        n = int(rng.integers(20, 61))
        topo = gen_random_topology(n, 1.0, 0.25, rng)
        delivered += route(0, 1, topo, cfg, rng).delivered
    yield "ideal_delivery", delivered == instances, f"{delivered}/{instances} delivered"


def _check_phy():
    qam = qam_params(4)
    links = LinkStats(1.0, 1.0, 1.0)
    cfg = PhyConfig.from_snr_db(20.0)
    lhs = (coding_gain(links, qam) * cfg.total_power) ** -2
    rhs = ser_closed_form(links, cfg, qam)
    yield "coding_gain_identity", math.isclose(lhs, rhs, rel_tol=1e-12), f"{lhs:.6g} vs {rhs:.6g}"
    g = np.linspace(0.0, 100.0, 2001)
    ser = kernels.qam_ser(g, 4)
    yield "awgn_ser_monotone", bool(np.all(np.diff(ser) <= 0)), f"backend {kernels.BACKEND}"
    diff = float(np.max(np.abs(ser - py_qam_ser(g, 4))))
    yield "backend_parity", diff < 1e-12, f"max difference {diff:.2e}"


def run_checks(seed: int = 1, instances: int = 50):
    yield from _check_bfp(seed, instances)
    yield from _check_delivery(seed, instances)
    yield from _check_phy()
