"""Beaconless greedy forwarding, beaconless planarization and face recovery.

Forwarder elections are timer based. In greedy mode only candidates with
positive progress compete. At a local minimum the source runs a
beaconless planarization over its neighbors and forwards along the
resulting Gabriel edges with the right-hand rule until it reaches a node
closer to the destination than where recovery started.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import (
    Area,
    Position,
    Shape,
    Topology,
    classify,
    csa_npa,
    csa_ppa,
    distance,
    gabriel_violates,
    segment_intersection,
)
from .mac import (
    ContentionRound,
    ForwarderSelection,
    FrameKind,
    HopMachine,
    HopResult,
    LinkBudget,
    MacConfig,
    TraceEvent,
    entries_for,
    forwarder_timer,
    resolve_contention,
)
from .phy import PhyConfig, QamParams, qam_params


HOP_CAP_FACTOR = 12


class RoutingMode(enum.Enum):
    GREEDY = "greedy"
    RECOVERY = "recovery"


@dataclass
class RouteConfig:
    """Everything a route needs besides the topology and the random stream."""

    mac: MacConfig = field(default_factory=MacConfig)
    phy: PhyConfig = field(default_factory=PhyConfig)
    qam: QamParams = field(default_factory=lambda: qam_params(4))
    cooperative: bool = True
    shape: Shape = Shape.REULEAUX
    side: int = 1
    retries: int = 3
    hop_cap: int | None = None
    ideal_phy: bool = False

    def __post_init__(self):
        if self.retries < 0:
            raise ValueError("retries must be >= 0")
        if self.hop_cap is not None and self.hop_cap < 1:
            raise ValueError("hop cap must be positive")

    @property
    def link(self) -> LinkBudget:
        return LinkBudget(self.phy.tx_power / self.phy.noise_power, self.phy.path_loss_exp)

    @classmethod
    def ideal(cls, **kw) -> "RouteConfig":
        """Error-free PHY and collision-free MAC (only exact timer ties collide)."""
        mac = kw.pop("mac", MacConfig(vulnerability_window=0.0))
        return cls(mac=mac, ideal_phy=True, **kw)


def blgf_select(
    S: int,
    D: int,
    topo: Topology,
    mac: MacConfig,
    rng: np.random.Generator,
) -> ForwarderSelection | None:
    """Greedy forwarder election among the positive-progress neighbors of ``S``.

    Returns None at a local minimum (no positive-progress neighbor). The
    destination, when it is a neighbor, answers immediately.
    """
    pS, pD, r = topo[S], topo[D], topo.radio_range
    cands = [v for v in topo.neighbors(S) if classify(pS, pD, topo[v], r) is Area.PPA]
    if not cands:
        return None
    timers = {}
    for v in cands:
        timers[v] = 0.0 if v == D else forwarder_timer(csa_ppa(pS, pD, topo[v], r, mac.nsa), mac, rng)
    rnd = resolve_contention(entries_for(timers, topo.hears), mac.ctf_window, deadline=mac.t_max / 2.0)
    events = _ctf_events(rnd, S)
    if rnd.winner is None:
        return ForwarderSelection(None, mac.t_max / 2.0, rnd, False, events)
    return ForwarderSelection(rnd.winner, rnd.win_time + mac.t_ctf, rnd, False, events)


def _ctf_events(rnd: ContentionRound, dst: int) -> list[TraceEvent]:
    events = [TraceEvent(t, FrameKind.CTF.value, n, dst, "collision") for t, nodes in rnd.collisions for n in nodes]
    if rnd.winner is not None:
        events.append(TraceEvent(rnd.win_time, FrameKind.CTF.value, rnd.winner, dst, "sent"))
    return sorted(events)


@dataclass
class PlanarSubgraph:
    """Local Gabriel view of ``center`` built without beacons."""

    center: int
    edges: set[tuple[int, int]]
    responders: list[int]
    hidden: list[int]
    protests: list[tuple[int, int]]
    events: list[TraceEvent] = field(default_factory=list)

    @property
    def neighbors(self) -> list[int]:
        return sorted(v for _, v in self.edges)


def bfp_planarize(
    center: int,
    candidates: dict[int, Position],
    center_pos: Position,
    r: float,
    mac: MacConfig,
    rng: np.random.Generator,
    timers: dict[int, float] | None = None,
    hears=None,
) -> PlanarSubgraph:
    """Beaconless planarization around ``center``.

    Candidates answer in timer order. A candidate that overhears an earlier
    answer conflicting with its own edge (either one lies in the other's
    diameter circle) stays hidden. Hidden nodes then protest every known
    node whose circle contains them, repeatedly, until nothing changes. The
    center keeps the Gabriel edges among everything it heard, which is
    exactly its Gabriel neighborhood.

    ``timers`` overrides the random corona timers; ``hears(u, v)`` defaults
    to the unit-disk rule with radius ``r``.
    """
    pos = dict(candidates)
    if hears is None:
        def hears(u, v):
            return distance(pos[u], pos[v]) <= r
    if timers is None:
        timers = {v: forwarder_timer(csa_npa(center_pos, pos[v], r, mac.nsa), mac, rng) for v in sorted(pos)}
    order = sorted(pos, key=lambda v: (timers[v], v))

    responders: list[int] = []
    hidden: list[int] = []
    events: list[TraceEvent] = []
    for w in order:
        conflict = any(
            hears(u, w) and (gabriel_violates(center_pos, pos[w], pos[u]) or gabriel_violates(center_pos, pos[u], pos[w]))
            for u in responders
        )
        if conflict:
            hidden.append(w)
        else:
            responders.append(w)
            events.append(TraceEvent(timers[w], FrameKind.CTF.value, w, center, "sent"))

    known = list(responders)
    protests: list[tuple[int, int]] = []
    waiting = list(hidden)
    changed = True
    while changed:
        changed = False
        for h in list(waiting):
            targets = [k for k in known if hears(h, k) and gabriel_violates(center_pos, pos[k], pos[h])]
            if targets:
                protests.extend((h, k) for k in targets)
                known.append(h)
                waiting.remove(h)
                changed = True
    for h, k in protests:
        events.append(TraceEvent(mac.t_max, FrameKind.PROTEST.value, h, k, "sent"))

    edges = {
        (center, k)
        for k in known
        if not any(j != k and gabriel_violates(center_pos, pos[k], pos[j]) for j in known)
    }
    return PlanarSubgraph(center, edges, responders, hidden, protests, events)


def gabriel_neighbors(center_pos: Position, candidates: dict[int, Position]) -> set[int]:
    """Brute-force Gabriel neighbors of a node among ``candidates``."""
    return {
        k for k, pk in candidates.items()
        if not any(j != k and gabriel_violates(center_pos, pk, pj) for j, pj in candidates.items())
    }


@dataclass(frozen=True)
class FaceState:
    """Perimeter-mode bookkeeping.

    ``entry`` is where recovery began, ``lf`` the point where the current
    face was entered and ``first_edge`` the first edge taken on that face.
    """

    entry: int
    entry_pos: Position
    lf: Position
    first_edge: tuple[int, int] | None = None


def _angle(c: Position, p: Position) -> float:
    return math.atan2(p[1] - c[1], p[0] - c[0])


def _ccw_next(c: Position, ref_angle: float, nbrs: dict[int, Position], exclude_zero: bool) -> list[int]:
    """Neighbors sorted by counterclockwise sweep from ``ref_angle``."""

    def sweep(v):
        a = (_angle(c, nbrs[v]) - ref_angle) % (2.0 * math.pi)
        if exclude_zero and a < 1e-12:
            a = 2.0 * math.pi
        return (a, v)

    return sorted(nbrs, key=sweep)


def face_next_hop(
    x: int,
    x_pos: Position,
    nbrs: dict[int, Position],
    D_pos: Position,
    prev: int | None,
    prev_pos: Position | None,
    state: FaceState,
) -> tuple[int | None, FaceState]:
    """Right-hand-rule step on the planar neighbors ``nbrs`` of ``x``.

    The first step sweeps counterclockwise from the ray towards the
    destination; later steps sweep from the incoming edge. Crossing the
    segment from the recovery entry to the destination closer than the
    current face entry point switches faces. Returns ``(None, state)`` if
    there is no usable edge or the face loops back to its first edge.
    """
    if not nbrs:
        return None, state
    ref = _angle(x_pos, D_pos) if prev is None else _angle(x_pos, prev_pos)
    order = _ccw_next(x_pos, ref, nbrs, exclude_zero=prev is not None)
    lf = state.lf
    first_edge = state.first_edge
    i = 0
    nxt = order[0]
    for _ in range(len(order)):
        nxt = order[i % len(order)]
        p = segment_intersection(x_pos, nbrs[nxt], state.entry_pos, D_pos)
        if p is not None and distance(p, D_pos) < distance(lf, D_pos) - 1e-12:
            lf = p
            first_edge = None
            i += 1
            if len(order) == 1:
                break
            continue
        break
    edge = (x, nxt)
    if first_edge is None:
        first_edge = edge
    elif edge == first_edge:
        return None, state
    return nxt, replace(state, lf=lf, first_edge=first_edge)


@dataclass
class HopRecord:
    source: int
    forwarder: int | None
    mode: RoutingMode
    result: HopResult
    attempt: int
    face: FaceState | None = None


@dataclass
class RouteResult:
    delivered: bool
    path: list[int]
    hops: list[HopRecord]
    elapsed: float
    reason: str = ""

    @property
    def attempts(self) -> list[HopResult]:
        return [h.result for h in self.hops]

    @property
    def hop_count(self) -> int:
        return len(self.path) - 1

    @property
    def trace(self) -> list[TraceEvent]:
        out, t0 = [], 0.0
        for h in self.hops:
            out.extend(ev._replace(time=round(t0 + ev.time, 6)) for ev in h.result.trace)
            t0 += h.result.elapsed
        return out


def route(
    S: int,
    D: int,
    topo: Topology,
    cfg: RouteConfig,
    rng: np.random.Generator,
) -> RouteResult:
    """Forward one packet from ``S`` to ``D`` hop by hop.

    Each hop is retried up to ``cfg.retries`` times after a failure. The
    route gives up when a hop exhausts its retries, when face traversal
    loops, or when the hop count reaches ``cfg.hop_cap``. The default cap is
    ``HOP_CAP_FACTOR`` times the node count: a planar graph has fewer than
    3|V| edges and a face walk crosses each edge a bounded number of times,
    so legitimate recovery routes can be longer than |V| hops.
    """
    if S == D:
        return RouteResult(True, [S], [], 0.0)
    cap = cfg.hop_cap if cfg.hop_cap is not None else HOP_CAP_FACTOR * len(topo)
    pD = topo[D]
    path = [S]
    hops: list[HopRecord] = []
    elapsed = 0.0
    current, prev = S, None
    face: FaceState | None = None

    while current != D:
        if len(path) - 1 >= cap:
            return RouteResult(False, path, hops, elapsed, "hop_cap")
        if face is not None and distance(topo[current], pD) < distance(face.entry_pos, pD):
            face, prev = None, None

        done = False
        for attempt in range(cfg.retries + 1):
            pending: dict = {}

            def select() -> ForwarderSelection:
                mode_face = face
                if mode_face is None:
                    sel = blgf_select(current, D, topo, cfg.mac, rng)
                    if sel is not None:
                        pending["mode"] = RoutingMode.GREEDY
                        return sel
                    mode_face = FaceState(current, topo[current], topo[current])
                return _recovery_select(current, D, topo, cfg.mac, rng, prev, mode_face, pending)

            machine = HopMachine(
                topo, current, select, cfg.mac, cfg.qam, cfg.link, rng,
                cooperative=cfg.cooperative, shape=cfg.shape, side=cfg.side, ideal_phy=cfg.ideal_phy,
            )
            res = machine.run()
            elapsed += res.elapsed
            mode = pending.get("mode", RoutingMode.RECOVERY if face is not None else RoutingMode.GREEDY)
            hops.append(HopRecord(current, res.forwarder, mode, res, attempt, pending.get("face")))
            if res.outcome.success:
                done = True
                break
            if pending.get("dead_end"):
                return RouteResult(False, path, hops, elapsed, "face_loop")
        if not done:
            return RouteResult(False, path, hops, elapsed, "retries")

        nxt = res.forwarder
        if mode is RoutingMode.RECOVERY and nxt != D:
            face, prev = pending["face"], current
        else:
            face, prev = None, None
        path.append(nxt)
        current = nxt
    return RouteResult(True, path, hops, elapsed)


def _recovery_select(
    x: int,
    D: int,
    topo: Topology,
    mac: MacConfig,
    rng: np.random.Generator,
    prev: int | None,
    state: FaceState,
    pending: dict,
) -> ForwarderSelection:
    pending["mode"] = RoutingMode.RECOVERY
    nbrs = topo.neighbors(x)
    if D in nbrs:
        pending["face"] = state
        ev = [TraceEvent(0.0, FrameKind.CTF.value, D, x, "sent")]
        return ForwarderSelection(D, mac.t_ctf, None, True, ev)
    pos = {v: topo[v] for v in nbrs}
    sub = bfp_planarize(x, pos, topo[x], topo.radio_range, mac, rng, hears=topo.hears)
    planar = {v: topo[v] for v in sub.neighbors}
    nxt, new_state = face_next_hop(
        x, topo[x], planar, topo[D], prev, None if prev is None else topo[prev], state,
    )
    pending["face"] = new_state
    if nxt is None:
        pending["dead_end"] = bool(planar)
        return ForwarderSelection(None, mac.t_max, None, True, sub.events)
    return ForwarderSelection(nxt, mac.t_max, None, True, sub.events)
