"""Frames, timers, contention resolution and the per-hop handshake.

Times are in microseconds.
"""
from __future__ import annotations

import enum
import heapq
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple

import numpy as np

from .geometry import Shape, Topology, in_relaying_area
from .phy import QamParams, Reception, packet_symbols
from .relaysel import build_candidates

SYMBOL_RATE = 22.0  # symbols per microsecond (22 MHz, one symbol per Hz)
PACKET_BYTES = 1538


class FrameKind(enum.Enum):
    DATA = "DATA"
    CTF = "CTF"
    SELECT = "SELECT"
    ACK = "ACK"
    RELAY_DATA = "RELAY_DATA"
    PROTEST = "PROTEST"


@dataclass(frozen=True)
class Frame:
    kind: FrameKind
    src: int
    dst: int | None = None
    src_position: tuple[float, float] | None = None
    dest_position: tuple[float, float] | None = None
    coop_requested: bool = False
    payload_symbols: int = 0

    def __post_init__(self):
        if self.kind in (FrameKind.DATA, FrameKind.RELAY_DATA):
            if self.payload_symbols <= 0:
                raise ValueError(f"{self.kind.value} frames carry a payload")
        elif self.payload_symbols:
            raise ValueError("control frames carry no payload")
        if self.coop_requested and self.kind is not FrameKind.CTF:
            raise ValueError("only CTF frames carry the cooperation flag")


@dataclass
class MacConfig:
    t_max: float = 500.0
    nsa: int = 8
    t_data: float = packet_symbols(PACKET_BYTES, 4) / SYMBOL_RATE
    t_ctf: float = 20.0
    t_sel: float = 20.0
    t_ack: float = 20.0
    vulnerability_window: float | None = None

    def __post_init__(self):
        if self.nsa < 2 or self.nsa % 2:
            raise ValueError("NSA must be an even integer >= 2")
        for name in ("t_max", "t_data", "t_ctf", "t_sel", "t_ack"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.t_data < max(self.t_ctf, self.t_sel, self.t_ack):
            raise ValueError("DATA must be at least as long as the control frames")

    @classmethod
    def for_packet(cls, M: int, packet_bytes: int = PACKET_BYTES, symbol_rate: float = SYMBOL_RATE, **kw):
        return cls(t_data=packet_symbols(packet_bytes, M) / symbol_rate, **kw)

    @property
    def ctf_window(self) -> float:
        return self.vulnerability_window if self.vulnerability_window is not None else self.t_ctf

    @property
    def relay_window(self) -> float:
        return self.vulnerability_window if self.vulnerability_window is not None else self.t_data


def forwarder_timer(csa: int, cfg: MacConfig, rng: np.random.Generator) -> float:
    """Forwarder contention delay for a candidate in sub-area ``csa``."""
    if not 0 <= csa < cfg.nsa:
        raise ValueError(f"CSA index {csa} outside [0, {cfg.nsa - 1}]")
    slot = cfg.t_max / cfg.nsa
    return csa * slot + rng.uniform(0.0, slot)


def ts1_initial(cfg: MacConfig) -> float:
    """Source timeout for finding a forwarder."""
    return cfg.t_data + cfg.t_ctf + cfg.t_max


def ts1_updated(cfg: MacConfig, coop: bool) -> float:
    """Source timeout, rearmed after SELECT, for receiving the ACK."""
    if coop:
        return cfg.t_sel + cfg.t_max + cfg.t_data + cfg.t_ack
    return cfg.t_sel + cfg.t_ack


def tf1(cfg: MacConfig, coop: bool) -> float:
    """Forwarder timeout, started with its CTF."""
    if coop:
        return cfg.t_ctf + cfg.t_sel + cfg.t_max + cfg.t_data
    return cfg.t_ctf + cfg.t_sel


class Outcome(enum.Enum):
    WINNER = "winner"
    COLLISION = "collision"
    SILENCE = "silence"


@dataclass
class ContentionEntry:
    node: int
    timer: float
    audible_to: frozenset[int] = frozenset()


@dataclass
class ContentionRound:
    """One timer-based election and how it resolved.

    A collision does not end the round: colliding nodes drop out, nodes that
    overheard them suppress, and later timers may still win. ``outcome`` is
    WINNER whenever somebody eventually won.
    """

    entries: list[ContentionEntry]
    winner: int | None = None
    win_time: float | None = None
    collisions: list[tuple[float, tuple[int, ...]]] = field(default_factory=list)
    suppressed: set[int] = field(default_factory=set)

    @property
    def outcome(self) -> Outcome:
        if self.winner is not None:
            return Outcome.WINNER
        return Outcome.COLLISION if self.collisions else Outcome.SILENCE

    @property
    def had_collision(self) -> bool:
        return bool(self.collisions)


def resolve_contention(
    entries: Iterable[ContentionEntry],
    window: float,
    deadline: float = math.inf,
) -> ContentionRound:
    """Resolve a timer election with carrier sensing and hidden terminals.

    ``window`` is the vulnerability window (the response frame length): a
    candidate that fires while an earlier response is on the air collides
    with it unless it can hear it, in which case it suppresses. Candidates
    that hear any transmission suppress for the rest of the round; equal
    timers always collide. Timers at or after ``deadline`` never fire.
    """
    entries = list(entries)
    rnd = ContentionRound(entries)
    pending = sorted(entries, key=lambda e: (e.timer, e.node))
    gone: set[int] = set()
    for i, first in enumerate(pending):
        if first.node in gone:
            continue
        if first.timer >= deadline:
            break
        group = [first]
        for other in pending[i + 1:]:
            if other.timer >= first.timer + window or other.timer >= deadline:
                break
            if other.node in gone:
                continue
            if any(other.node in g.audible_to for g in group if g.timer < other.timer):
                gone.add(other.node)
                rnd.suppressed.add(other.node)
            else:
                group.append(other)
        members = {g.node for g in group}
        gone |= members
        for e in pending:
            if e.node not in gone and any(e.node in g.audible_to for g in group):
                gone.add(e.node)
                rnd.suppressed.add(e.node)
        if len(group) == 1:
            rnd.winner, rnd.win_time = first.node, first.timer
            break
        rnd.collisions.append((first.timer, tuple(g.node for g in group)))
    return rnd


def entries_for(timers: dict[int, float], hears: Callable[[int, int], bool]) -> list[ContentionEntry]:
    nodes = sorted(timers)
    return [ContentionEntry(n, timers[n], frozenset(m for m in nodes if m != n and hears(n, m))) for n in nodes]


class TraceEvent(NamedTuple):
    time: float
    kind: str
    src: int
    dst: int | None
    outcome: str


class HopOutcome(enum.Enum):
    DIRECT_SUCCESS = "DirectSuccess"
    COOP_SUCCESS = "CoopSuccess"
    COOP_FAIL_NO_RELAY = "CoopFailNoRelay"
    NO_FORWARDER = "NoForwarder"
    COLLISION_ABORT = "CollisionAbort"
    RESIDUAL_ERROR = "ResidualError"

    @property
    def success(self) -> bool:
        return self in (HopOutcome.DIRECT_SUCCESS, HopOutcome.COOP_SUCCESS)


@dataclass
class ForwarderSelection:
    """Result of the forwarder election that follows a DATA broadcast.

    ``decision_time`` is measured from the end of DATA and is when the
    source learns its forwarder (end of the winning CTF, or end of the
    recovery window). ``events`` carry times relative to the end of DATA.
    """

    winner: int | None
    decision_time: float
    round: ContentionRound | None
    recovery: bool = False
    events: list[TraceEvent] = field(default_factory=list)


@dataclass
class HopResult:
    outcome: HopOutcome
    source: int
    forwarder: int | None
    relay: int | None
    coop_requested: bool
    recovery: bool
    elapsed: float
    rounds: list[ContentionRound]
    trace: list[TraceEvent]
    forwarder_decoded: bool | None = None

    @property
    def collisions(self) -> int:
        return sum(r.had_collision for r in self.rounds)


class EventQueue:
    """Minimal discrete-event scheduler with cancellable entries.

    At equal times, lower ``priority`` runs first; timeouts use priority 1
    so that a frame ending exactly at a deadline still counts.
    """

    def __init__(self):
        self.now = 0.0
        self._heap: list = []
        self._seq = itertools.count()

    def schedule(self, at: float, action: Callable, *args, priority: int = 0) -> list:
        if at < self.now:
            raise ValueError("cannot schedule in the past")
        entry = [at, priority, next(self._seq), action, args, True]
        heapq.heappush(self._heap, entry)
        return entry

    @staticmethod
    def cancel(entry) -> None:
        if entry is not None:
            entry[5] = False

    def clear(self) -> None:
        self._heap.clear()

    def run(self) -> None:
        while self._heap:
            at, _, _, action, args, live = heapq.heappop(self._heap)
            if not live:
                continue
            self.now = at
            action(*args)


@dataclass
class LinkBudget:
    """Mean per-symbol SNR of a protocol transmission over a distance."""

    tx_snr: float
    path_loss_exp: float = 2.0

    def mean_snr(self, d: float) -> float:
        return self.tx_snr * max(d, 1e-9) ** (-self.path_loss_exp)


class HopMachine:
    """Event-driven DATA / CTF / SELECT / [RELAY_DATA] / ACK exchange for one hop.

    ``select_forwarder`` runs the forwarder election after the DATA
    broadcast (greedy or recovery, supplied by the routing layer).
    """

    def __init__(
        self,
        topo: Topology,
        source: int,
        select_forwarder: Callable[[], ForwarderSelection],
        mac: MacConfig,
        qam: QamParams,
        link: LinkBudget,
        rng: np.random.Generator,
        cooperative: bool = True,
        shape: Shape = Shape.REULEAUX,
        side: int = 1,
        n_symbols: int | None = None,
        ideal_phy: bool = False,
    ):
        self.topo = topo
        self.source = source
        self.select_forwarder = select_forwarder
        self.mac = mac
        self.qam = qam
        self.link = link
        self.rng = rng
        self.cooperative = cooperative
        self.shape = shape
        self.side = side
        self.n_symbols = n_symbols or packet_symbols(PACKET_BYTES, qam.M)
        self.ideal_phy = ideal_phy

        self.q = EventQueue()
        self.trace: list[TraceEvent] = []
        self.rounds: list[ContentionRound] = []
        self.result: HopResult | None = None
        self._ts1 = None
        self._tf1 = None
        self._fail = HopOutcome.NO_FORWARDER
        self.forwarder: int | None = None
        self.relay: int | None = None
        self.coop = False
        self.recovery = False
        self._f_rx: Reception | None = None

    def _emit(self, kind: FrameKind | str, src: int, dst: int | None, outcome: str = "sent") -> None:
        kind = kind.value if isinstance(kind, FrameKind) else kind
        self.trace.append(TraceEvent(round(self.q.now, 6), kind, src, dst, outcome))

    def _reception(self, src: int, dst: int) -> Reception:
        if self.ideal_phy:
            return Reception(np.empty(0), np.empty(0), self.qam.M, _ok=True)
        snr = self.link.mean_snr(self.topo.distance(src, dst))
        return Reception.draw(snr, self.n_symbols, self.qam.M, self.rng)

    def run(self) -> HopResult:
        self.q.schedule(0.0, self._start)
        self.q.run()
        assert self.result is not None
        return self.result

    def _finish(self, outcome: HopOutcome) -> None:
        self.result = HopResult(
            outcome=outcome,
            source=self.source,
            forwarder=self.forwarder,
            relay=self.relay,
            coop_requested=self.coop,
            recovery=self.recovery,
            elapsed=self.q.now,
            rounds=self.rounds,
            trace=self.trace,
            forwarder_decoded=None if self._f_rx is None else self._f_rx.ok,
        )
        self.q.clear()

    def _start(self) -> None:
        self._emit(FrameKind.DATA, self.source, None)
        self._ts1 = self.q.schedule(ts1_initial(self.mac), self._ts1_expired, priority=1)
        self.q.schedule(self.mac.t_data, self._data_end)

    def _data_end(self) -> None:
        sel = self.select_forwarder()
        base = self.q.now
        for ev in sel.events:
            self.trace.append(ev._replace(time=round(base + ev.time, 6)))
        if sel.round is not None:
            self.rounds.append(sel.round)
        self.recovery = sel.recovery
        if sel.winner is not None:
            self.q.schedule(base + sel.decision_time, self._ctf_end, sel.winner)

    def _ctf_end(self, f: int) -> None:
        self.q.cancel(self._ts1)
        self.forwarder = f
        self._f_rx = self._reception(self.source, f)
        self.coop = self.cooperative and not self._f_rx.ok
        self._emit(FrameKind.SELECT, self.source, f)
        self._ts1 = self.q.schedule(self.q.now + ts1_updated(self.mac, self.coop), self._ts1_expired, priority=1)
        self.q.schedule(self.q.now + self.mac.t_sel, self._select_end)
        ctf_start = self.q.now - self.mac.t_ctf
        self._tf1 = self.q.schedule(ctf_start + tf1(self.mac, self.coop), self._tf1_expired, priority=1)

    def _select_end(self) -> None:
        if not self.coop:
            if self._f_rx.ok:
                self._send_ack()
            else:
                self._fail = HopOutcome.RESIDUAL_ERROR
            return
        self._relay_contention()

    def _relay_contention(self) -> None:
        S, F = self.source, self.forwarder
        pS, pF = self.topo[S], self.topo[F]
        relays = {}
        for v in self.topo.neighbors(S):
            if v == F or not in_relaying_area(pS, pF, self.topo[v], self.topo.radio_range, self.shape, self.side):
                continue
            if self._reception(S, v).ok:
                relays[v] = self.topo[v]
        cands = build_candidates(
            pS, pF, relays, self.topo.radio_range, self.qam, self.mac.t_max, self.mac.nsa, self.rng,
            self.link.path_loss_exp, self.shape, self.side,
        )
        if not cands:
            self._fail = HopOutcome.COOP_FAIL_NO_RELAY
            return
        entries = entries_for({c.node: c.timer for c in cands}, self.topo.hears)
        rnd = resolve_contention(entries, self.mac.relay_window, deadline=self.mac.t_max)
        self.rounds.append(rnd)
        base = self.q.now
        for t, nodes in rnd.collisions:
            for n in nodes:
                self.trace.append(TraceEvent(round(base + t, 6), FrameKind.RELAY_DATA.value, n, F, "collision"))
        if rnd.winner is None:
            self._fail = HopOutcome.COLLISION_ABORT if rnd.collisions else HopOutcome.COOP_FAIL_NO_RELAY
            return
        self.q.schedule(base + rnd.win_time, self._relay_start, rnd.winner)

    def _relay_start(self, r: int) -> None:
        self.relay = r
        self._emit(FrameKind.RELAY_DATA, r, self.forwarder)
        self.q.schedule(self.q.now + self.mac.t_data, self._relay_end, r)

    def _relay_end(self, r: int) -> None:
        snr = self.link.mean_snr(self.topo.distance(r, self.forwarder))
        g_rf = self.rng.exponential(snr, self.n_symbols)
        if self._f_rx.combined_with(g_rf):
            self._send_ack()
        else:
            self._fail = HopOutcome.RESIDUAL_ERROR

    def _send_ack(self) -> None:
        self.q.cancel(self._tf1)
        self._emit(FrameKind.ACK, self.forwarder, self.source)
        self.q.schedule(self.q.now + self.mac.t_ack, self._ack_end)

    def _ack_end(self) -> None:
        self.q.cancel(self._ts1)
        self._finish(HopOutcome.COOP_SUCCESS if self.coop else HopOutcome.DIRECT_SUCCESS)

    def _tf1_expired(self) -> None:
        self._emit("TF1_EXPIRY", self.forwarder, None, "timeout")

    def _ts1_expired(self) -> None:
        self._emit("TS1_EXPIRY", self.source, None, "timeout")
        self._finish(self._fail)
