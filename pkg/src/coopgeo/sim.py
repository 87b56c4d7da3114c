"""Topologies, scenarios and Monte Carlo orchestration.

Every trial draws from its own random stream, derived from the master seed
and the trial coordinates with :class:`numpy.random.SeedSequence`. Results
therefore do not depend on execution order or on the number of workers.
"""
from __future__ import annotations

import dataclasses
import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import optimize

from .geometry import Topology
from .mac import PACKET_BYTES, HopOutcome, MacConfig
from .phy import LinkStats, Mode, PhyConfig, average_ser, packet_symbols, qam_params, simulate_symbols
from .relaysel import rank_relays
from .routing import RouteConfig, route


class ScenarioKind(enum.Enum):
    RELAY_ORDERING = "RelayOrdering"
    PER_VS_DENSITY = "PerVsDensity"
    TMAX_SWEEP = "TmaxSweep"
    THROUGHPUT_VS_CONSTELLATION = "ThroughputVsConstellation"
    CUSTOM = "Custom"


class ScenarioError(ValueError):
    """Invalid scenario file or field value."""


@dataclass(frozen=True)
class Scenario:
    """One experiment.

    ``trials`` counts topologies for RelayOrdering and packets per x value
    otherwise; packets are spread over topologies ``trials_per_topology``
    at a time. The x axis is SNR for RelayOrdering and Custom, the neighbor
    count for PerVsDensity, T_max for TmaxSweep and M for
    ThroughputVsConstellation. Sweeps not on the x axis use their first
    value.
    """

    kind: ScenarioKind = ScenarioKind.PER_VS_DENSITY
    neighbors: tuple[int, ...] = (10,)
    snr_db_min: float = 25.0
    snr_db_max: float = 25.0
    snr_db_step: float = 5.0
    tmax_us: tuple[float, ...] = (500.0,)
    nsa: int = 8
    qam_m: tuple[int, ...] = (4,)
    trials: int = 100
    seed: int = 1
    relays: int = 5
    symbols: int = 5000
    trials_per_topology: int = 100
    radio_range: float | None = None
    retries: int = 3
    baseline: bool = False

    def __post_init__(self):
        if self.trials <= 0:
            raise ScenarioError("trials must be positive")
        if self.snr_db_step <= 0 or self.snr_db_max < self.snr_db_min:
            raise ScenarioError("SNR range is empty")
        if not self.neighbors or not self.tmax_us or not self.qam_m:
            raise ScenarioError("sweep lists must not be empty")
        if any(n <= 0 for n in self.neighbors) or any(t <= 0 for t in self.tmax_us):
            raise ScenarioError("neighbors and tmax_us must be positive")
        for m in self.qam_m:
            try:
                qam_params(m)
            except ValueError as exc:
                raise ScenarioError(str(exc)) from None
        if self.nsa < 2 or self.nsa % 2:
            raise ScenarioError("nsa must be an even integer >= 2")
        if self.relays < 1 or self.symbols < 1 or self.trials_per_topology < 1 or self.retries < 0:
            raise ScenarioError("relays, symbols and trials_per_topology must be positive, retries >= 0")
        if self.radio_range is not None and self.radio_range <= 0:
            raise ScenarioError("radio_range must be positive")

    @property
    def snr_grid(self) -> tuple[float, ...]:
        n = int(math.floor((self.snr_db_max - self.snr_db_min) / self.snr_db_step + 1e-9)) + 1
        return tuple(round(self.snr_db_min + i * self.snr_db_step, 9) for i in range(n))

    @property
    def x_values(self) -> tuple[float, ...]:
        k = self.kind
        if k in (ScenarioKind.RELAY_ORDERING, ScenarioKind.CUSTOM):
            return self.snr_grid
        if k is ScenarioKind.PER_VS_DENSITY:
            return tuple(float(n) for n in self.neighbors)
        if k is ScenarioKind.TMAX_SWEEP:
            return tuple(float(t) for t in self.tmax_us)
        return tuple(float(m) for m in self.qam_m)

    @property
    def x_name(self) -> str:
        return {
            ScenarioKind.RELAY_ORDERING: "snr_db",
            ScenarioKind.CUSTOM: "snr_db",
            ScenarioKind.PER_VS_DENSITY: "neighbors",
            ScenarioKind.TMAX_SWEEP: "tmax_us",
            ScenarioKind.THROUGHPUT_VS_CONSTELLATION: "qam_m",
        }[self.kind]

    def echo(self) -> dict[str, str]:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, enum.Enum):
                v = v.value
            elif isinstance(v, tuple):
                v = ",".join(_fmt(x) for x in v)
            elif isinstance(v, float):
                v = _fmt(v)
            out[f.name] = str(v)
        return out


def _fmt(v) -> str:
    return f"{v:g}" if isinstance(v, float) else str(v)


_LIST_KEYS = {"neighbors": int, "tmax_us": float, "qam_m": int}
_SCALAR_KEYS = {
    "snr_db_min": float, "snr_db_max": float, "snr_db_step": float, "nsa": int, "trials": int,
    "seed": int, "relays": int, "symbols": int, "trials_per_topology": int, "radio_range": float,
    "retries": int,
}


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_scenario(text: str, base: Scenario | None = None) -> Scenario:
    """Parse ``key = value`` lines; ``#`` starts a comment. Unknown keys are errors."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"line {lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        try:
            if key == "kind":
                values[key] = ScenarioKind(val)
            elif key == "baseline":
                values[key] = _parse_bool(val)
            elif key in _LIST_KEYS:
                values[key] = tuple(_LIST_KEYS[key](v) for v in val.split(",") if v.strip())
            elif key in _SCALAR_KEYS:
                values[key] = _SCALAR_KEYS[key](val)
            else:
                raise ScenarioError(f"unknown key: {key}")
        except ScenarioError:
            raise
        except ValueError as exc:
            raise ScenarioError(f"bad value for {key}: {exc}") from None
    return dataclasses.replace(base or Scenario(), **values)


def load_scenario(path: str | Path, base: Scenario | None = None) -> Scenario:
    return parse_scenario(Path(path).read_text(), base)


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for trial coordinates ``key``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


# Topologies


def gen_relay_topology(N: int, rng: np.random.Generator) -> Topology:
    """Source at (0, 0), destination at (1, 0), ``N`` relays uniform in [0, 1] x [-0.5, 0.5]."""
    if N < 1:
        raise ValueError("need at least one relay")
    relays = np.column_stack((rng.uniform(0.0, 1.0, N), rng.uniform(-0.5, 0.5, N)))
    return Topology([(0.0, 0.0), (1.0, 0.0), *relays], radio_range=2.0)


def _pair_within(rho: float) -> float:
    """P(|X - Y| <= rho) for X, Y uniform in the unit square, rho <= 1."""
    return math.pi * rho**2 - 8.0 / 3.0 * rho**3 + rho**4 / 2.0


def nodes_for_degree(target: float, side: float, r: float) -> int:
    """Node count whose expected mean degree in a ``side`` square is ``target``."""
    rho = min(r / side, 1.0)
    return max(2, int(round(target / _pair_within(rho))) + 1)


class TopologyError(RuntimeError):
    pass


def gen_random_topology(
    node_count: int,
    area: float,
    r: float,
    rng: np.random.Generator,
    target_neighbors: float | None = None,
    tolerance: float = 0.1,
    max_resamples: int = 1000,
) -> Topology:
    """Uniform nodes in an ``area`` x ``area`` square; node 0 is S, node 1 is D.

    S and D sit on the horizontal midline, half a radio range inside the
    left and right edges. Placements are redrawn until S and D are
    connected and, if ``target_neighbors`` is set, the mean degree is within
    ``tolerance`` of it.
    """
    if node_count < 2 or area <= 0 or r <= 0:
        raise ValueError("need node_count >= 2 and positive area and range")
    margin = min(0.5 * r, area / 2.0)
    S, D = (margin, area / 2.0), (area - margin, area / 2.0)
    for _ in range(max_resamples):
        pts = rng.uniform(0.0, area, (node_count - 2, 2))
        topo = Topology([S, D, *pts], r)
        if target_neighbors is not None and abs(topo.mean_degree() - target_neighbors) > tolerance * target_neighbors:
            continue
        if topo.connected(0, 1):
            return topo
    raise TopologyError(f"no acceptable topology after {max_resamples} resamples")


@lru_cache(maxsize=64)
def default_radio_range(snr_db: float = 25.0, M: int = 4, success: float = 0.5, packet_bytes: int = PACKET_BYTES) -> float:
    """Distance at which a single direct packet transmission succeeds with probability ``success``.

    Uses the per-phase power P/2 and i.i.d. per-symbol Rayleigh fading.
    """
    tx = PhyConfig.from_snr_db(snr_db).tx_power
    n = packet_symbols(packet_bytes, M)

    def gap(d):
        return n * math.log1p(-average_ser(tx / d**2, M)) - math.log(success)

    return optimize.brentq(gap, 1e-4, 10.0, xtol=1e-10)


# Results


@dataclass(frozen=True)
class TrialRecord:
    x: float
    arm: str
    topology: int
    trial: int
    delivered: bool = False
    hops: int = 0
    modes: tuple[str, ...] = ()
    hop_attempts: int = 0
    tx_errors: int = 0
    rounds: int = 0
    collision_rounds: int = 0
    elapsed: float = 0.0
    bits: float = 0.0
    symbols: int = 0
    symbol_errors: int = 0
    reason: str = ""


@dataclass
class RunResult:
    scenario: Scenario
    records: list[TrialRecord] = field(default_factory=list)

    def merge(self, other: "RunResult") -> "RunResult":
        if other.scenario != self.scenario:
            raise ValueError("cannot merge results of different scenarios")
        return RunResult(self.scenario, sorted(self.records + other.records, key=_record_key))

    def arms(self) -> list[str]:
        return sorted({r.arm for r in self.records}, key=_arm_key)

    def select(self, arm: str | None = None, x: float | None = None) -> list[TrialRecord]:
        return [r for r in self.records if (arm is None or r.arm == arm) and (x is None or r.x == x)]


def _arm_key(arm: str):
    order = {"coopgeo": 0, "baseline": 1, "direct": 90, "random": 91}
    if arm.startswith("rank"):
        return (10, int(arm[4:]))
    return (order.get(arm, 50), arm)


def _record_key(r: TrialRecord):
    return (r.x, _arm_key(r.arm), r.topology, r.trial)


# Relay ordering


def _relay_ordering_point(args) -> list[TrialRecord]:
    s, j, snr, k = args
    qam = qam_params(s.qam_m[0])
    cfg = PhyConfig.from_snr_db(snr)
    topo = gen_relay_topology(s.relays, substream(s.seed, k))
    S, D = topo[0], topo[1]
    relays = {i: topo[i] for i in range(2, len(topo))}
    order = rank_relays(S, D, relays, cfg.path_loss_exp, qam)
    pick = order[int(substream(s.seed, k, j, 1).integers(len(order)))]
    arms = [(f"rank{i + 1}", Mode.COOP, order[i]) for i in range(len(order))]
    arms += [("direct", Mode.DIRECT, None), ("random", Mode.COOP, pick)]
    out = []
    for name, mode, relay in arms:
        links = LinkStats.from_positions(S, D, None if relay is None else relays[relay], cfg.path_loss_exp)
        # Same stream for every arm: common random numbers sharpen the comparison.
        errors = simulate_symbols(mode, links, cfg, qam, substream(s.seed, k, j, 0), s.symbols)
        out.append(TrialRecord(x=snr, arm=name, topology=k, trial=0, symbols=s.symbols, symbol_errors=errors))
    return out


# Protocol runs


def route_config(s: Scenario, snr_db: float, tmax: float, M: int, cooperative: bool) -> RouteConfig:
    return RouteConfig(
        mac=MacConfig.for_packet(M, t_max=tmax, nsa=s.nsa),
        phy=PhyConfig.from_snr_db(snr_db),
        qam=qam_params(M),
        cooperative=cooperative,
        retries=s.retries,
    )


def _point_params(s: Scenario, x: float) -> tuple[int, float, float, int]:
    """(neighbors, snr_db, tmax, M) for one x value."""
    n, snr, tmax, M = s.neighbors[0], s.snr_grid[0], s.tmax_us[0], s.qam_m[0]
    k = s.kind
    if k is ScenarioKind.PER_VS_DENSITY:
        n = int(x)
    elif k is ScenarioKind.TMAX_SWEEP:
        tmax = x
    elif k is ScenarioKind.THROUGHPUT_VS_CONSTELLATION:
        M = int(x)
    else:
        snr = x
    return n, snr, tmax, M


def radio_range_for(s: Scenario) -> float:
    return s.radio_range if s.radio_range is not None else default_radio_range()


def _protocol_topology(s: Scenario, j: int, x: float, k: int, arms: tuple[str, ...]) -> list[TrialRecord]:
    n, snr, tmax, M = _point_params(s, x)
    r = radio_range_for(s)
    side = 4.0 * r
    # Streams are keyed by density, not by x: sweeps over T_max, SNR or M reuse
    # the same topologies and packet streams.
    topo = gen_random_topology(nodes_for_degree(n, side, r), side, r, substream(s.seed, n, k), target_neighbors=n)
    per_topo = min(s.trials_per_topology, s.trials - k * s.trials_per_topology)
    cfgs = {arm: route_config(s, snr, tmax, M, cooperative=arm == "coopgeo") for arm in arms}
    bits = PACKET_BYTES * 8.0
    out = []
    for i in range(per_topo):
        for arm in arms:
            # Both arms replay the same stream: paired comparison.
            res = route(0, 1, topo, cfgs[arm], substream(s.seed, n, k, i))
            results = res.attempts
            out.append(TrialRecord(
                x=x, arm=arm, topology=k, trial=i,
                delivered=res.delivered,
                hops=res.hop_count,
                modes=tuple(_mode_label(h) for h in res.hops if h.result.outcome.success),
                hop_attempts=len(results),
                tx_errors=sum(h.outcome in (HopOutcome.RESIDUAL_ERROR, HopOutcome.COOP_FAIL_NO_RELAY) for h in results),
                rounds=sum(len(h.rounds) for h in results),
                collision_rounds=sum(h.collisions for h in results),
                elapsed=res.elapsed,
                bits=bits if res.delivered else 0.0,
                reason=res.reason,
            ))
    return out


def _mode_label(h) -> str:
    if h.mode.value == "recovery":
        return "Recovery"
    return "Coop" if h.result.coop_requested else "Direct"


def _task(args):
    fn, rest = args
    return fn(*rest)


def _tasks(s: Scenario, arms: tuple[str, ...]):
    if s.kind is ScenarioKind.RELAY_ORDERING:
        for j, snr in enumerate(s.x_values):
            for k in range(s.trials):
                yield _relay_ordering_point, ((s, j, snr, k),)
        return
    n_topo = math.ceil(s.trials / s.trials_per_topology)
    for j, x in enumerate(s.x_values):
        for k in range(n_topo):
            yield _protocol_topology, (s, j, x, k, arms)


def _run(s: Scenario, arms: tuple[str, ...], workers: int) -> RunResult:
    tasks = list(_tasks(s, arms))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            chunks = list(pool.map(_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        chunks = [_task(t) for t in tasks]
    records = [r for chunk in chunks for r in chunk]
    return RunResult(s, sorted(records, key=_record_key))


def run_scenario(s: Scenario, workers: int = 1) -> RunResult:
    """Run every trial of ``s``; adds the baseline arm when ``s.baseline`` is set."""
    arms = ("coopgeo", "baseline") if s.baseline else ("coopgeo",)
    return _run(s, arms, workers)


def run_baseline(s: Scenario, workers: int = 1) -> RunResult:
    """Same contention and timers as CoopGeo, but cooperation is never requested."""
    if s.kind is ScenarioKind.RELAY_ORDERING:
        raise ScenarioError("the baseline is a protocol arm; RelayOrdering already has a direct arm")
    return _run(s, ("baseline",), workers)


# Constructed voids

# Cup-shaped empty region in the unit square, open towards the source: a
# vertical wall between S and D plus two arms reaching back past S.
_VOID_RECTS = ((0.45, 0.12, 0.70, 0.88), (0.15, 0.12, 0.70, 0.34), (0.15, 0.66, 0.70, 0.88))


def _in_void(p) -> bool:
    return any(x0 <= p[0] <= x1 and y0 <= p[1] <= y1 for x0, y0, x1, y1 in _VOID_RECTS)


def greedy_reaches(topo: Topology, S: int, D: int) -> bool:
    """Whether pure max-progress greedy forwarding gets from ``S`` to ``D``."""
    u = S
    while u != D:
        nbrs = topo.neighbors(u)
        if not nbrs:
            return False
        v = min(nbrs, key=lambda w: (topo.distance(w, D), w))
        if topo.distance(v, D) >= topo.distance(u, D):
            return False
        u = v
    return True


def gen_void_topology(node_count: int, rng: np.random.Generator, r: float = 0.25, max_resamples: int = 1000) -> Topology:
    """Connected topology where greedy forwarding from S (node 0) to D (node 1) hits a local minimum."""
    if node_count < 3:
        raise ValueError("a void needs at least one extra node")
    S, D = (0.35, 0.5), (0.9, 0.5)
    for _ in range(max_resamples):
        pts = []
        while len(pts) < node_count - 2:
            p = rng.uniform(0.0, 1.0, 2)
            if not _in_void(p):
                pts.append(p)
        topo = Topology([S, D, *pts], r)
        if topo.connected(0, 1) and not greedy_reaches(topo, 0, 1):
            return topo
    raise TopologyError(f"no void topology after {max_resamples} resamples")
