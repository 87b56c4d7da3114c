"""Aggregate metrics and CSV output."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TextIO

from .mac import SYMBOL_RATE
from .sim import RunResult, ScenarioKind, TrialRecord

Z95 = 1.959963984540054
CSV_COLUMNS = ("x", "metric_name", "value", "ci95")
PROTOCOL_METRICS = ("per", "tx_error_prob", "collision_prob", "norm_throughput")


@dataclass(frozen=True)
class MetricRow:
    x: float
    metric: str
    value: float
    ci95: float


@dataclass
class MetricsRecord:
    scenario: dict[str, str]
    x_name: str
    rows: list[MetricRow] = field(default_factory=list)

    def get(self, metric: str, x: float) -> MetricRow:
        for row in self.rows:
            if row.metric == metric and row.x == x:
                return row
        raise KeyError((metric, x))

    def series(self, metric: str) -> list[MetricRow]:
        return sorted((r for r in self.rows if r.metric == metric), key=lambda r: r.x)


def proportion_ci(k: float, n: float) -> float:
    """Normal-approximation 95% half-width of a proportion ``k / n``."""
    if n <= 0:
        return 0.0
    p = k / n
    return Z95 * math.sqrt(max(p * (1.0 - p), 0.0) / n)


def ratio_ci(num: list[float], den: list[float]) -> float:
    """95% half-width of ``sum(num) / sum(den)`` by the delta method."""
    n = len(num)
    if n < 2 or sum(den) <= 0:
        return 0.0
    ratio = sum(num) / sum(den)
    mean_den = sum(den) / n
    resid = sum((a - ratio * b) ** 2 for a, b in zip(num, den))
    return Z95 * math.sqrt(resid / (n * (n - 1))) / mean_den


def protocol_metrics(records: list[TrialRecord], bits_per_symbol: float) -> dict[str, tuple[float, float]]:
    """PER, transmission error and collision probabilities and normalized throughput."""
    n = len(records)
    if n == 0:
        return {}
    lost = sum(not r.delivered for r in records)
    hop_attempts = sum(r.hop_attempts for r in records)
    tx_errors = sum(r.tx_errors for r in records)
    rounds = sum(r.rounds for r in records)
    collisions = sum(r.collision_rounds for r in records)
    capacity = SYMBOL_RATE * bits_per_symbol
    bits = [r.bits / capacity for r in records]
    times = [r.elapsed for r in records]
    total_time = sum(times)
    out = {
        "per": (lost / n, proportion_ci(lost, n)),
        "tx_error_prob": (tx_errors / hop_attempts if hop_attempts else 0.0, proportion_ci(tx_errors, hop_attempts)),
        "collision_prob": (collisions / rounds if rounds else 0.0, proportion_ci(collisions, rounds)),
        "norm_throughput": (sum(bits) / total_time if total_time > 0 else 0.0, ratio_ci(bits, times)),
    }
    return out


def _bits_per_symbol(r: RunResult, x: float) -> float:
    s = r.scenario
    M = int(x) if s.kind is ScenarioKind.THROUGHPUT_VS_CONSTELLATION else s.qam_m[0]
    return math.log2(M)


def compute_metrics(r: RunResult) -> MetricsRecord:
    """Per-x metrics for every arm of a run; empty when there are no trials."""
    rec = MetricsRecord(r.scenario.echo(), r.scenario.x_name)
    if not r.records:
        return rec
    xs = sorted({t.x for t in r.records})
    if r.scenario.kind is ScenarioKind.RELAY_ORDERING:
        for x in xs:
            for arm in r.arms():
                sel = r.select(arm, x)
                n = sum(t.symbols for t in sel)
                k = sum(t.symbol_errors for t in sel)
                rec.rows.append(MetricRow(x, f"ser_{arm}", k / n, proportion_ci(k, n)))
        return rec
    for x in xs:
        for arm in r.arms():
            prefix = "" if arm == "coopgeo" else f"{arm}_"
            values = protocol_metrics(r.select(arm, x), _bits_per_symbol(r, x))
            for name in PROTOCOL_METRICS:
                v, ci = values[name]
                rec.rows.append(MetricRow(x, prefix + name, v, ci))
    return rec


def _num(v: float) -> str:
    return f"{v:.10g}"


def write_csv(rec: MetricsRecord, out: TextIO) -> None:
    """Long-format CSV preceded by a ``#`` header echoing the scenario."""
    out.write("# coopgeo results\n")
    for k, v in rec.scenario.items():
        out.write(f"# {k} = {v}\n")
    out.write(f"# x = {rec.x_name}\n")
    out.write(f"# norm_throughput = delivered bits / ({_num(SYMBOL_RATE)} symbols/us * log2(M) * virtual time)\n")
    out.write("# ci95 = normal-approximation 95% half-width\n")
    out.write(",".join(CSV_COLUMNS) + "\n")
    for row in rec.rows:
        out.write(f"{_num(row.x)},{row.metric},{_num(row.value)},{_num(row.ci95)}\n")
