"""Command-line front end: experiment presets, traces and a quick invariant check."""
from __future__ import annotations

import argparse
import dataclasses
import io
import json
import sys
from pathlib import Path

from . import __version__
from .metrics import compute_metrics, write_csv
from .sim import (
    Scenario,
    ScenarioError,
    ScenarioKind,
    TopologyError,
    gen_random_topology,
    load_scenario,
    nodes_for_degree,
    radio_range_for,
    route_config,
    run_scenario,
    substream,
)
from .routing import route

PRESETS = {
    "fig5": Scenario(
        kind=ScenarioKind.RELAY_ORDERING, snr_db_min=15.0, snr_db_max=30.0, snr_db_step=5.0,
        trials=200, symbols=5000,
    ),
    "per": Scenario(kind=ScenarioKind.PER_VS_DENSITY, neighbors=(2, 5, 10, 15, 20), trials=1000),
    "tmax": Scenario(kind=ScenarioKind.TMAX_SWEEP, neighbors=(10,), tmax_us=(100.0, 300.0, 500.0, 1000.0), trials=1000),
    "throughput": Scenario(kind=ScenarioKind.THROUGHPUT_VS_CONSTELLATION, neighbors=(10,), qam_m=(4, 16, 64), trials=500),
    "route-trace": Scenario(kind=ScenarioKind.CUSTOM, neighbors=(10,), trials=1),
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="coopgeo", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--trials", type=int, help="number of trials (topologies for fig5, packets otherwise)")
    common.add_argument("--out", type=Path, help="output path (default: standard output)")
    common.add_argument("--config", type=Path, help="scenario file with key = value lines")
    common.add_argument("--baseline", action="store_true", help="add the direct-transmission baseline arm")
    common.add_argument("--workers", type=int, default=1, help="worker processes")

    helps = {
        "fig5": "SER of best to worst relay, direct and random relay",
        "per": "PER and related metrics against neighbor count",
        "tmax": "collision probability and PER against T_max",
        "throughput": "saturated throughput against constellation size",
        "route-trace": "frame-level trace of one route as JSON lines",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text)
    v = sub.add_parser("validate", help="run a quick invariant suite")
    v.add_argument("--seed", type=int, default=1)
    v.add_argument("--instances", type=int, default=50)
    return p


def _scenario(args) -> Scenario:
    s = PRESETS[args.command]
    if args.config is not None:
        try:
            s = load_scenario(args.config, s)
        except OSError as exc:
            raise ScenarioError(f"cannot read config: {exc}") from None
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.baseline:
        changes["baseline"] = True
    return dataclasses.replace(s, **changes)


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def _run_experiment(args) -> int:
    s = _scenario(args)
    if s.kind is ScenarioKind.RELAY_ORDERING and s.baseline:
        raise ScenarioError("fig5 already contains a direct-transmission arm; drop --baseline")
    rec = compute_metrics(run_scenario(s, workers=args.workers))
    buf = io.StringIO()
    write_csv(rec, buf)
    _emit(buf.getvalue(), args.out)
    return 0


def _route_trace(args) -> int:
    s = _scenario(args)
    n, snr = s.neighbors[0], s.snr_grid[0]
    r = radio_range_for(s)
    side = 4.0 * r
    topo = gen_random_topology(nodes_for_degree(n, side, r), side, r, substream(s.seed, n, 0), target_neighbors=n)
    cfgs = [("coopgeo", True)] + ([("baseline", False)] if s.baseline else [])
    lines = []
    for arm, coop in cfgs:
        cfg = route_config(s, snr, s.tmax_us[0], s.qam_m[0], coop)
        for i in range(s.trials):
            res = route(0, 1, topo, cfg, substream(s.seed, n, 0, i))
            for ev in res.trace:
                lines.append(json.dumps({"arm": arm, "trial": i, **ev._asdict()}))
            lines.append(json.dumps({
                "arm": arm, "trial": i, "kind": "ROUTE", "delivered": res.delivered,
                "path": res.path, "elapsed": round(res.elapsed, 6), "reason": res.reason,
            }))
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _validate(args) -> int:
    from .validate import run_checks

    ok = True
    for name, passed, detail in run_checks(seed=args.seed, instances=args.instances):
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
    return 0 if ok else 1


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "validate":
            return _validate(args)
        if args.command == "route-trace":
            return _route_trace(args)
        return _run_experiment(args)
    except ScenarioError as exc:
        print(f"coopgeo: error: {exc}", file=sys.stderr)
        return 2
    except TopologyError as exc:
        print(f"coopgeo: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
