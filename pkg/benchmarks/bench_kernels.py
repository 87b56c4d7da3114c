"""Compare the compiled and numpy symbol-error kernels.

Usage: python3 benchmarks/bench_kernels.py [--size N] [--repeat R] [--no-cli]

The first table times each kernel on the same inputs. The second runs CLI
presets once per backend (``COOPGEO_PURE_PYTHON`` selects the fallback) and
checks that both produce byte-identical CSV.
"""
import argparse
import hashlib
import os
import subprocess
import sys
import time
import timeit

import numpy as np

from coopgeo import _pykernels

try:
    from coopgeo import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def _inputs(size: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    g = rng.exponential(300.0, (3, size))
    u = rng.random(size)
    return g, u


def _cases(g, u):
    return {
        "qam_ser": lambda k: k.qam_ser(g[0], 4),
        "count_errors": lambda k: k.count_errors(g[0], u, 4),
        "count_coop_errors": lambda k: k.count_coop_errors(g[0], g[1], g[2], u, 0.909, 4),
        "first_error": lambda k: k.first_error(g[0], u, 16),
    }


CLI_CASES = (
    ["fig5", "--trials", "200"],
    ["per", "--trials", "100", "--baseline"],
)


def _run_cli(args, pure: bool) -> tuple[float, str]:
    env = dict(os.environ, COOPGEO_PURE_PYTHON="1" if pure else "")
    t0 = time.perf_counter()
    out = subprocess.run([sys.executable, "-m", "coopgeo", *args, "--seed", "1"],
                         env=env, capture_output=True, check=True).stdout
    return time.perf_counter() - t0, hashlib.sha256(out).hexdigest()


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--size", type=int, default=1_000_000, help="symbols per call")
    p.add_argument("--repeat", type=int, default=5, help="timed repetitions, best is reported")
    p.add_argument("--no-cli", action="store_true", help="skip the end-to-end CLI timings")
    args = p.parse_args(argv)

    if _ckernels is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation` first")
        return 1
    g, u = _inputs(args.size)
    print(f"{'kernel':<20}{'python ms':>12}{'cython ms':>12}{'speedup':>10}  parity")
    for name, call in _cases(g, u).items():
        ref, fast = call(_pykernels), call(_ckernels)
        same = np.allclose(ref, fast, rtol=1e-12, atol=1e-300) if isinstance(ref, np.ndarray) else ref == fast
        t_py = min(timeit.repeat(lambda: call(_pykernels), number=1, repeat=args.repeat)) * 1e3
        t_c = min(timeit.repeat(lambda: call(_ckernels), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<20}{t_py:>12.2f}{t_c:>12.2f}{t_py / t_c:>9.1f}x  {'ok' if same else 'MISMATCH'}")
    if args.no_cli:
        return 0
    print()
    print(f"{'command':<28}{'python s':>10}{'cython s':>10}{'speedup':>10}  same csv")
    for case in CLI_CASES:
        t_py, h_py = _run_cli(case, pure=True)
        t_c, h_c = _run_cli(case, pure=False)
        print(f"{' '.join(case):<28}{t_py:>10.2f}{t_c:>10.2f}{t_py / t_c:>9.1f}x  {'yes' if h_py == h_c else 'NO'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
