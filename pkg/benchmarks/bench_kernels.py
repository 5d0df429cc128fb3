"""Compare the compiled and pure-Python branch-and-bound kernels.

    python benchmarks/bench_kernels.py [--repeat N]

Each case is solved by both kernels; results must agree exactly (objective,
argmin and node count), then the median wall time of each is reported.
"""
from __future__ import annotations

import argparse
import statistics
import sys
import time
from pathlib import Path

from sbpc import kernels
from sbpc.blocking import BlockingPolicy
from sbpc.ocp import OcpProblem, search_spec
from sbpc.scenario import parse_scenario

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def cases():
    desk = parse_scenario(SCENARIOS / "desk_integrator.ini")
    train = parse_scenario(SCENARIOS / "train_demo.ini")
    for L in (3, 2, 1):
        s = desk.with_(L=L)
        yield f"integrator k_f=12 L={L} nominal", OcpProblem(
            s.built_model, 0, s.k_f, s.x0, BlockingPolicy(L), s.inputs, s.terminal, cap=10**7)
    for variant in ("nominal", "min_gamma"):
        yield f"train k_f=60 L=5 {variant}", OcpProblem(
            train.built_model, 0, train.k_f, train.x0, train.policy, train.inputs, train.terminal,
            variant=variant, cap=train.cap)


def timed(fn, spec, repeat):
    out, times = None, []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(spec)
        times.append(time.perf_counter() - t0)
    return out, statistics.median(times)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if kernels.compiled_bnb_search is None:
        print("compiled kernel not built; run `pip install -e . --no-build-isolation` first", file=sys.stderr)
        return 1
    print(f"{'case':38s} {'nodes':>9s} {'compiled ms':>12s} {'python ms':>11s} {'speedup':>8s}")
    for name, p in cases():
        spec = search_spec(p)
        fast, t_fast = timed(kernels.compiled_bnb_search, spec, args.repeat)
        slow, t_slow = timed(kernels.python_bnb_search, spec, max(1, args.repeat // 3))
        if fast != slow:
            print(f"{name}: kernels disagree: {fast} vs {slow}", file=sys.stderr)
            return 1
        print(f"{name:38s} {fast[2]:9d} {t_fast * 1e3:12.3f} {t_slow * 1e3:11.1f} {t_slow / t_fast:7.0f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
