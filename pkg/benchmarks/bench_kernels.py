#!/usr/bin/env python3
"""Backend benchmarks: compiled kernels vs the pure-python fallback.

Times the three hot kernels on identical inputs in process, then replays a
synthetic day end to end under each backend in a subprocess (backend
selection happens at import time, so the end-to-end pass cannot swap
backends in process). Parity of outputs is covered by the test suite; this
script only measures.

    python benchmarks/bench_kernels.py
    python benchmarks/bench_kernels.py --snapshots 864000 --calls 200000
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from lobexec import MarketSpec, SyntheticFeedParams, generate_synthetic
from lobexec._kernels import _pure

try:
    from lobexec._kernels import _core
except ImportError:
    _core = None


def bench_market_walk(impl, book, volumes, levels):
    t0 = time.perf_counter()
    for i, volume in enumerate(volumes):
        impl.market_walk(book[i % len(book)], bool(i & 1), int(volume), levels)
    return time.perf_counter() - t0


def bench_limit_cross(impl, book, volumes, levels):
    t0 = time.perf_counter()
    for i, volume in enumerate(volumes):
        row = book[i % len(book)]
        if i & 1:
            price = int(row[2 * levels]) + 2
        else:
            price = int(row[0]) - 2
        impl.limit_cross(row, bool(i & 1), price, int(volume), levels)
    return time.perf_counter() - t0


def bench_limit_window(impl, timestamps, book, tick, levels):
    last = len(timestamps) - 1
    calls = 0
    cursor = 0
    t0 = time.perf_counter()
    while cursor < last:
        _, cursor, _, truncated = impl.limit_window(
            timestamps, book, cursor, last, int(timestamps[cursor]) + 3000,
            True, 10_000_000, tick, levels,
        )
        calls += 1
        if truncated:
            break
    return time.perf_counter() - t0, calls


_E2E_CODE = """
import time
from lobexec import (Broker, MarketSpec, ScheduleParams, Side,
                     SyntheticFeedParams, build_twap_schedule, generate_synthetic)
from lobexec._kernels import BACKEND

spec = MarketSpec(tick_size="0.1", lot_size="0.001")
feed = generate_synthetic(SyntheticFeedParams(seed={seed}, n_snapshots={n}), spec)
n_buckets = max(1, {n} // 18_000)
params = ScheduleParams(
    start_time=0,
    exec_time_ms=feed.end_timestamp - 200,
    n_buckets=n_buckets,
    no_of_slices=10,
)
algo = build_twap_schedule(params, str(10 * n_buckets), Side.BUY, spec, 0)
broker = Broker(feed)
t0 = time.monotonic()
broker.reset(0, [algo])
broker.simulate_until(feed.end_timestamp + 1)
elapsed = time.monotonic() - t0
state = broker.algo("twap")
assert state.executed_units == state.total_volume_units, "replay incomplete"
print(f"{{BACKEND}} {{elapsed:.4f}}")
"""


def bench_end_to_end(n, seed, pure):
    env = dict(os.environ)
    env["LOBEXEC_PURE"] = "1" if pure else "0"
    out = subprocess.run(
        [sys.executable, "-c", _E2E_CODE.format(seed=seed, n=n)],
        capture_output=True,
        text=True,
        env=env,
        check=True,
    )
    backend, elapsed = out.stdout.split()
    return backend, float(elapsed)


def _row(name, calls, pure_s, compiled_s):
    pure_us = pure_s / calls * 1e6
    if compiled_s is None:
        print(f"  {name:<14} pure {pure_s:7.3f}s ({pure_us:8.2f} us/call)")
        return
    comp_us = compiled_s / calls * 1e6
    speedup = pure_s / compiled_s if compiled_s > 0 else float("inf")
    print(
        f"  {name:<14} pure {pure_s:7.3f}s ({pure_us:8.2f} us/call)   "
        f"compiled {compiled_s:7.3f}s ({comp_us:8.2f} us/call)   {speedup:5.1f}x"
    )


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--calls", type=int, default=50_000,
                        help="row-kernel invocations")
    parser.add_argument("--snapshots", type=int, default=200_000,
                        help="feed length for the window and end-to-end passes")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--skip-e2e", action="store_true")
    args = parser.parse_args(argv)

    spec = MarketSpec(tick_size="0.1", lot_size="0.001")
    levels = spec.levels_per_side
    feed = generate_synthetic(
        SyntheticFeedParams(seed=args.seed, n_snapshots=args.snapshots), spec
    )
    book = feed.book
    timestamps = feed.timestamps
    rng = np.random.Generator(np.random.PCG64(args.seed))
    volumes = rng.integers(1, 20_000, size=args.calls)

    if _core is None:
        print("compiled extension not importable; timing the fallback only")
    backends = [("pure", _pure)] + ([("compiled", _core)] if _core else [])

    print(f"row kernels, {args.calls} calls over {len(book)} distinct snapshots")
    results = {}
    for name, impl in backends:
        results[name, "market_walk"] = bench_market_walk(impl, book, volumes, levels)
        results[name, "limit_cross"] = bench_limit_cross(impl, book, volumes, levels)
    _row("market_walk", args.calls,
         results["pure", "market_walk"], results.get(("compiled", "market_walk")))
    _row("limit_cross", args.calls,
         results["pure", "limit_cross"], results.get(("compiled", "limit_cross")))

    window = {}
    for name, impl in backends:
        window[name] = bench_limit_window(impl, timestamps, book, spec.tick_units, levels)
    calls = window["pure"][1]
    print(f"window kernel, {calls} windows covering {args.snapshots} snapshots")
    _row("limit_window", calls,
         window["pure"][0], window["compiled"][0] if "compiled" in window else None)

    if not args.skip_e2e:
        print(f"end-to-end day replay, {args.snapshots} snapshots, 10-slice buckets")
        for pure in (True, False) if _core else (True,):
            backend, elapsed = bench_end_to_end(args.snapshots, args.seed, pure)
            print(f"  {backend:<8} {elapsed:.4f}s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
