"""Benchmark the coupled-play sampler: numba kernel vs pure-numpy fallback.

Usage: python benchmarks/bench_coupling.py [--samples N] [--horizon H] [--repeats R]
"""

import argparse
import time

import numpy as np

from epmgames import ActionSet, TruncatedGame, build_monitoring, coupled_sample_batch
from epmgames.strategy import BehavioralStrategy


def make_case(horizon: int, seed: int):
    actions = ActionSet(("a", "b"))
    m = build_monitoring("blackwell", actions, horizon)
    rng = np.random.default_rng(seed)
    game = TruncatedGame(m, rng.random(2**horizon) < 0.5)
    profiles = [BehavioralStrategy.random_rational(owner, m, rng)
                for owner in (1, 2, 1, 2)]
    return game, profiles


def run(backend: str, game, profiles, samples: int, repeats: int) -> tuple[float, float]:
    x, y, x2, y2 = profiles
    # warm up (JIT compilation for numba, allocation for numpy)
    coupled_sample_batch(game, x, y, x2, y2, 1000, seed=0, backend=backend)
    best = float("inf")
    rate = 0.0
    for r in range(repeats):
        t0 = time.perf_counter()
        batch = coupled_sample_batch(game, x, y, x2, y2, samples, seed=r, backend=backend)
        best = min(best, time.perf_counter() - t0)
        rate = batch.divergence_rate()
    return best, rate


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--samples", type=int, default=500_000)
    parser.add_argument("--horizon", type=int, default=6)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    game, profiles = make_case(args.horizon, seed=1)
    print(f"coupled sampler, horizon={args.horizon}, samples={args.samples}")
    results = {}
    for backend in ("numba", "numpy"):
        try:
            secs, rate = run(backend, game, profiles, args.samples, args.repeats)
        except RuntimeError as e:
            print(f"  {backend:>6}: unavailable ({e})")
            continue
        results[backend] = secs
        print(f"  {backend:>6}: {secs:.3f}s best of {args.repeats} "
              f"({args.samples / secs / 1e6:.2f} M samples/s, divergence {rate:.4f})")
    if len(results) == 2:
        print(f"  speedup numba/numpy: {results['numpy'] / results['numba']:.1f}x")


if __name__ == "__main__":
    main()
