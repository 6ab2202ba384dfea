#!/usr/bin/env python3
"""Compare the numba and numpy backends on the hot kernels.

    python3 benchmarks/bench_kernels.py [--n 2000] [--repeat 5]
"""

import argparse
import time

import numpy as np

from winplan import _accel, config
from winplan.comparison import count_pairs
from winplan.forss import run_batch
from winplan.kernels import harrell_counts, kendall_counts
from winplan.sampler import sample_scenario_arm


def best_of(fn, repeat):
    fn()  # warm-up, includes JIT compilation on the numba path
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(n):
    gen = np.random.default_rng(1)
    s3 = config.load_scenario(config.preset_path("s3"))
    hf = config.load_scenario(config.preset_path("heartfid"))
    arms = {}
    for name, sc in (("S3 pairs", s3), ("HEART-FID pairs", hf)):
        t = sample_scenario_arm(sc, n, np.random.Philox(1), "treatment", "HA")
        c = sample_scenario_arm(sc, n, np.random.Philox(2), "control", "HA")
        arms[name] = (sc, t, c)

    out = []
    for name, (sc, t, c) in arms.items():
        out.append((f"{name} n={n}", lambda sc=sc, t=t, c=c: count_pairs(t, c, sc)))
    x = gen.normal(size=20 * n)
    y = np.round(x + gen.normal(size=x.size), 1)
    out.append((f"Kendall counts n={x.size}", lambda: kendall_counts(x, y)))
    time_ = gen.exponential(size=n)
    event = gen.random(n) < 0.7
    yc = gen.exponential(size=n)
    ye = gen.random(n) < 0.7
    out.append((f"Harrell censored pair n={n}", lambda: harrell_counts(time_, event, yc, ye)))
    out.append((f"Harrell uncensored y n={20 * n}",
                lambda: harrell_counts(np.repeat(time_, 20), np.repeat(event, 20), y)))
    out.append((f"FORSS batch S3 n_sp={n}", lambda: run_batch(s3.with_estimator(n_sp=n), 0)))
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    print(f"{'kernel':34s} {'numba ms':>10s} {'numpy ms':>10s} {'speed-up':>9s}")
    for name, fn in cases(args.n):
        timings = {}
        for backend in ("numba", "numpy"):
            _accel.set_backend(backend)
            timings[backend] = best_of(fn, args.repeat)
        speed = timings["numpy"] / timings["numba"]
        print(f"{name:34s} {1e3 * timings['numba']:10.2f} {1e3 * timings['numpy']:10.2f} {speed:8.1f}x")


if __name__ == "__main__":
    main()
