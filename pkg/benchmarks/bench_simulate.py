"""Time the Monte-Carlo engine per (realization, scan point) at several grid sizes.

    python benchmarks/bench_simulate.py --bins 4096 16384 --realizations 20
"""
import argparse
import time

import numpy as np

from dctpa.detector import ScanPoint, TransitionSpec, simulate
from dctpa.shaper import Delay
from dctpa.source import PumpSpec, SourceSpec
from dctpa.spectral import make_grid


def bench(n_bins, realizations, points, workers):
    g = make_grid(1.8233e15, 9.88e14, n_bins)
    src = SourceSpec(g, 1.764e14, n=1000.0)
    pump = PumpSpec(2 * g.center_omega, 8 * g.bin_width)
    transition = TransitionSpec(2 * g.center_omega, 16 * g.bin_width, "gaussian")
    scan = [ScanPoint(pump, Delay(t)) for t in np.linspace(-100e-15, 100e-15, points)]
    t0 = time.perf_counter()
    simulate(src, scan, transition, realizations, seed=0, workers=workers)
    return time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--bins", type=int, nargs="+", default=[4096, 16384])
    ap.add_argument("--realizations", type=int, default=20)
    ap.add_argument("--points", type=int, default=16)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    print(f"{'bins':>7} {'seconds':>9} {'ms/(realization*point)':>24}")
    for n in args.bins:
        dt = bench(n, args.realizations, args.points, args.workers)
        print(f"{n:>7} {dt:>9.2f} {1e3 * dt / (args.realizations * args.points):>24.3f}")


if __name__ == "__main__":
    main()
