"""Time the numba and numpy paths of the warp kernels.

    python benchmarks/bench_kernels.py [--repeat 20] [--sizes 64 128 256]

Each size is a square canvas whose pixels all splat into an atlas of the
same side length with 8 parts (roughly what a warp touches). The first
numba call is a compile and is excluded.
"""

import argparse
import time

import numpy as np

from posetransfer import kernels


def _problem(side, n_parts=8, channels=3, seed=0):
    rng = np.random.default_rng(seed)
    p = side * side
    part = rng.integers(0, n_parts, p)
    rows, cols, w = kernels.bilinear_taps(rng.uniform(0, side - 1, p), rng.uniform(0, side - 1, p), side)
    idx = (part[:, None] * side + rows) * side + cols
    return n_parts * side * side, idx, w, rng.standard_normal((p, channels))


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def run(sizes=(64, 128, 256), repeat=20):
    backends = ["numpy"] + (["numba"] if kernels.HAS_NUMBA else [])
    rows = []
    for side in sizes:
        m, idx, w, src = _problem(side)
        table = kernels.scatter_weighted(m, idx, w, src, backend="numpy")
        ref_s, ref_g = table, kernels.gather_weighted(table, idx, w, backend="numpy")
        for b in backends:
            s = kernels.scatter_weighted(m, idx, w, src, backend=b)  # warm-up / compile
            g = kernels.gather_weighted(table, idx, w, backend=b)
            diff = max(np.abs(s - ref_s).max(), np.abs(g - ref_g).max())
            ts = _best(lambda: kernels.scatter_weighted(m, idx, w, src, backend=b), repeat)
            tg = _best(lambda: kernels.gather_weighted(table, idx, w, backend=b), repeat)
            rows.append((side, b, ts * 1e3, tg * 1e3, diff))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256])
    args = ap.parse_args()
    print(f"{'side':>5} {'backend':>8} {'scatter ms':>11} {'gather ms':>10} {'max |diff|':>11}")
    for side, b, ts, tg, d in run(args.sizes, args.repeat):
        print(f"{side:>5} {b:>8} {ts:>11.3f} {tg:>10.3f} {d:>11.2e}")


if __name__ == "__main__":
    main()
