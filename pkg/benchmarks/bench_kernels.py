"""Compare the compiled and pure-Python matching kernels.

Usage: python3 benchmarks/bench_kernels.py [--sizes 2000 20000] [--degree 4] [--repeat 3]

Each row times one full run of augmenting rounds (no length limit) from the
empty matching, one alternating-layer sweep and one neighborhood query on a
synthetic expander.  Both backends must produce the same matching.
"""
import argparse
import time

import numpy as np

from equidecomp import kernels
from equidecomp.graph import synthesize_expander


def run_rounds(mod, G):
    me = np.full(G.n_left, -1, dtype=np.int64)
    mr = np.full(G.n_right, -1, dtype=np.int32)
    while True:
        L, n, *_ = mod.augment_round(G.indptr, G.adj_right, me, mr, 10**9)
        if L < 0 or n == 0:
            return me, mr


def best_of(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[2000, 20000])
    ap.add_argument("--degree", type=int, default=4)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    mods = kernels.backends()
    if "cython" not in mods:
        print("compiled kernels not built; timing the python backend only")
    print(f"{'n':>8} {'kernel':>18} " + " ".join(f"{name:>10}" for name in mods) + "   speedup")
    for n in args.sizes:
        G = synthesize_expander(n, args.degree, args.seed)
        sel = (np.random.default_rng(args.seed).random(G.n_left) < 0.1).astype(np.uint8)
        rows = {"augment_round": {}, "alternating_layers": {}, "neighbors": {}}
        matchings = {}
        for name, mod in mods.items():
            t, (me, mr) = best_of(lambda: run_rounds(mod, G), args.repeat)
            rows["augment_round"][name] = t
            matchings[name] = me
            half = me.copy()
            half[::2] = -1
            half_r = np.full(G.n_right, -1, dtype=np.int32)
            ok = half >= 0
            half_r[G.adj_right[half[ok]]] = np.flatnonzero(ok)
            rows["alternating_layers"][name], _ = best_of(
                lambda: mod.alternating_layers(G.indptr, G.adj_right, G.rev_indptr, G.rev_adj,
                                               half, half_r, 0, 10**9), args.repeat)
            rows["neighbors"][name], _ = best_of(
                lambda: mod.neighbors(G.indptr, G.adj_right, sel, G.n_right), args.repeat)
        if len(matchings) == 2:
            assert np.array_equal(matchings["python"], matchings["cython"]), "backends disagree"
        for kernel, t in rows.items():
            speed = f"{t['python'] / t['cython']:8.1f}x" if "cython" in t and t["cython"] > 0 else ""
            print(f"{n:>8} {kernel:>18} " + " ".join(f"{t[name]:>9.4f}s" for name in mods) + f"   {speed}")


if __name__ == "__main__":
    main()
