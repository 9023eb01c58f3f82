"""Time the compiled kernels against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat 20] [--sizes 40,120,300]

Inputs are G-IDNC graphs built from random Wants matrices, the shape the
solvers see in every slot. Both backends must return identical results; the
script checks that before timing.
"""
import argparse
import timeit

import numpy as np

from idncsim import _kernels_py

try:
    from idncsim import _kernels as _compiled
except ImportError:
    _compiled = None


def make_inputs(n_vertices, seed=0):
    rng = np.random.default_rng(seed)
    m = max(2, int(np.sqrt(n_vertices)))
    n = max(2, n_vertices // m * 2)
    wants = (rng.random((m, n)) < 0.5).astype(np.uint8)
    u, p = np.nonzero(wants)
    u, p = u.astype(np.int64), p.astype(np.int64)
    wstar = rng.random(len(u))
    cand = np.ones(len(u), dtype=np.uint8)
    X = (rng.random((n, n)) < 0.2).astype(np.uint8)
    S = rng.random((m, n))
    shift = rng.integers(0, 3, m).astype(float) * m
    return wants, u, p, wstar, cand, X, S, shift


def cases(mod, inputs):
    wants, u, p, wstar, cand, X, S, shift = inputs
    adj = _kernels_py.gidnc_adjacency(u, p, wants)
    return {
        "gidnc_adjacency": lambda: mod.gidnc_adjacency(u, p, wants),
        "greedy_clique": lambda: mod.greedy_clique(adj, wstar, cand),
        "bpso_scores": lambda: mod.bpso_scores(X, wants, wants, S, shift),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--sizes", default="40,120,300")
    args = ap.parse_args(argv)
    if _compiled is None:
        print("compiled extension not built; only the numpy backend is available")
    print(f"{'kernel':<16} {'vertices':>8} {'python ms':>10} {'cython ms':>10} {'speedup':>8}")
    for size in (int(s) for s in args.sizes.split(",")):
        inputs = make_inputs(size)
        py = cases(_kernels_py, inputs)
        cy = cases(_compiled, inputs) if _compiled is not None else {}
        for name, fn in py.items():
            t_py = min(timeit.repeat(fn, number=1, repeat=args.repeat)) * 1e3
            if name in cy:
                a, b = fn(), cy[name]()
                assert np.array_equal(np.asarray(a), np.asarray(b)), name
                t_cy = min(timeit.repeat(cy[name], number=1, repeat=args.repeat)) * 1e3
                print(f"{name:<16} {len(inputs[1]):>8} {t_py:>10.3f} {t_cy:>10.3f} "
                      f"{t_py / t_cy:>7.1f}x")
            else:
                print(f"{name:<16} {len(inputs[1]):>8} {t_py:>10.3f} {'-':>10} {'-':>8}")


if __name__ == "__main__":
    main()
