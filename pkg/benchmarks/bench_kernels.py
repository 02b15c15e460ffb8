"""Time the numba and numpy variants of every hot kernel on representative inputs.

Run from the repository root::

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Each kernel is warmed up once (so numba compilation is excluded) and then
timed ``--repeat`` times; the best wall time per backend is reported along
with the speed-up of numba over numpy.
"""
from __future__ import annotations

import argparse
import json
import time

import numpy as np

from recrank import kernels
from recrank.selection import _grow_forest


def _csr(rng, n, m, per_row):
    counts = rng.integers(0, per_row + 1, size=n)
    indptr = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
    indices = np.concatenate([np.sort(rng.choice(m, size=c, replace=False)) for c in counts])
    return indptr, indices.astype(np.int64)


def cases(rng: np.random.Generator) -> dict[str, tuple]:
    """Input tuples sized like one desk-scale benchmark cell."""
    n_users, n_items, k = 2000, 500, 20
    scores = rng.random((n_users, n_items))
    seen_indptr, seen_indices = _csr(rng, n_users, n_items, 40)
    allowed = np.ones(n_items, dtype=bool)
    recs = kernels.topk_unseen_numpy(scores, seen_indptr, seen_indices, allowed, k)
    truth_indptr, truth_indices = _csr(rng, n_users, n_items, 8)
    hits = kernels.hit_matrix_numpy(recs, truth_indptr, truth_indices)
    n_rel = np.maximum(np.diff(truth_indptr), 1)
    sim = rng.random((n_items, n_items))
    q = rng.random((30, 11))
    z = np.concatenate(([0.0], rng.normal(size=30)))
    weights = rng.dirichlet(np.ones(31), size=10_000)
    doubled = 2 * np.arange(1, 26, dtype=np.int64)
    x = rng.normal(size=(30, 18))
    centers = rng.normal(size=(6, 18))
    forest = _grow_forest(x, 100, 256, rng)
    return {
        "topk_unseen": (scores, seen_indptr, seen_indices, allowed, k),
        "hit_matrix": (recs, truth_indptr, truth_indices),
        "user_metric_table": (hits, n_rel, k),
        "intra_list_similarity": (recs, sim),
        "pairwise_wins": (q,),
        "signrank_theta": (weights, z, 0.0),
        "signrank_null_counts": (doubled,),
        "sq_distances": (x, centers),
        "iforest_path_lengths": (x, *forest[:6]),
    }


def best_time(fn, args, repeat: int) -> float:
    fn(*args)  # warm-up / compilation
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - start)
    return min(times)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--json", help="also write the results to this file")
    args = parser.parse_args(argv)

    rows = []
    for name, inputs in cases(np.random.default_rng(args.seed)).items():
        t_numba = best_time(getattr(kernels, f"{name}_numba"), inputs, args.repeat)
        t_numpy = best_time(getattr(kernels, f"{name}_numpy"), inputs, args.repeat)
        rows.append({"kernel": name, "numba_s": t_numba, "numpy_s": t_numpy,
                     "speedup": t_numpy / t_numba if t_numba > 0 else float("inf")})

    print(f"active backend: {kernels.BACKEND}")
    print(f"{'kernel':<24}{'numba [ms]':>12}{'numpy [ms]':>12}{'speed-up':>10}")
    for r in rows:
        print(f"{r['kernel']:<24}{1e3 * r['numba_s']:>12.3f}{1e3 * r['numpy_s']:>12.3f}"
              f"{r['speedup']:>9.1f}x")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump({"backend": kernels.BACKEND, "results": rows}, fh, indent=2)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
