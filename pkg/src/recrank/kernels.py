"""Hot numeric kernels with two interchangeable backends.

Each kernel exists as an explicit-loop version compiled with numba and a
vectorised pure-numpy version. The public names are bound at import time:
the numba path is used unless ``RECRANK_DISABLE_NUMBA`` is set to a truthy
value (or numba cannot be imported). Both variants stay importable as
``<name>_numba`` / ``<name>_numpy`` so tests and ``benchmarks/`` can compare
them directly.

Integer inputs are int64 and real inputs float64 throughout; callers are
expected to pass contiguous arrays of those dtypes.
"""
from __future__ import annotations

import os

import numpy as np

_FLAG = os.environ.get("RECRANK_DISABLE_NUMBA", "").strip().lower()

try:  # pragma: no cover - exercised implicitly by the import
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


USE_NUMBA = _HAVE_NUMBA and _FLAG not in ("1", "true", "yes", "on")
BACKEND = "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# top-k selection over unseen items
# ---------------------------------------------------------------------------

@njit(cache=True)
def topk_unseen_numba(scores, seen_indptr, seen_indices, allowed, k):
    n, m = scores.shape
    out = np.full((n, k), -1, np.int64)
    mask = np.empty(m, np.bool_)
    best_s = np.empty(k, np.float64)
    best_i = np.empty(k, np.int64)
    for u in range(n):
        for j in range(m):
            mask[j] = allowed[j]
        for p in range(seen_indptr[u], seen_indptr[u + 1]):
            mask[seen_indices[p]] = False
        cnt = 0
        for j in range(m):
            if not mask[j]:
                continue
            s = scores[u, j]
            if cnt < k:
                pos = cnt
                cnt += 1
            elif s > best_s[k - 1]:
                pos = k - 1
            else:
                continue
            # shift strictly-worse entries down; equal scores keep the lower index first
            while pos > 0 and best_s[pos - 1] < s:
                best_s[pos] = best_s[pos - 1]
                best_i[pos] = best_i[pos - 1]
                pos -= 1
            best_s[pos] = s
            best_i[pos] = j
        for r in range(cnt):
            out[u, r] = best_i[r]
    return out


def topk_unseen_numpy(scores, seen_indptr, seen_indices, allowed, k):
    n, m = scores.shape
    masked = np.where(allowed[None, :], scores, -np.inf)
    rows = np.repeat(np.arange(n), np.diff(seen_indptr))
    masked[rows, seen_indices] = -np.inf
    order = np.argsort(-masked, axis=1, kind="stable")[:, :k]
    valid = np.take_along_axis(masked, order, axis=1) > -np.inf
    out = np.full((n, k), -1, np.int64)
    out[:, : order.shape[1]] = np.where(valid, order, -1)
    return out


# ---------------------------------------------------------------------------
# hit matrix and per-user accuracy metrics
# ---------------------------------------------------------------------------

@njit(cache=True)
def hit_matrix_numba(recs, truth_indptr, truth_indices):
    n, k = recs.shape
    hits = np.zeros((n, k), np.bool_)
    for u in range(n):
        lo = truth_indptr[u]
        hi = truth_indptr[u + 1]
        row = truth_indices[lo:hi]
        for r in range(k):
            item = recs[u, r]
            if item < 0:
                continue
            pos = np.searchsorted(row, item)
            if pos < hi - lo and row[pos] == item:
                hits[u, r] = True
    return hits


def hit_matrix_numpy(recs, truth_indptr, truth_indices):
    n, k = recs.shape
    width = max(int(recs.max(initial=0)), int(truth_indices.max(initial=0))) + 1
    owners = np.repeat(np.arange(n, dtype=np.int64), np.diff(truth_indptr))
    truth_keys = owners * width + truth_indices
    rec_keys = np.arange(n, dtype=np.int64)[:, None] * width + recs
    return np.isin(rec_keys, truth_keys) & (recs >= 0)


@njit(cache=True)
def user_metric_table_numba(hits, n_rel, k):
    """Columns: precision, recall, average precision, ndcg, mrr, hitrate."""
    n = hits.shape[0]
    width = min(k, hits.shape[1])
    out = np.zeros((n, 6), np.float64)
    for u in range(n):
        km = min(k, n_rel[u])
        found = 0
        ap = 0.0
        dcg = 0.0
        first = 0
        for r in range(width):
            if hits[u, r]:
                found += 1
                ap += found / (r + 1.0)
                dcg += 1.0 / np.log2(r + 2.0)
                if first == 0:
                    first = r + 1
        idcg = 0.0
        for r in range(km):
            idcg += 1.0 / np.log2(r + 2.0)
        out[u, 0] = found / km
        out[u, 1] = found / n_rel[u]
        out[u, 2] = ap / km
        out[u, 3] = dcg / idcg
        out[u, 4] = 1.0 / first if first > 0 else 0.0
        out[u, 5] = 1.0 if found > 0 else 0.0
    return out


def user_metric_table_numpy(hits, n_rel, k):
    hits = hits[:, :k].astype(np.float64)
    n, width = hits.shape
    km = np.minimum(k, n_rel).astype(np.float64)
    ranks = np.arange(1, width + 1, dtype=np.float64)
    found = hits.sum(axis=1)
    prefix = np.cumsum(hits, axis=1)
    discount = 1.0 / np.log2(ranks + 1.0)
    ideal = np.concatenate(([0.0], np.cumsum(1.0 / np.log2(np.arange(1, k + 1) + 1.0))))
    first = np.where(found > 0, np.argmax(hits > 0, axis=1) + 1, 0)
    out = np.empty((n, 6), np.float64)
    out[:, 0] = found / km
    out[:, 1] = found / n_rel
    out[:, 2] = (hits * prefix / ranks).sum(axis=1) / km
    out[:, 3] = (hits * discount).sum(axis=1) / ideal[km.astype(np.int64)]
    out[:, 4] = np.where(first > 0, 1.0 / np.maximum(first, 1), 0.0)
    out[:, 5] = (found > 0).astype(np.float64)
    return out


@njit(cache=True)
def intra_list_similarity_numba(local_recs, sim):
    """Mean pairwise similarity per list; NaN for lists shorter than two."""
    n, k = local_recs.shape
    out = np.full(n, np.nan)
    for u in range(n):
        length = 0
        for r in range(k):
            if local_recs[u, r] >= 0:
                length += 1
        if length < 2:
            continue
        total = 0.0
        for a in range(length):
            for b in range(a + 1, length):
                total += sim[local_recs[u, a], local_recs[u, b]]
        out[u] = total / (length * (length - 1) / 2.0)
    return out


def intra_list_similarity_numpy(local_recs, sim):
    n, k = local_recs.shape
    valid = local_recs >= 0
    length = valid.sum(axis=1)
    safe = np.where(valid, local_recs, 0)
    pair = sim[safe[:, :, None], safe[:, None, :]]
    upper = np.triu(np.ones((k, k), dtype=bool), 1)
    keep = valid[:, :, None] & valid[:, None, :] & upper[None]
    total = np.where(keep, pair, 0.0).sum(axis=(1, 2))
    npairs = length * (length - 1) / 2.0
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(length >= 2, total / np.where(npairs > 0, npairs, 1.0), np.nan)


# ---------------------------------------------------------------------------
# aggregation and statistics
# ---------------------------------------------------------------------------

@njit(cache=True)
def pairwise_wins_numba(q):
    """``wins[a, b]`` = number of rows where column a is strictly above column b."""
    d, m = q.shape
    wins = np.zeros((m, m), np.int64)
    for t in range(d):
        for a in range(m):
            for b in range(m):
                if q[t, a] > q[t, b]:
                    wins[a, b] += 1
    return wins


def pairwise_wins_numpy(q):
    return (q[:, :, None] > q[:, None, :]).sum(axis=0).astype(np.int64)


@njit(cache=True)
def signrank_theta_numba(weights, z, rope):
    """Weighted pair mass below -rope, inside, and above +rope for each draw.

    With ``z`` sorted, ``z[i] + z[j]`` is non-decreasing in ``j``, so the
    pairs of each ``i`` split into three contiguous runs whose boundaries do
    not depend on the draw; each draw then costs O(n) via prefix sums.
    """
    draws, n = weights.shape
    order = np.argsort(z)
    zs = z[order]
    lo = np.zeros(n, np.int64)   # j < lo[i]  ->  pair below -rope
    hi = np.zeros(n, np.int64)   # j >= hi[i] ->  pair above +rope
    for i in range(n):
        c = 0
        while c < n and zs[i] + zs[c] < -2.0 * rope:
            c += 1
        lo[i] = c
        c = n
        while c > 0 and zs[i] + zs[c - 1] > 2.0 * rope:
            c -= 1
        hi[i] = c
    out = np.zeros((draws, 3), np.float64)
    prefix = np.zeros(n + 1, np.float64)
    for s in range(draws):
        for j in range(n):
            prefix[j + 1] = prefix[j] + weights[s, order[j]]
        left = 0.0
        mid = 0.0
        right = 0.0
        for i in range(n):
            wi = weights[s, order[i]]
            left += wi * prefix[lo[i]]
            mid += wi * (prefix[hi[i]] - prefix[lo[i]])
            right += wi * (prefix[n] - prefix[hi[i]])
        out[s, 0] = left
        out[s, 1] = mid
        out[s, 2] = right
    return out


def signrank_theta_numpy(weights, z, rope):
    pair = z[:, None] + z[None, :]
    left = (pair < -2.0 * rope).astype(np.float64)
    right = (pair > 2.0 * rope).astype(np.float64)
    mid = 1.0 - left - right
    out = np.empty((weights.shape[0], 3), np.float64)
    for col, mat in enumerate((left, mid, right)):
        out[:, col] = ((weights @ mat) * weights).sum(axis=1)
    return out


@njit(cache=True)
def signrank_null_counts_numba(doubled_ranks):
    """Number of sign patterns reaching each positive-rank sum (ranks doubled to integers)."""
    total = 0
    for r in doubled_ranks:
        total += r
    counts = np.zeros(total + 1, np.int64)
    counts[0] = 1
    reach = 0
    for r in doubled_ranks:
        for w in range(reach, -1, -1):
            if counts[w]:
                counts[w + r] += counts[w]
        reach += r
    return counts


def signrank_null_counts_numpy(doubled_ranks):
    total = int(np.sum(doubled_ranks))
    counts = np.zeros(total + 1, np.int64)
    counts[0] = 1
    for r in doubled_ranks:
        r = int(r)
        shifted = counts[: total + 1 - r].copy()
        counts[r:] += shifted
    return counts


# ---------------------------------------------------------------------------
# selection: distances and isolation-forest traversal
# ---------------------------------------------------------------------------

@njit(cache=True)
def sq_distances_numba(x, c):
    n, p = x.shape
    k = c.shape[0]
    out = np.empty((n, k), np.float64)
    for i in range(n):
        for j in range(k):
            acc = 0.0
            for f in range(p):
                diff = x[i, f] - c[j, f]
                acc += diff * diff
            out[i, j] = acc
    return out


def sq_distances_numpy(x, c):
    diff = x[:, None, :] - c[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


@njit(cache=True)
def iforest_path_lengths_numba(x, feature, threshold, left, right, leaf_adjust, roots):
    """Mean adjusted path length of every row over all trees.

    Nodes of all trees live in flat arrays; ``left[node] < 0`` marks a leaf
    whose unresolved subtree size is accounted for by ``leaf_adjust``.
    """
    n = x.shape[0]
    out = np.zeros(n, np.float64)
    for i in range(n):
        acc = 0.0
        for t in range(roots.shape[0]):
            node = roots[t]
            depth = 0.0
            while left[node] >= 0:
                if x[i, feature[node]] < threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
                depth += 1.0
            acc += depth + leaf_adjust[node]
        out[i] = acc / roots.shape[0]
    return out


def iforest_path_lengths_numpy(x, feature, threshold, left, right, leaf_adjust, roots):
    n = x.shape[0]
    rows = np.arange(n)
    acc = np.zeros(n, np.float64)
    for root in roots:
        node = np.full(n, root, np.int64)
        depth = np.zeros(n, np.float64)
        inner = left[node] >= 0
        while inner.any():
            idx = rows[inner]
            cur = node[idx]
            go_left = x[idx, feature[cur]] < threshold[cur]
            node[idx] = np.where(go_left, left[cur], right[cur])
            depth[idx] += 1.0
            inner = left[node] >= 0
        acc += depth + leaf_adjust[node]
    return acc / len(roots)


_NAMES = (
    "topk_unseen",
    "hit_matrix",
    "user_metric_table",
    "intra_list_similarity",
    "pairwise_wins",
    "signrank_theta",
    "signrank_null_counts",
    "sq_distances",
    "iforest_path_lengths",
)

for _name in _NAMES:
    globals()[_name] = globals()[f"{_name}_{BACKEND}"]

__all__ = ["BACKEND", "USE_NUMBA", *_NAMES]
