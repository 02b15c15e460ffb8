"""Synthetic interaction logs with planted item-cluster structure.

Items fall into clusters; every user prefers one primary and one secondary
cluster and draws most interactions from them, with popularity skew inside
each cluster and a small share of popularity-driven noise. Timestamps are
uniform over the observation window, so preferences are stationary and a
global temporal split keeps the signal in every split.
"""
from __future__ import annotations

import numpy as np

from ._seeding import derive_rng
from .aggregation import MetricMatrix
from .corpus import InteractionSet, from_records
from .selection import FeatureTable


def planted_interactions(n_users: int = 2000, n_items: int = 500, n_clusters: int = 10,
                         mean_activity: float = 25.0, primary_share: float = 0.7,
                         secondary_share: float = 0.2, zipf: float = 0.8,
                         seed: int = 0, name: str = "synthetic") -> InteractionSet:
    """Generate a rated log (weights on a 1-5 scale) with planted structure.

    In-cluster interactions are mostly rated 4-5; noise interactions are
    rated uniformly, so rating binarization removes part of the noise.
    """
    if n_clusters < 1 or n_items < n_clusters:
        raise ValueError("need 1 <= n_clusters <= n_items")
    rng = derive_rng(seed, "synthetic", name)
    cluster_of = rng.permutation(np.arange(n_items) % n_clusters)
    appeal = 1.0 / np.arange(1, n_items + 1) ** zipf
    appeal = appeal[rng.permutation(n_items)]
    members = [np.flatnonzero(cluster_of == c) for c in range(n_clusters)]
    member_p = [appeal[m] / appeal[m].sum() for m in members]
    global_p = appeal / appeal.sum()

    users, items, ratings, stamps = [], [], [], []
    horizon = 10_000_000
    for u in range(n_users):
        first = int(rng.integers(n_clusters))
        second = int((first + 1 + rng.integers(max(n_clusters - 1, 1))) % n_clusters)
        count = 3 + int(rng.poisson(max(mean_activity - 3, 0.0)))
        n_src = rng.multinomial(count, [primary_share, secondary_share,
                                        1 - primary_share - secondary_share])
        picked = np.concatenate([
            rng.choice(members[first], size=n_src[0], p=member_p[first]),
            rng.choice(members[second], size=n_src[1], p=member_p[second]),
            rng.choice(n_items, size=n_src[2], p=global_p),
        ])
        rates = np.concatenate([
            rng.choice([3, 4, 5], size=n_src[0] + n_src[1], p=[0.1, 0.4, 0.5]),
            rng.integers(1, 6, size=n_src[2]),
        ])
        when = rng.integers(horizon, size=count)
        _, first_pos = np.unique(picked, return_index=True)
        for pos in np.sort(first_pos):
            users.append(f"u{u}")
            items.append(f"i{picked[pos]}")
            ratings.append(float(rates[pos]))
            stamps.append(int(when[pos]))
    return from_records(users, items, ratings, stamps)


def clustered_benchmark(sizes=(7, 5, 4, 4, 3, 2), n_outliers: int = 5, n_features: int = 18,
                        n_methods: int = 11, metrics=(("ndcg", 10), ("hitrate", 10),
                                                      ("coverage", None)),
                        separation: float = 3.0, outlier_distance: float = 3.0,
                        effect: float = 0.15, noise: float = 0.02, seed: int = 0):
    """Dataset characteristics and metric matrices with planted dataset clusters.

    Datasets of one cluster share a feature centre and a method-performance
    profile (a global method skill plus a cluster-specific effect). Outlier
    datasets sit ``outlier_distance`` times farther from the origin than a
    typical centre and each has its own performance profile, mimicking the
    handful of atypical datasets found in real benchmarks.

    Returns:
        ``(features, matrices)``: a ``FeatureTable`` and one ``MetricMatrix``
        per entry of ``metrics``, all with the same dataset rows. Rows are
        ordered cluster by cluster, outliers last.
    """
    rng = derive_rng(seed, "clustered_benchmark")
    n_clusters = len(sizes)
    cluster = np.concatenate([np.repeat(np.arange(n_clusters), sizes),
                              n_clusters + np.arange(n_outliers)])
    n = len(cluster)
    centres = rng.normal(0.0, separation, size=(n_clusters, n_features))
    far = rng.normal(0.0, separation * outlier_distance, size=(n_outliers, n_features))
    values = np.vstack([centres, far])[cluster] + rng.normal(0.0, 1.0, size=(n, n_features))
    rows = tuple(f"d{r:02d}" for r in range(n))
    features = FeatureTable(values, rows, tuple(f"f{c}" for c in range(n_features)))
    methods = tuple(f"M{j:02d}" for j in range(n_methods))
    matrices = []
    for metric, k in metrics:
        skill = rng.uniform(0.2, 0.6, size=n_methods)
        shift = rng.normal(0.0, effect, size=(n_clusters + n_outliers, n_methods))
        q = skill + shift[cluster] + rng.normal(0.0, noise, size=(n, n_methods))
        matrices.append(MetricMatrix(np.clip(q, 0.01, None), rows, methods, metric, k))
    return features, matrices
