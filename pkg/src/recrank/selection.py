"""Pick a small set of principal datasets that preserves the full-benchmark ranking.

Four strategies are offered: uniform random subsets, a clustering pipeline
(standardize -> PCA -> isolation-forest outlier removal -> k-means, keeping
the dataset nearest each centroid), and greedy swap search for A- and
D-optimal designs. :func:`fidelity_table` compares them by how well the
ranking on the chosen subset agrees with the ranking on all datasets.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from ._seeding import derive_rng, derive_seed
from .aggregation import MetricMatrix, apply_rule, as_matrix
from .stability import ranking_agreement

logger = logging.getLogger(__name__)

EULER_GAMMA = 0.5772156649015329
MAX_LLOYD_ITER = 300
LLOYD_TOL = 1e-9
DEFAULT_CONTAMINATION = 1 / 6  # flags 5 of 30 datasets
SINGULAR_COND = 1e12


class SelectionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FeatureTable:
    values: np.ndarray
    rows: tuple[str, ...]
    columns: tuple[str, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "rows", tuple(self.rows))
        object.__setattr__(self, "columns", tuple(self.columns))
        if values.ndim != 2 or values.shape != (len(self.rows), len(self.columns)):
            raise SelectionError("feature values do not match the row/column labels")
        if values.shape[1] < 1:
            raise SelectionError("feature table has no columns")
        if not np.isfinite(values).all():
            raise SelectionError("feature table contains NaN or infinite values")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def take_rows(self, rows) -> FeatureTable:
        rows = np.asarray(rows, dtype=np.int64)
        return FeatureTable(self.values[rows], tuple(self.rows[r] for r in rows), self.columns)


def as_table(values, rows=None, columns=None) -> FeatureTable:
    if isinstance(values, FeatureTable):
        return values
    values = np.asarray(values, dtype=np.float64)
    n, p = values.shape
    rows = rows or tuple(f"d{i}" for i in range(n))
    columns = columns or tuple(f"f{j}" for j in range(p))
    return FeatureTable(values, rows, columns)


@dataclass
class SelectionResult:
    method: str
    indices: tuple[int, ...]
    criterion: float = float("nan")
    labels: np.ndarray | None = None
    n_clusters: int | None = None
    outliers: tuple[int, ...] = ()
    datasets: tuple[str, ...] = ()

    def __post_init__(self):
        self.indices = tuple(int(i) for i in self.indices)
        if len(set(self.indices)) != len(self.indices):
            raise SelectionError("selected indices must be distinct")

    def to_doc(self) -> dict:
        doc = {"method": self.method, "indices": list(self.indices),
               "criterion": None if math.isnan(self.criterion) else self.criterion}
        if self.datasets:
            doc["datasets"] = list(self.datasets)
            doc["selected"] = [self.datasets[i] for i in self.indices]
        if self.labels is not None:
            doc["labels"] = [int(v) for v in self.labels]
            doc["n_clusters"] = self.n_clusters
        if self.outliers:
            doc["outliers"] = list(self.outliers)
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_doc(), indent=2) + "\n"

    def assignment_csv(self) -> str:
        """Dataset-to-cluster table (clusters numbered from 1)."""
        if self.labels is None:
            raise SelectionError("result carries no cluster assignment")
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["dataset", "cluster", "selected"])
        chosen = set(self.indices)
        names = self.datasets or tuple(f"d{i}" for i in range(len(self.labels)))
        for i, (name, lab) in enumerate(zip(names, self.labels)):
            writer.writerow([name, int(lab) + 1, int(i in chosen)])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# preprocessing
# ---------------------------------------------------------------------------

def standardize(table) -> FeatureTable:
    """Zero-mean, unit population-std columns; constant columns are dropped."""
    table = as_table(table)
    x = table.values
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    keep = std > 1e-12 * np.maximum(1.0, np.abs(mean))
    if not keep.any():
        raise SelectionError("every feature column is constant")
    if not keep.all():
        dropped = [c for c, k in zip(table.columns, keep) if not k]
        warnings.warn(f"dropping constant feature columns {dropped}", stacklevel=2)
    z = (x[:, keep] - mean[keep]) / std[keep]
    return FeatureTable(z, table.rows, tuple(c for c, k in zip(table.columns, keep) if k))


@dataclass(frozen=True)
class PcaFit:
    components: np.ndarray   # (p, r), columns ordered by variance
    explained: np.ndarray    # variance share of every component (length p)
    mean: np.ndarray


def pca_fit(table, variance_target: float = 0.95) -> PcaFit:
    if not 0 < variance_target <= 1:
        raise SelectionError("variance_target must lie in (0, 1]")
    table = as_table(table)
    x = table.values
    mean = x.mean(axis=0)
    cov = (x - mean).T @ (x - mean) / len(x)
    eigval, eigvec = np.linalg.eigh(cov)
    order = np.argsort(-eigval, kind="stable")
    eigval = np.clip(eigval[order], 0.0, None)
    eigvec = eigvec[:, order]
    total = eigval.sum()
    shares = eigval / total if total > 0 else np.full(len(eigval), 1.0 / len(eigval))
    cum = np.cumsum(shares)
    r = int(np.searchsorted(cum, variance_target - 1e-12)) + 1
    r = min(r, len(eigval))
    comps = eigvec[:, :r].copy()
    for j in range(r):
        pivot = np.argmax(np.abs(comps[:, j]))
        if comps[pivot, j] < 0:
            comps[:, j] *= -1
    return PcaFit(comps, shares, mean)


def pca(table, variance_target: float = 0.95, max_components: int | None = None) -> FeatureTable:
    """Project onto the fewest leading components reaching ``variance_target``."""
    table = as_table(table)
    fit = pca_fit(table, variance_target)
    comps = fit.components if max_components is None else fit.components[:, :max_components]
    proj = (table.values - fit.mean) @ comps
    return FeatureTable(proj, table.rows, tuple(f"PC{j + 1}" for j in range(comps.shape[1])))


# ---------------------------------------------------------------------------
# isolation forest
# ---------------------------------------------------------------------------

def average_path_length(n) -> np.ndarray:
    """Expected unsuccessful-search path length ``c(n)`` of a binary search tree."""
    n = np.asarray(n, dtype=np.float64)
    out = np.zeros_like(n)
    big = n > 2
    out[n == 2] = 1.0
    m = n[big]
    out[big] = 2.0 * (np.log(m - 1.0) + EULER_GAMMA) - 2.0 * (m - 1.0) / m
    return out


def _grow_forest(x: np.ndarray, trees: int, subsample: int, rng: np.random.Generator):
    n, p = x.shape
    psi = min(subsample, n)
    limit = int(math.ceil(math.log2(max(psi, 2))))
    feature, threshold, left, right, size = [], [], [], [], []
    roots = []

    def new_node():
        feature.append(0)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        size.append(0)
        return len(feature) - 1

    for _ in range(trees):
        sample = rng.choice(n, size=psi, replace=False)
        root = new_node()
        roots.append(root)
        stack = [(root, sample, 0)]
        while stack:
            node, rows, depth = stack.pop()
            size[node] = len(rows)
            if len(rows) <= 1 or depth >= limit:
                continue
            sub = x[rows]
            lo, hi = sub.min(axis=0), sub.max(axis=0)
            usable = np.flatnonzero(hi > lo)
            if len(usable) == 0:
                continue
            f = int(usable[rng.integers(len(usable))])
            cut = float(rng.uniform(lo[f], hi[f]))
            if cut <= lo[f]:
                cut = float(np.nextafter(lo[f], hi[f]))
            go_left = sub[:, f] < cut
            feature[node], threshold[node] = f, cut
            left[node], right[node] = new_node(), new_node()
            stack.append((right[node], rows[~go_left], depth + 1))
            stack.append((left[node], rows[go_left], depth + 1))
    adjust = average_path_length(np.array(size))
    return (np.array(feature, np.int64), np.array(threshold, np.float64),
            np.array(left, np.int64), np.array(right, np.int64), adjust,
            np.array(roots, np.int64), psi)


def isolation_scores(table, trees: int = 100, subsample: int = 256, seed: int = 0) -> np.ndarray:
    """Anomaly score ``2 ** (-E[h(x)] / c(psi))`` for every row (higher = more isolated)."""
    x = np.ascontiguousarray(as_table(table).values)
    if len(x) < 4:
        raise SelectionError("isolation forest needs at least 4 rows")
    feature, threshold, left, right, adjust, roots, psi = _grow_forest(
        x, trees, subsample, derive_rng(seed, "iforest"))
    depth = kernels.iforest_path_lengths(x, feature, threshold, left, right, adjust, roots)
    return 2.0 ** (-depth / float(average_path_length(psi)))


def isolation_forest_outliers(table, trees: int = 100, subsample: int = 256,
                              contamination: float = DEFAULT_CONTAMINATION,
                              seed: int = 0) -> np.ndarray:
    """Indices (ascending) of the ``ceil(contamination * n)`` highest-scoring rows."""
    if not 0 <= contamination < 0.5:
        raise SelectionError("contamination must lie in [0, 0.5)")
    table = as_table(table)
    scores = isolation_scores(table, trees, subsample, seed)
    count = int(math.ceil(contamination * table.n - 1e-9))
    order = np.argsort(-scores, kind="stable")
    return np.sort(order[:count])


# ---------------------------------------------------------------------------
# k-means
# ---------------------------------------------------------------------------

@dataclass
class KMeansFit:
    labels: np.ndarray
    centroids: np.ndarray
    inertia: float
    iterations: int


def _kmeans_pp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(x)
    chosen = [int(rng.integers(n))]
    d2 = kernels.sq_distances(x, x[chosen]).ravel()
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            rest = np.setdiff1d(np.arange(n), chosen)
            nxt = int(rest[rng.integers(len(rest))]) if len(rest) else int(rng.integers(n))
        else:
            nxt = int(rng.choice(n, p=d2 / total))
        chosen.append(nxt)
        d2 = np.minimum(d2, kernels.sq_distances(x, x[[nxt]]).ravel())
    return x[chosen].copy()


def kmeans(x, k: int, restarts: int = 10, seed: int = 0) -> KMeansFit:
    """Best-of-``restarts`` Lloyd iterations from k-means++ seeds (lowest inertia)."""
    x = np.ascontiguousarray(np.asarray(x, dtype=np.float64))
    n = len(x)
    if not 1 <= k <= n:
        raise SelectionError(f"k={k} must lie in [1, {n}]")
    best: KMeansFit | None = None
    for r in range(restarts):
        rng = derive_rng(seed, "kmeans", k, r)
        centroids = _kmeans_pp(x, k, rng)
        for it in range(1, MAX_LLOYD_ITER + 1):
            d2 = kernels.sq_distances(x, centroids)
            labels = np.argmin(d2, axis=1)
            new = centroids.copy()
            for c in range(k):
                members = labels == c
                if members.any():
                    new[c] = x[members].mean(axis=0)
                else:
                    far = int(np.argmax(d2[np.arange(n), labels]))
                    new[c] = x[far]
                    labels[far] = c
                    d2[far, c] = 0.0
            shift = float(np.max(np.abs(new - centroids)))
            centroids = new
            if shift < LLOYD_TOL:
                break
        d2 = kernels.sq_distances(x, centroids)
        labels = np.argmin(d2, axis=1)
        inertia = math.fsum(d2[np.arange(n), labels])
        if best is None or inertia < best.inertia - 1e-12:
            best = KMeansFit(labels, centroids, inertia, it)
    return best


def silhouette(x, labels) -> float:
    """Mean silhouette; points in singleton clusters score 0. Needs 2 <= k <= n - 1."""
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels)
    clusters = np.unique(labels)
    n = len(x)
    if not 2 <= len(clusters) <= n - 1:
        raise SelectionError("silhouette needs between 2 and n-1 non-empty clusters")
    dist = np.sqrt(kernels.sq_distances(x, x))
    s = np.zeros(n)
    for i in range(n):
        own = labels == labels[i]
        if own.sum() == 1:
            continue
        a = dist[i, own].sum() / (own.sum() - 1)
        b = min(dist[i, labels == c].mean() for c in clusters if c != labels[i])
        denom = max(a, b)
        s[i] = 0.0 if denom == 0 else (b - a) / denom
    return float(s.mean())


def davies_bouldin(x, labels) -> float:
    x = np.asarray(x, dtype=np.float64)
    clusters = np.unique(labels)
    cents = np.array([x[labels == c].mean(axis=0) for c in clusters])
    spread = np.array([np.sqrt(((x[labels == c] - cents[j]) ** 2).sum(axis=1)).mean()
                       for j, c in enumerate(clusters)])
    sep = np.sqrt(kernels.sq_distances(cents, cents))
    k = len(clusters)
    worst = np.zeros(k)
    for i in range(k):
        ratios = [(spread[i] + spread[j]) / sep[i, j] if sep[i, j] > 0 else np.inf
                  for j in range(k) if j != i]
        worst[i] = max(ratios)
    return float(worst.mean())


def kmeans_cluster(table, k_range: Sequence[int] = range(2, 11), restarts: int = 10,
                   seed: int = 0) -> SelectionResult:
    """Choose k by silhouette (then lower Davies-Bouldin, then smaller k)."""
    table = as_table(table)
    x = table.values
    n = table.n
    ks = [k for k in k_range if 2 <= k <= n - 1]
    if not ks:
        raise SelectionError(f"no admissible k in {list(k_range)} for {n} rows")
    if np.all(x == x[0]):
        raise SelectionError("all points are identical; silhouette is undefined")
    best_key, best = None, None
    for k in ks:
        fit = kmeans(x, k, restarts, seed)
        if len(np.unique(fit.labels)) < 2:
            continue
        sil = silhouette(x, fit.labels)
        dbi = davies_bouldin(x, fit.labels)
        key = (-sil, dbi, k)
        if best_key is None or key < best_key:
            best_key, best = key, (fit, k, sil)
    if best is None:
        raise SelectionError("k-means produced no usable clustering")
    fit, k, sil = best
    return SelectionResult("kmeans", (), sil, fit.labels, k, datasets=table.rows)


def select_principal_kmeans(table, target_count: int, seed: int = 0,
                            variance_target: float = 0.95,
                            contamination: float = DEFAULT_CONTAMINATION,
                            trees: int = 100, restarts: int = 10) -> SelectionResult:
    """Cluster datasets into ``target_count`` groups and keep each group's most central member.

    Outliers flagged by the isolation forest cannot be selected and do not
    shape the clusters, but are still labelled with their nearest centroid.
    At most ``n - target_count`` rows are treated as outliers.
    """
    table = as_table(table)
    n = table.n
    if not 1 <= target_count <= n:
        raise SelectionError(f"target_count must lie in [1, {n}]")
    if target_count == n:
        return SelectionResult("KMeans", tuple(range(n)), float("nan"), np.arange(n), n,
                               datasets=table.rows)
    z = pca(standardize(table), variance_target)
    outliers = np.array([], np.int64)
    if n >= 4 and contamination > 0:
        outliers = isolation_forest_outliers(z, trees, contamination=contamination,
                                             seed=derive_seed(seed, "outliers"))
        if len(outliers) > n - target_count:
            scores = isolation_scores(z, trees, seed=derive_seed(seed, "outliers"))
            outliers = np.sort(np.argsort(-scores, kind="stable")[: n - target_count])
    inliers = np.setdiff1d(np.arange(n), outliers)
    x = z.values
    fit = kmeans(x[inliers], target_count, restarts, derive_seed(seed, "clusters"))
    d2_in = kernels.sq_distances(np.ascontiguousarray(x[inliers]), fit.centroids)
    chosen = []
    for c in range(target_count):
        members = np.flatnonzero(fit.labels == c)
        if len(members):
            chosen.append(int(inliers[members[np.argmin(d2_in[members, c])]]))
    labels = np.argmin(kernels.sq_distances(np.ascontiguousarray(x), fit.centroids), axis=1)
    labels[inliers] = fit.labels
    return SelectionResult("KMeans", tuple(sorted(chosen)), fit.inertia, labels,
                           len(chosen), tuple(int(o) for o in outliers), table.rows)


# ---------------------------------------------------------------------------
# optimal design
# ---------------------------------------------------------------------------

def design_criterion(x_sel: np.ndarray, criterion: str) -> float:
    """D: ``log det(X'X)`` (maximise); A: ``tr((X'X)^-1) / 3`` (minimise).

    ``X`` is ``x_sel`` with an intercept column appended. Singular designs
    score ``-inf`` (D) or ``+inf`` (A).
    """
    if criterion not in ("A", "D"):
        raise SelectionError(f"criterion must be 'A' or 'D', got {criterion!r}")
    design = np.column_stack([x_sel, np.ones(len(x_sel))])
    evals = np.linalg.eigvalsh(design.T @ design)
    # the Gram matrix is PSD, so its condition number is the eigenvalue ratio
    if evals[0] <= 0 or evals[-1] > SINGULAR_COND * evals[0]:
        return -math.inf if criterion == "D" else math.inf
    if criterion == "D":
        return float(np.log(evals).sum())
    return float((1.0 / evals).sum()) / 3.0


def optimal_design_select(table, target_count: int, criterion: str = "D", restarts: int = 10,
                          seed: int = 0) -> SelectionResult:
    """Swap-based local search for an A- or D-optimal subset of rows.

    Each restart starts from a random subset and sweeps the positions in
    order, accepting every improving single-row swap as soon as it is found
    (candidates in ascending index), until a full sweep makes no change;
    the best restart wins.
    """
    table = as_table(table)
    x = table.values
    n, p = x.shape
    if not 1 <= target_count <= n:
        raise SelectionError(f"target_count must lie in [1, {n}]")
    if target_count < p + 1:
        raise SelectionError(
            f"{target_count} rows cannot support {p} features plus an intercept; reduce features")
    sign = -1.0 if criterion == "D" else 1.0  # minimise sign * value
    best_val, best_set = math.inf, None
    for r in range(restarts):
        rng = derive_rng(seed, "design", criterion, r)
        current = sorted(rng.choice(n, size=target_count, replace=False).tolist())
        value = sign * design_criterion(x[current], criterion)
        improved = True
        while improved:
            improved = False
            for pos in range(target_count):
                for cand in range(n):
                    if cand in current:
                        continue
                    trial = current.copy()
                    trial[pos] = cand
                    v = sign * design_criterion(x[trial], criterion)
                    if v < value - 1e-12 * max(1.0, abs(value)) or (
                            math.isinf(value) and not math.isinf(v)):
                        current, value, improved = trial, v, True
        current = sorted(current)
        if value < best_val or best_set is None:
            best_val, best_set = value, current
    if math.isinf(best_val):
        raise SelectionError("every candidate design is singular")
    name = "D optimal" if criterion == "D" else "A optimal"
    return SelectionResult(name, tuple(best_set), sign * best_val, datasets=table.rows)


def random_select(n: int, target_count: int, seed: int = 0) -> SelectionResult:
    if not 1 <= target_count <= n:
        raise SelectionError(f"target_count must lie in [1, {n}]")
    pick = derive_rng(seed, "random_select").choice(n, size=target_count, replace=False)
    return SelectionResult("Random", tuple(sorted(pick.tolist())))


# ---------------------------------------------------------------------------
# fidelity
# ---------------------------------------------------------------------------

def selection_fidelity(q, selected: Sequence[int], rule: str = "dm_auc") -> float:
    """Spearman agreement between the rule's ranking on ``selected`` rows and on all rows."""
    q = as_matrix(q)
    selected = sorted(set(int(s) for s in selected))
    if not selected or selected[-1] >= q.shape[0] or selected[0] < 0:
        raise SelectionError("selected rows out of range")
    full = apply_rule(rule, q)
    return ranking_agreement(full, apply_rule(rule, q.take_rows(selected)), q.methods)


FIDELITY_METHODS = ("Random", "D optimal", "A optimal", "KMeans")


@dataclass
class FidelityTable:
    methods: tuple[str, ...]
    metrics: tuple[str, ...]
    samples: np.ndarray            # (methods, metrics, simulations)
    rule: str = "dm_auc"
    selections: dict[str, list[tuple[int, ...]]] = field(default_factory=dict, repr=False)

    @property
    def mean(self) -> np.ndarray:
        return self.samples.mean(axis=2)

    def value(self, method: str, metric: str) -> float:
        return float(self.mean[self.methods.index(method), self.metrics.index(metric)])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["Method", *self.metrics])
        for i, method in enumerate(self.methods):
            writer.writerow([method, *(f"{v:.3f}" for v in self.mean[i])])
        return buf.getvalue()

    def to_markdown(self) -> str:
        lines = ["| Method | " + " | ".join(self.metrics) + " |",
                 "|---|" + "---|" * len(self.metrics)]
        best = self.mean.max(axis=0)
        for i, method in enumerate(self.methods):
            cells = [f"**{v:.3f}**" if v == best[j] else f"{v:.3f}"
                     for j, v in enumerate(self.mean[i])]
            lines.append(f"| {method} | " + " | ".join(cells) + " |")
        return "\n".join(lines) + "\n"

    def to_doc(self) -> dict:
        return {"rule": self.rule, "metrics": list(self.metrics),
                "simulations": int(self.samples.shape[2]),
                "rows": [{"method": m, **{k: float(v) for k, v in zip(self.metrics, self.mean[i])}}
                         for i, m in enumerate(self.methods)]}


def metric_display_name(q: MetricMatrix) -> str:
    pretty = {"ndcg": "nDCG", "hitrate": "HitRate", "coverage": "Coverage",
              "precision": "Precision", "recall": "Recall", "map": "MAP", "mrr": "MRR",
              "diversity": "Diversity", "novelty": "Novelty"}
    base = pretty.get(q.metric.lower(), q.metric)
    if q.k is None or base == "Coverage":
        return base
    return f"{base}@{q.k}"


def select_once(features: FeatureTable, method: str, target_count: int, seed: int,
                variance_target: float = 0.95, restarts: int = 3) -> SelectionResult:
    if method == "Random":
        return random_select(features.n, target_count, seed)
    if method == "KMeans":
        return select_principal_kmeans(features, target_count, seed, variance_target,
                                       restarts=restarts)
    z = pca(standardize(features), variance_target, max_components=max(1, target_count - 1))
    return optimal_design_select(z, target_count, "D" if method == "D optimal" else "A",
                                 restarts, seed)


def fidelity_table(matrices: Sequence[MetricMatrix], features, target_count: int = 6,
                   simulations: int = 500, rule: str = "dm_auc", seed: int = 0,
                   methods: Sequence[str] = FIDELITY_METHODS,
                   variance_target: float = 0.95, restarts: int = 3) -> FidelityTable:
    """Mean fidelity of each selection strategy over seeded simulations.

    Every simulation derives its own seed; one selection per strategy is
    scored against all metric matrices (which share the dataset rows of
    ``features``).
    """
    features = as_table(features)
    for q in matrices:
        if q.shape[0] != features.n:
            raise SelectionError("metric matrices and feature table disagree on dataset count")
    names = tuple(metric_display_name(q) for q in matrices)
    samples = np.zeros((len(methods), len(matrices), simulations))
    selections: dict[str, list[tuple[int, ...]]] = {m: [] for m in methods}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for s in range(simulations):
            sim_seed = derive_seed(seed, "simulation", s)
            for i, method in enumerate(methods):
                picked = select_once(features, method, target_count, sim_seed,
                                     variance_target, restarts).indices
                selections[method].append(picked)
                for j, q in enumerate(matrices):
                    samples[i, j, s] = selection_fidelity(q, picked, rule)
    return FidelityTable(tuple(methods), names, samples, rule, selections)


def selection_from_doc(doc: Mapping) -> SelectionResult:
    labels = doc.get("labels")
    return SelectionResult(doc["method"], tuple(doc["indices"]),
                           float("nan") if doc.get("criterion") is None else doc["criterion"],
                           None if labels is None else np.array(labels), doc.get("n_clusters"),
                           tuple(doc.get("outliers", ())), tuple(doc.get("datasets", ())))
