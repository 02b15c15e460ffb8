"""Top-k accuracy and beyond-accuracy metrics, bootstrap, metric correlation.

User-level metrics use the modified cutoff ``k_m(u) = min(k, |relevant(u)|)``
so a perfect list scores 1 even when the user has fewer than ``k`` relevant
test items. Averages over users use exact (``math.fsum``) summation, so the
result does not depend on user order.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from . import kernels
from ._seeding import derive_rng
from .corpus import InteractionSet
from .lists import RecommendationLists
from .stats import spearman

USER_METRICS = ("precision", "recall", "map", "ndcg", "mrr", "hitrate")
CATALOG_METRICS = ("coverage", "diversity", "novelty")
ALL_METRICS = USER_METRICS + CATALOG_METRICS


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Relevant test items per evaluated user plus the interaction history.

    ``users`` are the evaluated users (each with at least one relevant item),
    sorted ascending; their relevant items are the CSR rows
    ``indices[indptr[r]:indptr[r+1]]``. ``history`` is the binary users x items
    matrix the model was fitted on; its non-empty columns form the catalog.
    """

    users: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    history: sp.csr_matrix

    @property
    def n_users(self) -> int:
        return len(self.users)

    def relevant_counts(self) -> np.ndarray:
        return np.diff(self.indptr)

    def relevant(self, row: int) -> np.ndarray:
        return self.indices[self.indptr[row]:self.indptr[row + 1]]

    @property
    def catalog(self) -> np.ndarray:
        return np.flatnonzero(np.diff(self.history.tocsc().indptr) > 0)


def ground_truth(test: InteractionSet, history: InteractionSet) -> GroundTruth:
    mat = test.matrix()
    counts = np.diff(mat.indptr)
    users = np.flatnonzero(counts > 0)
    sub = mat[users]
    sub.sort_indices()
    return GroundTruth(users.astype(np.int64), sub.indptr.astype(np.int64),
                       sub.indices.astype(np.int64), history.matrix())


@dataclass
class MetricReport:
    values: dict[tuple[str, int], float]
    n_users: int

    def get(self, metric: str, k: int) -> float:
        return self.values[(metric, k)]

    def rows(self) -> list[tuple[str, int, float]]:
        return [(m, k, self.values[(m, k)]) for m, k in sorted(self.values)]

    def to_csv(self) -> str:
        lines = ["metric,k,value"]
        lines += [f"{m},{k},{v!r}" for m, k, v in self.rows()]
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        doc = {"n_users": self.n_users,
               "metrics": [{"metric": m, "k": k, "value": v} for m, k, v in self.rows()]}
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> MetricReport:
        doc = json.loads(text)
        return cls({(r["metric"], int(r["k"])): float(r["value"]) for r in doc["metrics"]},
                   int(doc["n_users"]))


def _fsum_mean(values: np.ndarray) -> float:
    return math.fsum(values) / len(values) if len(values) else 0.0


def user_accuracy(recs_u: Sequence[int], rel_u, k: int) -> dict[str, float]:
    """Precision, recall, MAP, nDCG, MRR and hit rate of one user's list at cutoff ``k``."""
    recs_u = np.asarray(list(recs_u)[:k], dtype=np.int64)
    if len(np.unique(recs_u)) != len(recs_u):
        raise ValueError("duplicate items in recommendation list")
    rel = np.unique(np.asarray(list(rel_u), dtype=np.int64))
    if len(rel) == 0:
        raise ValueError("user has no relevant items")
    row = np.full((1, k), -1, np.int64)
    row[0, : len(recs_u)] = recs_u
    hits = kernels.hit_matrix(row, np.array([0, len(rel)], np.int64), rel)
    table = kernels.user_metric_table(hits, np.array([len(rel)], np.int64), k)
    return dict(zip(USER_METRICS, map(float, table[0])))


def user_metric_matrix(recs: RecommendationLists, truth: GroundTruth, k: int) -> np.ndarray:
    """``(n_users, 6)`` per-user metrics for the users of ``truth``, in its order."""
    rows = recs.rows_for(truth.users)
    items = np.ascontiguousarray(recs.items[rows, :k])
    hits = kernels.hit_matrix(items, truth.indptr, truth.indices)
    return kernels.user_metric_table(hits, truth.relevant_counts(), k)


def item_cosine(history: sp.csr_matrix, items: np.ndarray) -> np.ndarray:
    """Dense cosine similarity between binary history columns ``items``."""
    cols = history[:, items].tocsc().astype(np.float64)
    cols.data[:] = 1.0
    co = (cols.T @ cols).toarray()
    norms = np.sqrt(np.diag(co))
    with np.errstate(divide="ignore", invalid="ignore"):
        sim = co / np.outer(norms, norms)
    return np.nan_to_num(sim, nan=0.0, posinf=0.0)


def catalog_metrics(recs: RecommendationLists, history: sp.csr_matrix,
                    k: int | None = None) -> tuple[float, float, float]:
    """Coverage, diversity (1 - intra-list similarity) and novelty of all lists.

    Lists shorter than two items are skipped in the intra-list mean. Item
    popularity for novelty is the share of history users who interacted with
    the item.
    """
    if k is not None:
        recs = recs.truncate(k)
    items = recs.items
    n_lists = items.shape[0]
    item_users = np.diff(history.tocsc().indptr)
    catalog_size = int(np.count_nonzero(item_users))
    flat = items[items >= 0]
    distinct, receivers = np.unique(flat, return_counts=True)
    if len(distinct) and (item_users[distinct] == 0).any():
        raise ValueError("recommended an item absent from the history catalog")
    coverage = len(distinct) / catalog_size

    local = np.searchsorted(distinct, np.where(items >= 0, items, 0))
    local = np.where(items >= 0, local, -1).astype(np.int64)
    sim = item_cosine(history, distinct) if len(distinct) else np.zeros((0, 0))
    per_list = kernels.intra_list_similarity(np.ascontiguousarray(local), sim)
    usable = per_list[~np.isnan(per_list)]
    if len(usable) < n_lists:
        warnings.warn(f"{n_lists - len(usable)} lists shorter than 2 skipped in diversity",
                      stacklevel=2)
    diversity = 1.0 - _fsum_mean(usable)

    n_hist_users = int(np.count_nonzero(np.diff(history.indptr)))
    p = item_users[distinct] / n_hist_users
    share = receivers / n_lists if n_lists else receivers * 0.0
    novelty = math.fsum(share * -np.log2(p)) + 0.0
    return coverage, diversity, novelty


def evaluate(recs: RecommendationLists, truth: GroundTruth, k_list: Sequence[int],
             catalog: bool = True) -> MetricReport:
    """Average user metrics over the evaluated users and add catalog metrics per ``k``."""
    if truth.n_users == 0:
        raise ValueError("no evaluated users")
    values: dict[tuple[str, int], float] = {}
    rows = recs.rows_for(truth.users)
    evaluated = RecommendationLists(recs.users[rows], recs.items[rows])
    for k in sorted(set(k_list)):
        table = user_metric_matrix(evaluated, truth, k)
        for col, name in enumerate(USER_METRICS):
            values[(name, k)] = _fsum_mean(table[:, col])
        if catalog:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                cov, div, nov = catalog_metrics(evaluated, truth.history, k)
            values[("coverage", k)] = cov
            values[("diversity", k)] = div
            values[("novelty", k)] = nov
    return MetricReport(values, truth.n_users)


@dataclass
class BootstrapResult:
    values: dict[str, np.ndarray]
    mean: dict[str, float] = field(default_factory=dict)
    std: dict[str, float] = field(default_factory=dict)


def bootstrap_evaluate(recs: RecommendationLists, truth: GroundTruth, k: int,
                       iterations: int = 100, sample_fraction: float = 0.8, seed: int = 0,
                       replace: bool = True) -> BootstrapResult:
    """Resample evaluated users and recompute user-averaged metrics.

    Each iteration draws ``floor(sample_fraction * |M|)`` users (with
    replacement by default). The reported spread is the population standard
    deviation ``sqrt(mean((x - mean(x))^2))`` over iterations.
    """
    if truth.n_users == 0:
        raise ValueError("no evaluated users")
    if iterations < 2:
        raise ValueError("need at least 2 iterations")
    if not 0 < sample_fraction <= 1:
        raise ValueError("sample_fraction must lie in (0, 1]")
    table = user_metric_matrix(recs, truth, k)
    size = max(1, int(math.floor(sample_fraction * truth.n_users)))
    rng = derive_rng(seed, "bootstrap", k)
    values = {name: np.empty(iterations) for name in USER_METRICS}
    for it in range(iterations):
        pick = rng.choice(truth.n_users, size=size, replace=replace)
        sample = table[pick]
        for col, name in enumerate(USER_METRICS):
            values[name][it] = _fsum_mean(sample[:, col])
    result = BootstrapResult(values)
    for name, vals in values.items():
        mu = _fsum_mean(vals)
        result.mean[name] = mu
        result.std[name] = math.sqrt(_fsum_mean((vals - mu) ** 2))
    return result


def metric_correlation(reports, metric_names: Sequence[str] | None = None) -> np.ndarray:
    """Dataset-averaged Spearman correlation between metrics across methods.

    Args:
        reports: array ``(datasets, methods, metrics)``.

    A metric that is constant across methods on a dataset contributes 0 for
    every pair involving it on that dataset. The diagonal is 1.
    """
    cube = np.asarray(reports, dtype=np.float64)
    if cube.ndim != 3:
        raise ValueError("reports must be (datasets, methods, metrics)")
    n_data, n_methods, n_metrics = cube.shape
    if n_methods < 3:
        raise ValueError("need at least 3 methods per dataset")
    acc = np.zeros((n_metrics, n_metrics))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for t in range(n_data):
            for a in range(n_metrics):
                for b in range(a + 1, n_metrics):
                    r = spearman(cube[t, :, a], cube[t, :, b])
                    acc[a, b] += r
                    acc[b, a] += r
    out = acc / n_data
    np.fill_diagonal(out, 1.0)
    return out
