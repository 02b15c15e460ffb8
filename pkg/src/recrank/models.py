"""Desk-scale baseline recommenders and a seeded random hyperparameter search.

Models are fitted on an :class:`~recrank.corpus.InteractionSet`, treat it as a
binary user x item matrix, and never recommend an item the user interacted
with in the fitting data. Only catalog items (at least one fitting
interaction) are candidates. Score ties are broken by ascending item index.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from . import kernels
from ._seeding import derive_rng
from .corpus import InteractionSet, SplitBundle
from .io import export_metric_matrix, import_metric_matrix  # noqa: F401  (re-exported)
from .lists import RecommendationLists
from .metrics import ground_truth, user_metric_matrix

logger = logging.getLogger(__name__)

MODEL_KINDS = ("Random", "MostPop", "ItemKNN", "EASE", "External")
EASE_MAX_ITEMS = 20_000
DEFAULT_PARAMS: dict[str, dict[str, Any]] = {
    "Random": {},
    "MostPop": {},
    "ItemKNN": {"neighbors": 50},
    "EASE": {"lambda": 100.0},
    "External": {},
}
KNN_RANGE = (5, 200)
EASE_LAMBDA_RANGE = (1.0, 1e4)
BATCH_USERS = 1024


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    kind: str
    params: dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    validation_ndcg: float | None = None

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ModelError(f"unknown model kind {self.kind!r}")
        if self.kind == "ItemKNN" and int(self.params.get("neighbors", 1)) < 1:
            raise ModelError("neighbors must be >= 1")
        if self.kind == "EASE" and not float(self.params.get("lambda", 1.0)) > 0:
            raise ModelError("lambda must be > 0")


class Recommender:
    """Base class: subclasses provide ``_scores(user_rows) -> (n, n_items)``."""

    name = "base"

    def __init__(self, data: InteractionSet):
        if data.n_records == 0:
            raise ModelError("cannot fit on an empty interaction set")
        self.matrix = data.matrix()
        self.n_users, self.n_items = self.matrix.shape
        self.item_counts = np.diff(self.matrix.tocsc().indptr)
        self.catalog = self.item_counts > 0

    def _scores(self, users: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def scores(self, users) -> np.ndarray:
        return self._scores(np.asarray(users, dtype=np.int64))

    def recommend(self, users=None, k: int = 10) -> RecommendationLists:
        if k < 1:
            raise ModelError("k must be >= 1")
        if users is None:
            users = np.flatnonzero(np.diff(self.matrix.indptr) > 0)
        users = np.asarray(users, dtype=np.int64)
        out = np.full((len(users), k), -1, np.int64)
        for start in range(0, len(users), BATCH_USERS):
            batch = users[start:start + BATCH_USERS]
            seen = self.matrix[batch]
            scores = np.ascontiguousarray(self._scores(batch), dtype=np.float64)
            out[start:start + len(batch)] = kernels.topk_unseen(
                scores, seen.indptr.astype(np.int64), seen.indices.astype(np.int64),
                self.catalog, k,
            )
        return RecommendationLists(users, out)


class RandomModel(Recommender):
    name = "Random"

    def __init__(self, data: InteractionSet, seed: int = 0):
        super().__init__(data)
        self.seed = seed

    def _scores(self, users):
        # one generator per user keeps lists independent of batching and order
        return np.stack([derive_rng(self.seed, "random_model", int(u)).random(self.n_items)
                         for u in users]) if len(users) else np.zeros((0, self.n_items))


class MostPopModel(Recommender):
    name = "MostPop"

    def _scores(self, users):
        return np.broadcast_to(self.item_counts.astype(np.float64), (len(users), self.n_items))


def cosine_similarity(matrix: sp.csr_matrix) -> np.ndarray:
    """Dense item-item cosine of binary columns; 0 wherever an item has no users."""
    x = matrix.astype(np.float64)
    co = (x.T @ x).toarray()
    norms = np.sqrt(np.diag(co))
    with np.errstate(divide="ignore", invalid="ignore"):
        sim = co / np.outer(norms, norms)
    return np.nan_to_num(sim, nan=0.0, posinf=0.0)


def neighbor_weights(sim: np.ndarray, neighbors: int) -> sp.csr_matrix:
    """Keep, for every target item ``i``, its ``neighbors`` most similar other items.

    Returns ``W`` with ``W[j, i] = sim(i, j)`` for retained neighbours ``j`` of
    ``i``; similarity ties go to the lower item index.
    """
    n = sim.shape[0]
    masked = sim.copy()
    np.fill_diagonal(masked, -np.inf)
    keep = min(neighbors, n - 1)
    order = np.argsort(-masked, axis=0, kind="stable")[:keep]
    rows = order.ravel(order="F")
    cols = np.repeat(np.arange(n), keep)
    vals = sim[rows, cols]
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


class ItemKNNModel(Recommender):
    name = "ItemKNN"

    def __init__(self, data: InteractionSet, neighbors: int = 50,
                 similarity: np.ndarray | None = None):
        super().__init__(data)
        if neighbors < 1:
            raise ModelError("neighbors must be >= 1")
        self.neighbors = neighbors
        self.similarity = cosine_similarity(self.matrix) if similarity is None else similarity
        self.weights = neighbor_weights(self.similarity, neighbors)

    def _scores(self, users):
        return np.asarray((self.matrix[users] @ self.weights).todense())


class EASEModel(Recommender):
    name = "EASE"

    def __init__(self, data: InteractionSet, lam: float = 100.0,
                 max_items: int = EASE_MAX_ITEMS, gram: np.ndarray | None = None):
        super().__init__(data)
        if not lam > 0:
            raise ModelError("lambda must be > 0")
        if self.n_items > max_items:
            raise ModelError(
                f"EASE needs a dense {self.n_items}x{self.n_items} solve (cap {max_items}); "
                "score this dataset externally and import the metric matrix"
            )
        self.lam = lam
        g = (self.matrix.T @ self.matrix).toarray() if gram is None else gram.copy()
        g[np.diag_indices_from(g)] += lam
        try:
            p = scipy.linalg.cho_solve(scipy.linalg.cho_factor(g), np.eye(len(g)))
        except np.linalg.LinAlgError as exc:
            raise ModelError(f"Gram matrix is singular: {exc}") from None
        self.weights = -p / np.diag(p)[None, :]
        np.fill_diagonal(self.weights, 0.0)

    def _scores(self, users):
        return np.asarray(self.matrix[users] @ self.weights)


def fit_random(train: InteractionSet, seed: int = 0) -> RandomModel:
    return RandomModel(train, seed)


def fit_mostpop(train: InteractionSet) -> MostPopModel:
    return MostPopModel(train)


def fit_itemknn(train: InteractionSet, neighbors: int = 50) -> ItemKNNModel:
    return ItemKNNModel(train, neighbors)


def fit_ease(train: InteractionSet, lam: float = 100.0,
             max_items: int = EASE_MAX_ITEMS) -> EASEModel:
    return EASEModel(train, lam, max_items)


def fit_model(config: ModelConfig, data: InteractionSet, **cache) -> Recommender:
    kind, params = config.kind, {**DEFAULT_PARAMS[config.kind], **config.params}
    if kind == "Random":
        return RandomModel(data, config.seed)
    if kind == "MostPop":
        return MostPopModel(data)
    if kind == "ItemKNN":
        return ItemKNNModel(data, int(params["neighbors"]), cache.get("similarity"))
    if kind == "EASE":
        return EASEModel(data, float(params["lambda"]), int(params.get("max_items", EASE_MAX_ITEMS)),
                         cache.get("gram"))
    raise ModelError("External models are not fitted here; import their metric matrices")


def _sample_params(kind: str, rng: np.random.Generator, n_catalog: int) -> dict[str, Any]:
    if kind == "ItemKNN":
        hi = max(1, min(KNN_RANGE[1], n_catalog - 1))
        lo = min(KNN_RANGE[0], hi)
        return {"neighbors": int(rng.integers(lo, hi + 1))}
    if kind == "EASE":
        lo, hi = np.log(EASE_LAMBDA_RANGE[0]), np.log(EASE_LAMBDA_RANGE[1])
        return {"lambda": float(np.exp(rng.uniform(lo, hi)))}
    return {}


def tune(kind: str, bundle: SplitBundle, budget: int = 40, seed: int = 0,
         k: int = 10) -> ModelConfig:
    """Seeded random search maximising validation nDCG@k.

    ItemKNN neighbour counts are drawn uniformly from integers, EASE's
    lambda log-uniformly. Parameterless kinds return their default config
    without fitting anything. The first best configuration found wins ties.
    """
    if budget < 1:
        raise ModelError("budget must be >= 1")
    if kind not in MODEL_KINDS:
        raise ModelError(f"unknown model kind {kind!r}")
    if kind in ("Random", "MostPop", "External"):
        return ModelConfig(kind, dict(DEFAULT_PARAMS[kind]), seed)
    truth = ground_truth(bundle.validation, bundle.train)
    if truth.n_users == 0:
        logger.warning("empty validation split; %s keeps default parameters", kind)
        return ModelConfig(kind, dict(DEFAULT_PARAMS[kind]), seed)

    train_matrix = bundle.train.matrix()
    n_catalog = int(np.count_nonzero(np.diff(train_matrix.tocsc().indptr)))
    cache = {}
    if kind == "ItemKNN":
        cache["similarity"] = cosine_similarity(train_matrix)
    else:
        cache["gram"] = (train_matrix.T @ train_matrix).toarray()

    rng = derive_rng(seed, "tune", kind)
    best: ModelConfig | None = None
    for _ in range(budget):
        config = ModelConfig(kind, _sample_params(kind, rng, n_catalog), seed)
        model = fit_model(config, bundle.train, **cache)
        recs = model.recommend(truth.users, k)
        score = math.fsum(user_metric_matrix(recs, truth, k)[:, 3]) / truth.n_users
        if best is None or score > best.validation_ndcg:
            best = ModelConfig(kind, config.params, seed, score)
    return best


def refit_final(config: ModelConfig, bundle: SplitBundle) -> Recommender:
    """Fit on train + validation; seen-item exclusion then covers both."""
    return fit_model(config, bundle.trainval())
