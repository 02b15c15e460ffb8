"""Aggregation of a datasets x methods metric matrix into leaderboards.

Eight rules are provided: Dolan-Moré area under the performance profile
(``dm_auc``) and its leave-best-out variant (``dm_lbo``), mean ranks,
arithmetic / geometric / harmonic means, and the majority-relation rules
Copeland and Minimax. Each returns a :class:`Leaderboard`. Ties between
methods are always broken by ascending method label.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.stats import rankdata

from . import kernels
from ._seeding import derive_rng

DEFAULT_BETA_HAT = 3.0


class AggregationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class MetricMatrix:
    """Values ``q[t, i]`` of one metric for dataset ``t`` and method ``i``."""

    values: np.ndarray
    datasets: tuple[str, ...]
    methods: tuple[str, ...]
    metric: str = "metric"
    k: int | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "datasets", tuple(str(s) for s in self.datasets))
        object.__setattr__(self, "methods", tuple(str(s) for s in self.methods))
        if values.ndim != 2:
            raise AggregationError("metric matrix must be two-dimensional")
        d, m = values.shape
        if d < 1 or m < 2:
            raise AggregationError(f"need at least 1 dataset and 2 methods, got {d}x{m}")
        if len(self.datasets) != d or len(self.methods) != m:
            raise AggregationError("label counts do not match the matrix shape")
        if len(set(self.datasets)) != d or len(set(self.methods)) != m:
            raise AggregationError("dataset and method labels must be unique")
        if not np.isfinite(values).all():
            raise AggregationError("metric matrix contains non-finite values")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def name(self) -> str:
        return self.metric if self.k is None else f"{self.metric}@{self.k}"

    def take_rows(self, rows: Sequence[int]) -> MetricMatrix:
        rows = np.asarray(rows, dtype=np.int64)
        return MetricMatrix(self.values[rows], tuple(self.datasets[r] for r in rows),
                            self.methods, self.metric, self.k)

    def take_columns(self, cols: Sequence[int]) -> MetricMatrix:
        cols = np.asarray(cols, dtype=np.int64)
        return MetricMatrix(self.values[:, cols], self.datasets,
                            tuple(self.methods[c] for c in cols), self.metric, self.k)

    def with_column(self, label: str, column: np.ndarray) -> MetricMatrix:
        values = np.column_stack([self.values, np.asarray(column, dtype=np.float64)])
        return MetricMatrix(values, self.datasets, self.methods + (label,), self.metric, self.k)


def as_matrix(q, methods: Sequence[str] | None = None) -> MetricMatrix:
    """Wrap a bare array; default labels are zero-padded so label order is column order."""
    if isinstance(q, MetricMatrix):
        return q
    q = np.asarray(q, dtype=np.float64)
    d, m = q.shape
    if methods is None:
        width = len(str(max(m - 1, 0)))
        methods = tuple(f"m{i:0{width}d}" for i in range(m))
    width = len(str(max(d - 1, 0)))
    return MetricMatrix(q, tuple(f"d{t:0{width}d}" for t in range(d)), tuple(methods))


@dataclass(frozen=True)
class RankMatrix:
    values: np.ndarray
    methods: tuple[str, ...]
    tie_policy: str = "average"


@dataclass(frozen=True)
class Leaderboard:
    """Methods ordered best first with their scores under one rule."""

    rule: str
    methods: tuple[str, ...]
    scores: tuple[float, ...]
    higher_is_better: bool

    def score_of(self, method: str) -> float:
        return self.scores[self.methods.index(method)]

    def position(self, method: str) -> int:
        return self.methods.index(method) + 1

    def oriented(self, methods: Sequence[str] | None = None) -> np.ndarray:
        """Scores in the given label order, sign-flipped so that higher is better."""
        methods = self.methods if methods is None else methods
        lookup = dict(zip(self.methods, self.scores))
        sign = 1.0 if self.higher_is_better else -1.0
        return np.array([sign * lookup[m] for m in methods], dtype=np.float64)

    def rows(self) -> list[tuple[int, str, float]]:
        return [(pos + 1, m, s) for pos, (m, s) in enumerate(zip(self.methods, self.scores))]


def make_leaderboard(rule: str, methods: Sequence[str], scores, higher_is_better: bool,
                     sort_key=None) -> Leaderboard:
    """Order by score (or by ``sort_key`` when given) under the rule's direction, then label."""
    scores = [float(s) for s in scores]
    key = scores if sort_key is None else [float(s) for s in sort_key]
    sign = -1.0 if higher_is_better else 1.0
    order = sorted(range(len(methods)), key=lambda i: (sign * key[i], methods[i]))
    return Leaderboard(rule, tuple(methods[i] for i in order),
                       tuple(scores[i] for i in order), higher_is_better)


# ---------------------------------------------------------------------------
# rank-based and mean-based rules
# ---------------------------------------------------------------------------

def rank_rows(q) -> RankMatrix:
    """Rank methods within each dataset, 1 = highest metric; ties get average ranks."""
    q = as_matrix(q)
    return RankMatrix(rankdata(-q.values, method="average", axis=1), q.methods)


def mean_ranks(q) -> Leaderboard:
    ranks = q if isinstance(q, RankMatrix) else rank_rows(q)
    scores = [math.fsum(col) / len(col) for col in ranks.values.T]
    return make_leaderboard("mean_ranks", ranks.methods, scores, higher_is_better=False)


def mean_aggregate(q, kind: str = "arithmetic") -> Leaderboard:
    """Column means of the chosen kind; higher is better.

    Geometric and harmonic means need strictly positive columns; a column with
    a non-positive entry scores 0 and a warning is emitted.
    """
    q = as_matrix(q)
    rule = {"arithmetic": "ma", "geometric": "geom", "harmonic": "harm"}.get(kind)
    if rule is None:
        raise AggregationError(f"unknown mean kind {kind!r}")
    scores = []
    for label, col in zip(q.methods, q.values.T):
        if kind == "arithmetic":
            scores.append(math.fsum(col) / len(col))
        elif (col <= 0).any():
            warnings.warn(f"{kind} mean of {label!r}: non-positive entry, score set to 0",
                          stacklevel=2)
            scores.append(0.0)
        elif kind == "geometric":
            scores.append(math.exp(math.fsum(np.log(col)) / len(col)))
        else:
            scores.append(len(col) / math.fsum(1.0 / col))
    return make_leaderboard(rule, q.methods, scores, higher_is_better=True)


# ---------------------------------------------------------------------------
# Dolan-Moré performance profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PerformanceProfile:
    """Exact step-function performance profiles on ``[1, beta_hat]``.

    ``ratios[t, i] = max_j q[t, j] / q[t, i]`` (``inf`` when ``q[t, i] = 0`` but
    the row maximum is positive, 1 for an all-zero row). ``p_i(beta)`` is the
    share of datasets with ratio <= beta.
    """

    methods: tuple[str, ...]
    ratios: np.ndarray
    beta_hat: float
    raw_areas: tuple[float, ...]
    normalized_areas: tuple[float, ...]

    def value(self, method: int | str, beta: float) -> float:
        i = self.methods.index(method) if isinstance(method, str) else method
        return float(np.count_nonzero(self.ratios[:, i] <= beta)) / self.ratios.shape[0]

    def breakpoints(self, method: int | str) -> list[tuple[float, float]]:
        """``(beta, p(beta))`` at each jump inside ``[1, beta_hat]``; p is 0 before the first."""
        i = self.methods.index(method) if isinstance(method, str) else method
        col = np.sort(self.ratios[:, i])
        d = len(col)
        points = []
        for beta in np.unique(col[col <= self.beta_hat]):
            points.append((float(beta), float(np.count_nonzero(col <= beta)) / d))
        return points

    def curve(self, method: int | str) -> list[tuple[float, float]]:
        """Polyline vertices of the step function from beta = 1 to beta_hat."""
        pts = [(1.0, self.value(method, 1.0))]
        for beta, p in self.breakpoints(method):
            if beta > 1.0:
                pts.append((beta, pts[-1][1]))
                pts.append((beta, p))
        pts.append((float(self.beta_hat), pts[-1][1]))
        return pts


def dm_ratios(values: np.ndarray) -> np.ndarray:
    if (values < 0).any():
        raise AggregationError("performance profiles need non-negative metric values")
    best = values.max(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(values > 0, best / np.where(values > 0, values, 1.0), np.inf)
    ratios[(best == 0).ravel()] = 1.0
    return ratios


def dm_profile(q, beta_hat: float = DEFAULT_BETA_HAT) -> PerformanceProfile:
    q = as_matrix(q)
    if not beta_hat >= 1:
        raise AggregationError("beta_hat must be >= 1")
    ratios = dm_ratios(q.values)
    d = ratios.shape[0]
    gaps = np.clip(beta_hat - ratios, 0.0, None)
    raw = [math.fsum(col) / d for col in gaps.T]
    total = math.fsum(raw)
    normalized = [a / total for a in raw] if total > 0 else [0.0] * len(raw)
    return PerformanceProfile(q.methods, ratios, float(beta_hat), tuple(raw), tuple(normalized))


def dm_auc(profile_or_q, beta_hat: float = DEFAULT_BETA_HAT) -> Leaderboard:
    """Normalised area under each method's profile; higher is better."""
    profile = (profile_or_q if isinstance(profile_or_q, PerformanceProfile)
               else dm_profile(profile_or_q, beta_hat))
    if math.fsum(profile.raw_areas) <= 0:
        raise AggregationError("all profile areas are zero (beta_hat = 1?)")
    # areas equal up to float noise (e.g. after rescaling a row) count as ties
    key = [round(a, 12) for a in profile.raw_areas]
    return make_leaderboard("dm_auc", profile.methods, profile.normalized_areas,
                            higher_is_better=True, sort_key=key)


def dm_lbo(q, beta_hat: float = DEFAULT_BETA_HAT) -> Leaderboard:
    """Leave-best-out: repeatedly remove the DM-AUC winner; rank = removal round."""
    q = as_matrix(q)
    remaining = list(range(len(q.methods)))
    rank = {}
    while len(remaining) > 1:
        board = dm_auc(q.take_columns(remaining), beta_hat)
        winner = board.methods[0]
        rank[winner] = len(rank) + 1
        remaining = [c for c in remaining if q.methods[c] != winner]
    rank[q.methods[remaining[0]]] = len(rank) + 1
    return make_leaderboard("dm_lbo", q.methods, [rank[m] for m in q.methods],
                            higher_is_better=False)


# ---------------------------------------------------------------------------
# majority-relation rules
# ---------------------------------------------------------------------------

def pairwise_wins(q) -> np.ndarray:
    """``wins[a, b]``: datasets on which method a is strictly above method b."""
    return kernels.pairwise_wins(np.ascontiguousarray(as_matrix(q).values))


def copeland(q) -> Leaderboard:
    """Score = (#methods majority-beaten) - (#methods that majority-beat it)."""
    q = as_matrix(q)
    wins = pairwise_wins(q)
    beats = wins > wins.T
    scores = beats.sum(axis=1) - beats.sum(axis=0)
    return make_leaderboard("copeland", q.methods, scores.astype(float), higher_is_better=True)


def minimax(q, variant: str = "winning_votes") -> Leaderboard:
    """Score = -(largest defeat).

    ``winning_votes`` counts a defeat by B only when B majority-beats the
    method, measured by B's number of winning datasets; ``literal_count``
    uses B's winning-dataset count regardless of the majority relation.
    """
    q = as_matrix(q)
    wins = pairwise_wins(q)
    if variant == "winning_votes":
        defeats = np.where(wins > wins.T, wins, 0)
    elif variant == "literal_count":
        defeats = wins.copy()
    else:
        raise AggregationError(f"unknown minimax variant {variant!r}")
    np.fill_diagonal(defeats, 0)
    scores = [-float(v) for v in defeats.max(axis=0)]
    return make_leaderboard("minimax", q.methods, scores, higher_is_better=True)


# ---------------------------------------------------------------------------
# probabilistic and normalisation helpers
# ---------------------------------------------------------------------------

def top_probabilities(mu: np.ndarray, sigma: np.ndarray, mc_samples: int = 10_000,
                      seed: int = 0) -> np.ndarray:
    """Per-dataset probability of each method being on top under independent Gaussians.

    Each dataset row uses its own derived generator. Exact ties in a draw
    (only possible with zero variances) share the top equally, which makes the
    all-zero-variance case an exact argmax count.
    """
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    if mu.shape != sigma.shape or mu.ndim != 2:
        raise AggregationError("mu and sigma must be matching 2-D arrays")
    if (sigma < 0).any():
        raise AggregationError("standard deviations must be non-negative")
    if mc_samples < 1:
        raise AggregationError("mc_samples must be >= 1")
    d, m = mu.shape
    probs = np.empty((d, m))
    for t in range(d):
        if not sigma[t].any():
            draws = mu[t][None, :]
        else:
            z = derive_rng(seed, "expected_tops", t).standard_normal((mc_samples, m))
            draws = mu[t] + sigma[t] * z
        top = draws == draws.max(axis=1, keepdims=True)
        probs[t] = (top / top.sum(axis=1, keepdims=True)).mean(axis=0)
    return probs


def expected_tops(mu, sigma, methods: Sequence[str] | None = None,
                  mc_samples: int = 10_000, seed: int = 0) -> Leaderboard:
    """Expected number of datasets on which each method is best; higher is better."""
    probs = top_probabilities(mu, sigma, mc_samples, seed)
    labels = as_matrix(np.zeros((1, probs.shape[1])), methods).methods
    scores = [math.fsum(col) for col in probs.T]
    return make_leaderboard("expected_tops", labels, scores, higher_is_better=True)


def minmax_normalize(q) -> MetricMatrix:
    """Row-wise ``(q - min) / (max - min)``; constant rows become zeros with a warning."""
    q = as_matrix(q)
    lo = q.values.min(axis=1, keepdims=True)
    span = q.values.max(axis=1, keepdims=True) - lo
    flat = (span == 0).ravel()
    if flat.any():
        names = [q.datasets[t] for t in np.flatnonzero(flat)]
        warnings.warn(f"constant rows mapped to zero: {names}", stacklevel=2)
    out = np.where(span > 0, (q.values - lo) / np.where(span > 0, span, 1.0), 0.0)
    return MetricMatrix(out, q.datasets, q.methods, q.metric, q.k)


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

RULE_NAMES = ("dm_auc", "dm_lbo", "mean_ranks", "ma", "geom", "harm", "copeland", "minimax")

DISPLAY_NAMES = {
    "dm_auc": "DM AUC",
    "dm_lbo": "DM LBO",
    "mean_ranks": "Mean ranks",
    "ma": "MA",
    "geom": "Geom. mean",
    "harm": "Harm. mean",
    "copeland": "Copeland",
    "minimax": "Minimax",
}


def _rule_table(beta_hat: float, minimax_variant: str) -> dict[str, Callable]:
    return {
        "dm_auc": lambda q: dm_auc(q, beta_hat),
        "dm_lbo": lambda q: dm_lbo(q, beta_hat),
        "mean_ranks": mean_ranks,
        "ma": lambda q: mean_aggregate(q, "arithmetic"),
        "geom": lambda q: mean_aggregate(q, "geometric"),
        "harm": lambda q: mean_aggregate(q, "harmonic"),
        "copeland": copeland,
        "minimax": lambda q: minimax(q, minimax_variant),
    }


def apply_rule(rule: str, q, beta_hat: float = DEFAULT_BETA_HAT,
               minimax_variant: str = "winning_votes") -> Leaderboard:
    table = _rule_table(beta_hat, minimax_variant)
    if rule not in table:
        raise AggregationError(f"unknown rule {rule!r}; choose from {RULE_NAMES}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return table[rule](as_matrix(q))


def aggregate_all(q, rules: Sequence[str] = RULE_NAMES,
                  beta_hat: float = DEFAULT_BETA_HAT) -> dict[str, Leaderboard]:
    return {rule: apply_rule(rule, q, beta_hat) for rule in rules}
