"""Stress tests for aggregation rules: perturb the metric matrix, measure ranking drift.

Drift is the Spearman correlation between a reference ranking and the
ranking after perturbation, restricted to the methods present in both.
Every trial draws from its own generator derived from
``(seed, kind, rule, grid point, trial)``, so results do not depend on the
number of worker threads or on scheduling.
"""
from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import rankdata

from ._seeding import derive_rng
from .aggregation import (DEFAULT_BETA_HAT, RULE_NAMES, Leaderboard, MetricMatrix, apply_rule,
                          as_matrix)
from .stats import spearman

logger = logging.getLogger(__name__)

CLONE_SUFFIX = " (copy)"
BEST_LABEL = "~best"
DEFAULT_TRIALS = 100

RuleLike = str | Callable[[MetricMatrix], Leaderboard]


@dataclass
class StabilityReport:
    kind: str
    rule: str
    grid: list[float]
    mean: list[float]
    std: list[float]
    count: list[int]
    reference: str = ""
    samples: list[list[float]] = field(default_factory=list, repr=False)

    def to_doc(self) -> dict:
        return {
            "kind": self.kind,
            "rule": self.rule,
            "reference": self.reference,
            "points": [{"param": g, "mean": m, "std": s, "count": c}
                       for g, m, s, c in zip(self.grid, self.mean, self.std, self.count)],
        }


def _run_rule(rule: RuleLike, q: MetricMatrix, beta_hat: float) -> Leaderboard:
    if callable(rule):
        return rule(q)
    return apply_rule(rule, q, beta_hat)


def _rule_name(rule: RuleLike) -> str:
    return rule if isinstance(rule, str) else getattr(rule, "__name__", "custom")


def ranking_agreement(reference: Leaderboard, other: Leaderboard,
                      methods: Sequence[str] | None = None) -> float:
    """Spearman correlation of two leaderboards' scores over ``methods``.

    Identical rankings (including identical tie patterns) score 1 even when
    every method is tied; otherwise a constant side scores 0.
    """
    methods = reference.methods if methods is None else tuple(methods)
    a = reference.oriented(methods)
    b = other.oriented(methods)
    if np.array_equal(rankdata(a), rankdata(b)):
        return 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return spearman(a, b)


def _summarize(kind, rule, grid, samples, reference="") -> StabilityReport:
    mean, std, count = [], [], []
    for vals in samples:
        arr = np.asarray(vals, dtype=np.float64)
        mu = math.fsum(arr) / len(arr)
        mean.append(mu)
        std.append(math.sqrt(math.fsum((arr - mu) ** 2) / len(arr)))
        count.append(len(arr))
    return StabilityReport(kind, _rule_name(rule), [float(g) for g in grid], mean, std, count,
                           reference, [list(map(float, s)) for s in samples])


def _map(fn, items, workers: int):
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def drop_datasets_curve(q, rule: RuleLike, drops: Sequence[int], trials: int = DEFAULT_TRIALS,
                        seed: int = 0, beta_hat: float = DEFAULT_BETA_HAT,
                        workers: int = 1) -> StabilityReport:
    """Drop ``n`` random datasets and compare with the full-matrix ranking."""
    q = as_matrix(q)
    d = q.shape[0]
    if max(drops) > d - 1 or min(drops) < 0:
        raise ValueError(f"drop counts must lie in [0, {d - 1}]")
    reference = _run_rule(rule, q, beta_hat)
    name = _rule_name(rule)

    def trial(job):
        n, t = job
        rng = derive_rng(seed, "drop_datasets", name, n, t)
        rows = np.sort(rng.choice(d, size=d - n, replace=False))
        return ranking_agreement(reference, _run_rule(rule, q.take_rows(rows), beta_hat))

    samples = [_map(trial, [(n, t) for t in range(trials)], workers) for n in drops]
    return _summarize("drop_datasets", rule, drops, samples, name)


def subset_pair_consistency(q, rule: RuleLike, subset_size: int = 5, pairs: int = DEFAULT_TRIALS,
                            seed: int = 0, beta_hat: float = DEFAULT_BETA_HAT,
                            workers: int = 1) -> StabilityReport:
    """Agreement between rankings from two independent random dataset subsets."""
    q = as_matrix(q)
    d = q.shape[0]
    if not 1 <= subset_size <= d:
        raise ValueError(f"subset_size must lie in [1, {d}]")
    name = _rule_name(rule)

    def trial(t):
        rng = derive_rng(seed, "subset_pairs", name, subset_size, t)
        a = np.sort(rng.choice(d, size=subset_size, replace=False))
        b = np.sort(rng.choice(d, size=subset_size, replace=False))
        return ranking_agreement(_run_rule(rule, q.take_rows(a), beta_hat),
                                 _run_rule(rule, q.take_rows(b), beta_hat), q.methods)

    samples = [_map(trial, range(pairs), workers)]
    return _summarize("subset_pairs", rule, [subset_size], samples, name)


def drop_methods_curve(q, rule: RuleLike, drops: Sequence[int], trials: int = DEFAULT_TRIALS,
                       seed: int = 0, beta_hat: float = DEFAULT_BETA_HAT,
                       workers: int = 1) -> StabilityReport:
    """Remove ``n`` random methods; compare survivors with their reference order."""
    q = as_matrix(q)
    m = q.shape[1]
    if max(drops) > m - 2 or min(drops) < 0:
        raise ValueError(f"drop counts must lie in [0, {m - 2}]")
    reference = _run_rule(rule, q, beta_hat)
    name = _rule_name(rule)

    def trial(job):
        n, t = job
        rng = derive_rng(seed, "drop_methods", name, n, t)
        cols = np.sort(rng.choice(m, size=m - n, replace=False))
        sub = q.take_columns(cols)
        return ranking_agreement(reference, _run_rule(rule, sub, beta_hat), sub.methods)

    samples = [_map(trial, [(n, t) for t in range(trials)], workers) for n in drops]
    return _summarize("drop_methods", rule, drops, samples, name)


def clone_label(methods: Sequence[str], target: str) -> str:
    """Label for a copy of ``target``.

    The suffix starts with a space so the copy sorts directly after its
    source under label tie-breaking; the pair then behaves consistently
    whenever the rule resolves exact score ties by label.
    """
    label = target + CLONE_SUFFIX
    while label in methods:
        label += "'"
    return label


def add_similar_method(q, rule: RuleLike, target: str | int, alpha: float = 1.0,
                       beta_hat: float = DEFAULT_BETA_HAT) -> tuple[Leaderboard, float]:
    """Append ``alpha`` times the ``target`` column and re-rank."""
    q = as_matrix(q)
    if abs(1.0 - alpha) > 0.15:
        warnings.warn(f"alpha={alpha} is far from 1; the new method is hardly similar",
                      stacklevel=2)
    col = q.methods.index(target) if isinstance(target, str) else int(target)
    perturbed = q.with_column(clone_label(q.methods, q.methods[col]), alpha * q.values[:, col])
    board = _run_rule(rule, perturbed, beta_hat)
    return board, ranking_agreement(_run_rule(rule, q, beta_hat), board, q.methods)


def add_best_method(q, rule: RuleLike, alpha: float = 1.0,
                    beta_hat: float = DEFAULT_BETA_HAT) -> tuple[Leaderboard, float]:
    """Append a method scoring ``alpha`` times each dataset's best value and re-rank."""
    q = as_matrix(q)
    if not 1.0 <= alpha <= 4.0:
        raise ValueError("alpha must lie in [1, 4]")
    perturbed = q.with_column(BEST_LABEL, alpha * q.values.max(axis=1))
    board = _run_rule(rule, perturbed, beta_hat)
    return board, ranking_agreement(_run_rule(rule, q, beta_hat), board, q.methods)


def add_similar_curve(q, rule: RuleLike, alphas: Sequence[float],
                      beta_hat: float = DEFAULT_BETA_HAT) -> StabilityReport:
    """Per alpha, agreement averaged over cloning each method in turn."""
    q = as_matrix(q)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        samples = [[add_similar_method(q, rule, t, a, beta_hat)[1] for t in q.methods]
                   for a in alphas]
    return _summarize("add_similar", rule, alphas, samples, _rule_name(rule))


def add_best_curve(q, rule: RuleLike, alphas: Sequence[float],
                   beta_hat: float = DEFAULT_BETA_HAT) -> StabilityReport:
    q = as_matrix(q)
    samples = [[add_best_method(q, rule, a, beta_hat)[1]] for a in alphas]
    return _summarize("add_best", rule, alphas, samples, _rule_name(rule))


def beta_sensitivity(q, beta_grid: Sequence[float], reference_beta: float = DEFAULT_BETA_HAT,
                     rules: Sequence[str] = ("dm_auc", "dm_lbo")) -> dict[str, StabilityReport]:
    """Agreement of DM rankings at each profile bound with the ranking at ``reference_beta``."""
    q = as_matrix(q)
    if min(beta_grid) <= 1:
        raise ValueError("profile bounds must exceed 1 (every area vanishes at 1)")
    out = {}
    for rule in rules:
        reference = apply_rule(rule, q, reference_beta)
        samples = [[ranking_agreement(reference, apply_rule(rule, q, b))] for b in beta_grid]
        out[rule] = _summarize("beta", rule, beta_grid, samples, f"{rule}@{reference_beta:g}")
    return out


def dominance_pairs(q) -> list[tuple[str, str]]:
    """All ``(A, B)`` where column A weakly dominates B with at least one strict win."""
    q = as_matrix(q)
    v = q.values
    out = []
    for a in range(q.shape[1]):
        for b in range(q.shape[1]):
            if a != b and np.all(v[:, a] >= v[:, b]) and np.any(v[:, a] > v[:, b]):
                out.append((q.methods[a], q.methods[b]))
    return out


def pareto_check(q, rule: RuleLike,
                 beta_hat: float = DEFAULT_BETA_HAT) -> tuple[bool, list[tuple[str, str]]]:
    """Check that no dominating method is scored strictly worse than one it dominates."""
    q = as_matrix(q)
    board = _run_rule(rule, q, beta_hat)
    violations = []
    for a, b in dominance_pairs(q):
        sa, sb = board.oriented([a, b])
        if sa < sb:
            violations.append((a, b))
    return not violations, violations


def stress(q, kind: str, rules: Sequence[str] = RULE_NAMES, grid: Sequence[float] = (),
           trials: int = DEFAULT_TRIALS, seed: int = 0, beta_hat: float = DEFAULT_BETA_HAT,
           subset_size: int = 5, workers: int = 1) -> list[StabilityReport]:
    """Run one perturbation family for every rule (the CLI entry point)."""
    q = as_matrix(q)
    d, m = q.shape
    reports = []
    if kind == "beta":
        grid = list(grid) or [1.25 + 0.25 * i for i in range(16)]
        return list(beta_sensitivity(q, grid, beta_hat,
                                     [r for r in rules if r in ("dm_auc", "dm_lbo")]).values())
    for rule in rules:
        if kind == "drop-datasets":
            g = [int(x) for x in grid] or list(range(d))
            reports.append(drop_datasets_curve(q, rule, g, trials, seed, beta_hat, workers))
        elif kind == "drop-methods":
            g = [int(x) for x in grid] or list(range(m - 1))
            reports.append(drop_methods_curve(q, rule, g, trials, seed, beta_hat, workers))
        elif kind == "subset-pairs":
            reports.append(subset_pair_consistency(q, rule, min(subset_size, d), trials, seed,
                                                   beta_hat, workers))
        elif kind == "add-similar":
            g = list(grid) or [0.85 + 0.05 * i for i in range(7)]
            reports.append(add_similar_curve(q, rule, g, beta_hat))
        elif kind == "add-best":
            g = list(grid) or [1.0 + 0.25 * i for i in range(13)]
            reports.append(add_best_curve(q, rule, g, beta_hat))
        else:
            raise ValueError(f"unknown stress kind {kind!r}")
    return reports


# ---------------------------------------------------------------------------
# counterexample search
# ---------------------------------------------------------------------------

def random_metric_matrix(rng: np.random.Generator, d: int, m: int, levels: int | None = None,
                         ) -> np.ndarray:
    """Positive random matrix; ``levels`` quantises values so ties become likely."""
    if levels:
        return rng.integers(1, levels + 1, size=(d, m)) / levels
    return rng.uniform(0.01, 1.0, size=(d, m))


def search_counterexample(predicate: Callable[[np.ndarray], bool], seed: int = 0,
                          max_tries: int = 100_000, d_range=(2, 7), m_range=(3, 5),
                          levels: int | None = 10) -> tuple[int, np.ndarray] | None:
    """Return the first ``(try index, Q)`` with ``predicate(Q)`` true, or None.

    Candidate ``t`` is generated from ``derive_rng(seed, "counterexample", t)`` so a
    found fixture can be regenerated from its index alone.
    """
    for t in range(max_tries):
        rng = derive_rng(seed, "counterexample", t)
        d = int(rng.integers(d_range[0], d_range[1] + 1))
        m = int(rng.integers(m_range[0], m_range[1] + 1))
        q = random_metric_matrix(rng, d, m, levels)
        if predicate(q):
            return t, q
    return None
