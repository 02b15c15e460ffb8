"""Correlations, pairwise significance tests and critical-difference data."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
from scipy.stats import rankdata

from . import kernels
from ._seeding import derive_rng
from .aggregation import as_matrix, mean_ranks

EXACT_MAX_N = 25
BAYES_THRESHOLD = 0.85


def _centered_corr(x: np.ndarray, y: np.ndarray, name: str) -> float:
    x = x - x.mean()
    y = y - y.mean()
    sxx = float(x @ x)
    syy = float(y @ y)
    if sxx == 0.0 or syy == 0.0:
        warnings.warn(f"{name}: constant input, correlation defined as 0", stacklevel=3)
        return 0.0
    r = float(x @ y) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ValueError("pearson needs two equal-length vectors of length >= 2")
    return _centered_corr(x, y, "pearson")


def spearman(x, y) -> float:
    """Pearson correlation of average-tie ranks; 0 (with a warning) for constant input."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ValueError("spearman needs two equal-length vectors of length >= 2")
    return _centered_corr(rankdata(x), rankdata(y), "spearman")


def quantile_bins(x: np.ndarray, bins: int) -> np.ndarray:
    """Equal-frequency bin labels from average ranks; tied values share a bin."""
    n = len(x)
    r = rankdata(x) - 1.0
    return np.minimum((r * bins / n).astype(np.int64), bins - 1)


def mutual_information(x, y, bins: int | None = None) -> float:
    """Plug-in mutual information in bits after quantile binning of both axes.

    ``bins`` defaults to ``min(ceil(sqrt(n)), 10)``.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(x)
    if x.shape != y.shape or n < 4:
        raise ValueError("mutual information needs two equal-length vectors of length >= 4")
    if bins is None:
        bins = min(math.ceil(math.sqrt(n)), 10)
    bx, by = quantile_bins(x, bins), quantile_bins(y, bins)
    joint = np.zeros((bins, bins))
    np.add.at(joint, (bx, by), 1.0)
    joint /= n
    px = joint.sum(axis=1, keepdims=True)
    py = joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    return max(0.0, float(np.sum(joint[nz] * np.log2(joint[nz] / (px @ py)[nz]))))


# ---------------------------------------------------------------------------
# Wilcoxon signed-rank with Holm correction
# ---------------------------------------------------------------------------

def wilcoxon_signed_rank(diffs) -> tuple[float, float]:
    """Two-sided signed-rank test on paired differences.

    Zero differences are dropped. Up to 25 non-zero differences the exact
    permutation distribution is used (ties handled through half-integer
    ranks); above that a normal approximation with tie-corrected variance.

    Returns:
        ``(w_plus, p_value)``; p is 1 when every difference is zero.
    """
    d = np.asarray(diffs, dtype=np.float64)
    d = d[d != 0]
    n = len(d)
    if n == 0:
        return 0.0, 1.0
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    if n <= EXACT_MAX_N:
        doubled = np.rint(2 * ranks).astype(np.int64)
        counts = kernels.signrank_null_counts(doubled)
        w2 = int(round(2 * w_plus))
        total = float(counts.sum())
        lower = counts[: w2 + 1].sum() / total
        upper = counts[w2:].sum() / total
        return w_plus, min(1.0, 2.0 * min(lower, upper))
    mean = n * (n + 1) / 4.0
    _, tie_sizes = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(tie_sizes**3 - tie_sizes)) / 48.0
    z = (w_plus - mean) / math.sqrt(var)
    return w_plus, min(1.0, math.erfc(abs(z) / math.sqrt(2.0)))


def holm(pvalues) -> np.ndarray:
    """Holm step-down adjusted p-values (monotone in raw-p order, capped at 1)."""
    p = np.asarray(pvalues, dtype=np.float64)
    n = len(p)
    order = np.argsort(p, kind="stable")
    adjusted = np.empty(n)
    running = 0.0
    for step, idx in enumerate(order):
        running = max(running, min(1.0, (n - step) * p[idx]))
        adjusted[idx] = running
    return adjusted


@dataclass
class PairwiseTestReport:
    """Pairwise test results over the methods of one metric matrix.

    ``p_values[a, b]`` is the Holm-adjusted Wilcoxon p-value (symmetric, NaN
    diagonal). ``bayes[a, b]`` holds ``(P_left, P_rope, P_right)`` for the
    differences ``q[:, a] - q[:, b]``, so ``P_right`` is the posterior
    probability that a is better.
    """

    methods: tuple[str, ...]
    p_values: np.ndarray
    alpha: float = 0.05
    bayes: np.ndarray | None = None
    rope: float = 0.0
    bayes_threshold: float = BAYES_THRESHOLD
    raw_p_values: np.ndarray | None = field(default=None, repr=False)

    def wilcoxon_nonsignificant(self) -> np.ndarray:
        ns = self.p_values >= self.alpha
        np.fill_diagonal(ns, False)
        return ns

    def bayes_nonsignificant(self) -> np.ndarray:
        if self.bayes is None:
            raise ValueError("no Bayesian results in this report")
        ns = np.maximum(self.bayes[..., 0], self.bayes[..., 2]) < self.bayes_threshold
        np.fill_diagonal(ns, False)
        return ns


def wilcoxon_holm(q, alpha: float = 0.05) -> PairwiseTestReport:
    q = as_matrix(q)
    d, m = q.shape
    if d < 5:
        warnings.warn(f"Wilcoxon test on only {d} datasets has little power", stacklevel=2)
    pairs = [(a, b) for a in range(m) for b in range(a + 1, m)]
    raw = np.array([wilcoxon_signed_rank(q.values[:, a] - q.values[:, b])[1] for a, b in pairs])
    adjusted = holm(raw)
    p = np.full((m, m), np.nan)
    p_raw = np.full((m, m), np.nan)
    for (a, b), pa, pr in zip(pairs, adjusted, raw):
        p[a, b] = p[b, a] = pa
        p_raw[a, b] = p_raw[b, a] = pr
    return PairwiseTestReport(q.methods, p, alpha, raw_p_values=p_raw)


# ---------------------------------------------------------------------------
# Bayesian signed-rank
# ---------------------------------------------------------------------------

def bayesian_signed_rank(diffs, rope: float = 0.0, mc_samples: int = 10_000, seed: int = 0,
                         prior_weight: float = 1.0) -> tuple[float, float, float]:
    """Posterior probabilities ``(P_left, P_rope, P_right)`` of the signed-rank model.

    The differences are augmented with a pseudo-observation at 0 carrying
    Dirichlet weight ``prior_weight``. Each Monte Carlo draw samples
    Dirichlet weights, accumulates the weighted mass of all pairs
    ``(z_i + z_j) / 2`` below ``-rope``, within ``[-rope, rope]`` and above
    ``rope``, and is counted toward the largest of the three.
    """
    z = np.concatenate(([0.0], np.asarray(diffs, dtype=np.float64)))
    if len(z) < 2:
        raise ValueError("need at least one difference")
    if rope < 0:
        raise ValueError("rope must be non-negative")
    if mc_samples < 100:
        warnings.warn(f"only {mc_samples} Monte Carlo samples; posterior will be noisy",
                      stacklevel=2)
    alpha = np.ones(len(z))
    alpha[0] = prior_weight
    weights = derive_rng(seed, "bayes_signrank").dirichlet(alpha, size=mc_samples)
    theta = kernels.signrank_theta(np.ascontiguousarray(weights), z, float(rope))
    winner = np.argmax(theta, axis=1)
    counts = np.bincount(winner, minlength=3)
    return tuple(float(c) / mc_samples for c in counts)


def bayesian_pairwise(q, rope: float = 0.0, mc_samples: int = 10_000,
                      seed: int = 0) -> np.ndarray:
    q = as_matrix(q)
    m = q.shape[1]
    out = np.full((m, m, 3), np.nan)
    for a in range(m):
        for b in range(a + 1, m):
            left, mid, right = bayesian_signed_rank(
                q.values[:, a] - q.values[:, b], rope, mc_samples,
                seed=int(derive_rng(seed, "pair", a, b).integers(2**62)),
            )
            out[a, b] = (left, mid, right)
            out[b, a] = (right, mid, left)
    return out


def pairwise_tests(q, alpha: float = 0.05, rope: float = 0.0, mc_samples: int = 10_000,
                   seed: int = 0) -> PairwiseTestReport:
    report = wilcoxon_holm(q, alpha)
    report.bayes = bayesian_pairwise(q, rope, mc_samples, seed)
    report.rope = rope
    return report


# ---------------------------------------------------------------------------
# critical-difference diagram data
# ---------------------------------------------------------------------------

@dataclass
class CdDiagramData:
    methods: tuple[str, ...]          # ordered by mean rank, best first
    mean_ranks: tuple[float, ...]
    cliques: dict[str, list[tuple[str, ...]]]


def nonsignificant_cliques(methods, nonsig: np.ndarray, order) -> list[tuple[str, ...]]:
    """Maximal cliques (size >= 2) of the non-significance graph, in rank order."""
    graph = nx.Graph()
    graph.add_nodes_from(range(len(methods)))
    a_idx, b_idx = np.nonzero(np.triu(nonsig, 1))
    graph.add_edges_from(zip(a_idx.tolist(), b_idx.tolist()))
    pos = {m: p for p, m in enumerate(order)}
    cliques = []
    for clique in nx.find_cliques(graph):
        if len(clique) >= 2:
            cliques.append(tuple(sorted((methods[c] for c in clique), key=pos.__getitem__)))
    cliques.sort(key=lambda c: (pos[c[0]], -len(c), [pos[x] for x in c]))
    return cliques


def cd_diagram_data(q, tests: PairwiseTestReport) -> CdDiagramData:
    q = as_matrix(q)
    if tuple(tests.methods) != q.methods:
        raise ValueError("test report was computed for different methods")
    board = mean_ranks(q)
    order = board.methods
    cliques = {"wilcoxon": nonsignificant_cliques(q.methods, tests.wilcoxon_nonsignificant(),
                                                  order)}
    if tests.bayes is not None:
        cliques["bayesian"] = nonsignificant_cliques(q.methods, tests.bayes_nonsignificant(),
                                                     order)
    return CdDiagramData(order, board.scores, cliques)
