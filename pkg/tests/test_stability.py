import itertools
import json
from pathlib import Path

import numpy as np
import pytest
from conftest import load_fixture

from recrank.aggregation import RULE_NAMES, MetricMatrix, apply_rule, make_leaderboard
from recrank.stability import (BEST_LABEL, add_best_method, add_similar_curve,
                               add_similar_method, beta_sensitivity, clone_label,
                               drop_datasets_curve, drop_methods_curve, pareto_check,
                               ranking_agreement, search_counterexample, stress,
                               subset_pair_consistency)

FIXTURES = Path(__file__).parent / "fixtures"


def mat(rows, methods=None):
    rows = np.asarray(rows, dtype=float)
    methods = methods or tuple(f"M{j}" for j in range(rows.shape[1]))
    return MetricMatrix(rows, tuple(f"d{t}" for t in range(len(rows))), methods)


@pytest.fixture(scope="module")
def q():
    return mat(np.random.default_rng(0).uniform(0.05, 1.0, (12, 6)))


@pytest.mark.parametrize("rule", RULE_NAMES)
def test_identity_perturbations_score_one(q, rule):
    assert drop_datasets_curve(q, rule, [0], trials=3).mean == [1.0]
    assert drop_methods_curve(q, rule, [0], trials=3).mean == [1.0]
    assert subset_pair_consistency(q, rule, subset_size=12, pairs=3).mean == [1.0]


def test_single_dataset_left_matches_row_order(q):
    rep = drop_datasets_curve(q, "ma", [11], trials=20, seed=1)
    assert rep.count == [20]
    # each single row gives a strict order; agreement with reference varies per trial
    full = apply_rule("ma", q)
    for t in range(12):
        row = apply_rule("ma", q.take_rows([t]))
        assert row.methods == tuple(np.array(q.methods)[np.argsort(-q.values[t], kind="stable")])
        assert -1.0 <= ranking_agreement(full, row) <= 1.0


@pytest.mark.parametrize("rule", ["ma", "geom", "harm"])
def test_drop_datasets_curve_roughly_monotone(rule):
    q = mat(np.random.default_rng(2).uniform(0.05, 1.0, (15, 6)))
    rep = drop_datasets_curve(q, rule, list(range(0, 15, 2)), trials=400, seed=3)
    assert all(b <= a + 0.02 for a, b in zip(rep.mean, rep.mean[1:]))
    assert all(-1 <= s <= 1 for pts in rep.samples for s in pts)


def test_three_methods_drop_one_preserves_mean_order():
    rng = np.random.default_rng(4)
    for _ in range(20):
        q = mat(rng.uniform(0.05, 1.0, (6, 3)))
        for rule in ("ma", "geom", "harm"):
            rep = drop_methods_curve(q, rule, [1], trials=10)
            assert rep.mean == [1.0]


def test_minimax_less_stable_than_geom_with_dominant_method():
    q = load_fixture("drop_methods_minimax_vs_geom")
    mm = drop_methods_curve(q, "minimax", [1], trials=50).mean[0]
    gm = drop_methods_curve(q, "geom", [1], trials=50).mean[0]
    assert mm < gm


def test_subset_pairs_reports_one_value():
    q = mat(np.random.default_rng(5).uniform(0.05, 1.0, (30, 11)))
    rep = subset_pair_consistency(q, "mean_ranks", subset_size=5, pairs=100)
    assert rep.grid == [5.0] and rep.count == [100] and -1 <= rep.mean[0] <= 1
    with pytest.raises(ValueError):
        subset_pair_consistency(q, "ma", subset_size=31)


def test_reports_independent_of_workers(q):
    a = drop_datasets_curve(q, "dm_auc", [2, 5], trials=20, seed=7, workers=1)
    b = drop_datasets_curve(q, "dm_auc", [2, 5], trials=20, seed=7, workers=3)
    assert a.samples == b.samples
    c = drop_methods_curve(q, "copeland", [1, 3], trials=20, seed=7, workers=3)
    d = drop_methods_curve(q, "copeland", [1, 3], trials=20, seed=7, workers=1)
    assert c.samples == d.samples


def test_drop_bounds_validated(q):
    with pytest.raises(ValueError):
        drop_datasets_curve(q, "ma", [12])
    with pytest.raises(ValueError):
        drop_methods_curve(q, "ma", [5])


@pytest.mark.parametrize("rule", ["dm_auc", "dm_lbo", "ma", "geom", "harm"])
def test_exact_clone_is_harmless_for_scale_free_rules(q, rule):
    for target in q.methods:
        board, rho = add_similar_method(q, rule, target, 1.0)
        assert rho == 1.0
        assert sorted(board.methods) == sorted(q.methods + (target + " (copy)",))


def test_clone_flips_mean_ranks_fixture():
    q = load_fixture("clone_mean_ranks")
    assert min(add_similar_method(q, "mean_ranks", t, 1.0)[1] for t in q.methods) < 1.0


def test_scaled_clone_of_worst_keeps_mean_order(q):
    worst = apply_rule("ma", q).methods[-1]
    with pytest.warns(UserWarning):
        add_similar_method(q, "ma", worst, 0.5)
    assert add_similar_method(q, "ma", worst, 0.85)[1] == 1.0


def test_clone_label_unique():
    assert clone_label(("A", "A (copy)"), "A") == "A (copy)'"


def test_add_best_examples(q):
    for alpha in (1.0, 2.5, 4.0):
        board, rho = add_best_method(q, "ma", alpha)
        assert rho == 1.0 and board.methods[0] == BEST_LABEL
    fixture = load_fixture("best_dm_auc_alpha4")
    assert add_best_method(fixture, "dm_auc", 4.0)[1] < 1.0
    collapse = load_fixture("best_minimax_collapse")
    for alpha in (1.0, 2.0, 3.0, 4.0):
        assert add_best_method(collapse, "minimax", alpha)[1] < 1.0
    with pytest.raises(ValueError):
        add_best_method(q, "ma", 4.5)


def test_add_similar_curve_averages_over_targets(q):
    rep = add_similar_curve(q, "ma", [0.9, 1.0])
    assert rep.count == [6, 6] and rep.mean[1] == 1.0


def crossing_fixture():
    # A is best near beta=1, B overtakes once beta passes 2; C is far behind
    return mat([[1.0, 1 / 1.5, 0.2], [1.0, 1 / 1.5, 0.2], [0.25, 1.0, 0.2]], ("A", "B", "C"))


def test_beta_sensitivity_crossing_and_saturation():
    q = crossing_fixture()
    reps = beta_sensitivity(q, [1.5, 1.9, 3.0, 6.0, 8.0, 10.0])
    auc = reps["dm_auc"]
    assert auc.mean[2] == 1.0
    assert auc.mean[0] == pytest.approx(0.5) and auc.mean[1] == pytest.approx(0.5)
    # beyond the largest finite ratio (5) every profile is saturated
    assert auc.mean[3] == auc.mean[4] == auc.mean[5] == 1.0
    assert set(reps) == {"dm_auc", "dm_lbo"}
    with pytest.raises(ValueError):
        beta_sensitivity(q, [1.0, 2.0])


def test_pareto_check(q):
    planted = q.with_column("top", q.values.max(axis=1) + 0.01)
    for rule in RULE_NAMES:
        ok, bad = pareto_check(planted, rule)
        assert ok and not bad
    assert pareto_check(mat([[0.9, 0.1], [0.1, 0.9]]), "ma") == (True, [])

    def negated(m):
        return make_leaderboard("neg", m.methods, -m.values.mean(axis=0), higher_is_better=True)

    ok, bad = pareto_check(planted, negated)
    assert not ok and all(a == "top" for a, _ in bad)


@pytest.mark.parametrize("kind", ["drop-datasets", "drop-methods", "subset-pairs",
                                  "add-similar", "add-best", "beta"])
def test_stress_kinds_produce_valid_reports(q, kind):
    reps = stress(q, kind, rules=("ma", "dm_auc"), trials=3)
    assert reps
    for rep in reps:
        assert all(-1 <= v <= 1 for v in rep.mean) and all(c > 0 for c in rep.count)
        doc = rep.to_doc()
        assert json.loads(json.dumps(doc))["points"][0]["count"] > 0
    with pytest.raises(ValueError):
        stress(q, "shuffle")


def test_tied_rankings_agreement():
    a = make_leaderboard("x", ("A", "B", "C"), [1.0, 1.0, 1.0], True)
    b = make_leaderboard("x", ("A", "B", "C"), [3.0, 2.0, 1.0], True)
    assert ranking_agreement(a, a) == 1.0
    assert ranking_agreement(a, b) == 0.0


@pytest.mark.parametrize("path", sorted(FIXTURES.glob("*.json")), ids=lambda p: p.stem)
def test_fixtures_regenerate_from_seed(path):
    doc = json.loads(path.read_text())
    kw = {k: (tuple(v) if isinstance(v, list) else v) for k, v in doc["search"].items()}
    calls = itertools.count()
    found = search_counterexample(lambda _: next(calls) == doc["candidate"], seed=doc["seed"],
                                  max_tries=doc["candidate"] + 1, **kw)
    assert found is not None and found[0] == doc["candidate"]
    regenerated = found[1]
    if doc["name"] == "drop_methods_minimax_vs_geom":
        regenerated[:, 0] = regenerated.max(axis=1) * 1.05
    assert np.array_equal(regenerated, np.array(doc["q"]))
