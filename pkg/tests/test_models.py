import numpy as np
import pytest

from recrank.corpus import from_records, temporal_split
from recrank.models import (EASEModel, ModelConfig, ModelError, cosine_similarity, fit_ease,
                            fit_itemknn, fit_model, fit_mostpop, fit_random, refit_final, tune)


def dense_set(mat):
    users, items = np.nonzero(mat)
    return from_records([f"u{u}" for u in users], [f"i{i}" for i in items])


def random_binary(seed, n_users=8, n_items=6, density=0.4):
    rng = np.random.default_rng(seed)
    mat = (rng.random((n_users, n_items)) < density).astype(float)
    mat[np.arange(n_users), rng.integers(0, n_items, n_users)] = 1.0
    mat[rng.integers(0, n_users, n_items), np.arange(n_items)] = 1.0
    return mat


def item_order(data):
    """Column order of the set's item indices in terms of original 'i<n>' labels."""
    return [int(s[1:]) for s in data.item_ids]


def seen_of(data):
    return {u: set(data.items[data.users == u].tolist()) for u in range(data.n_users)}


def test_random_is_deterministic_and_unseen():
    data = dense_set(random_binary(0, 20, 15))
    a = fit_random(data, seed=3).recommend(k=5)
    b = fit_random(data, seed=3).recommend(k=5)
    assert np.array_equal(a.items, b.items)
    seen = seen_of(data)
    for u, row in zip(a.users, a.items):
        assert not (set(row[row >= 0].tolist()) & seen[u])
        assert len(set(row.tolist())) == len(row)


def test_random_user_who_saw_everything_gets_empty_list():
    mat = np.ones((2, 3))
    mat[1, 2] = 0
    recs = fit_random(dense_set(mat)).recommend(k=3)
    assert (recs.items[0] < 0).all()
    assert recs.items[1].tolist()[:1] != [-1]


def test_random_top1_is_uniform():
    mat = np.zeros((10_000, 5))
    mat[:, 0] = 1
    mat[0, 1:] = 1           # make every item part of the catalog
    data = dense_set(mat)
    recs = fit_random(data, seed=1).recommend(k=1)
    top = recs.items[1:, 0]
    freq = np.bincount(top, minlength=data.n_items)[1:] / len(top)
    assert np.allclose(freq, 0.25, atol=0.02)


def test_mostpop_order_and_seen_filter():
    users = ["a"] * 3 + ["b"] * 3 + ["c"] * 3
    items = ["x", "y", "z", "x", "y", "w", "x", "v", "q"]
    data = from_records(users, items)
    model = fit_mostpop(data)
    # counts: x 3, y 2, others 1
    recs = model.recommend(np.array([1]), k=3)       # user b saw x, y, w
    labels = [data.item_ids[i] for i in recs.items[0]]
    assert labels == ["z", "v", "q"]


def test_mostpop_equal_counts_use_index_order():
    data = dense_set(np.eye(4))
    recs = fit_mostpop(data).recommend(np.array([0]), k=3)
    assert recs.items[0].tolist() == [1, 2, 3]


@pytest.mark.parametrize("seed", range(5))
def test_mostpop_matches_sort_then_filter_oracle(seed):
    data = dense_set(random_binary(seed, 30, 20, 0.3))
    counts = np.bincount(data.items, minlength=data.n_items)
    ranking = sorted(range(data.n_items), key=lambda i: (-counts[i], i))
    recs = fit_mostpop(data).recommend(k=5)
    seen = seen_of(data)
    for u, row in zip(recs.users, recs.items):
        expected = [i for i in ranking if i not in seen[u]][:5]
        assert row[row >= 0].tolist() == expected


def test_cosine_similarity_basics():
    mat = np.array([[1, 1, 0], [1, 1, 0], [0, 0, 1]], float)
    data = dense_set(mat)
    sim = cosine_similarity(data.matrix())
    assert sim[0, 1] == pytest.approx(1.0)
    assert sim[0, 2] == 0.0
    assert np.allclose(sim, sim.T)
    assert np.allclose(np.diag(sim), 1.0)


def test_cosine_zero_column_is_zero_not_nan():
    import scipy.sparse as sp
    sim = cosine_similarity(sp.csr_matrix(np.array([[1.0, 0.0], [1.0, 0.0]])))
    assert np.isfinite(sim).all() and sim[1, 1] == 0.0 and sim[0, 1] == 0.0


@pytest.mark.parametrize("neighbors", [1, 2, 5])
def test_itemknn_scores_match_dense_oracle(neighbors):
    mat = random_binary(7)
    data = dense_set(mat)
    x = data.matrix().toarray()
    norms = np.sqrt(x.sum(axis=0))
    sim = (x.T @ x) / np.outer(norms, norms)
    n = sim.shape[0]
    w = np.zeros_like(sim)
    for i in range(n):
        cands = sorted((j for j in range(n) if j != i), key=lambda j: (-sim[i, j], j))
        for j in cands[:neighbors]:
            w[j, i] = sim[i, j]
    model = fit_itemknn(data, neighbors)
    assert np.allclose(model.scores(np.arange(data.n_users)), x @ w, atol=1e-12, rtol=0)


def gauss_jordan_inverse(a):
    a = [list(map(float, row)) + [1.0 if i == j else 0.0 for j in range(len(a))]
         for i, row in enumerate(a)]
    n = len(a)
    for c in range(n):
        p = max(range(c, n), key=lambda r: abs(a[r][c]))
        a[c], a[p] = a[p], a[c]
        piv = a[c][c]
        a[c] = [v / piv for v in a[c]]
        for r in range(n):
            if r != c:
                f = a[r][c]
                a[r] = [v - f * w for v, w in zip(a[r], a[c])]
    return np.array([row[n:] for row in a])


def test_ease_matches_elimination_oracle():
    mat = random_binary(3, 10, 5, 0.5)
    data = dense_set(mat)
    x = data.matrix().toarray()
    p = gauss_jordan_inverse(x.T @ x + np.eye(5))
    b = -p / np.diag(p)[None, :]
    np.fill_diagonal(b, 0.0)
    model = fit_ease(data, 1.0)
    assert np.allclose(model.weights, b, atol=1e-10, rtol=0)
    assert np.all(np.diag(model.weights) == 0.0)


def test_ease_linear_in_user_row():
    data = dense_set(random_binary(4, 12, 8))
    model = fit_ease(data, 10.0)
    u1 = np.zeros(data.n_items)
    u2 = np.zeros(data.n_items)
    u1[[0, 2]] = 1
    u2[[5]] = 1
    assert np.allclose((u1 + u2) @ model.weights, u1 @ model.weights + u2 @ model.weights)


def test_ease_huge_lambda_degenerates_to_index_order():
    data = dense_set(random_binary(5, 12, 8))
    model = fit_ease(data, 1e300)
    assert np.abs(model.weights).max() < 1e-250


def test_ease_item_cap():
    data = dense_set(random_binary(5, 12, 8))
    with pytest.raises(ModelError, match="externally"):
        EASEModel(data, 1.0, max_items=4)
    with pytest.raises(ModelError):
        fit_ease(data, 0.0)


def test_model_config_validation():
    with pytest.raises(ModelError):
        ModelConfig("ItemKNN", {"neighbors": 0})
    with pytest.raises(ModelError):
        ModelConfig("EASE", {"lambda": -1.0})
    with pytest.raises(ModelError):
        ModelConfig("SVD", {})


def synthetic_bundle(seed=0):
    from recrank.corpus import binarize
    from recrank.synthetic import planted_interactions
    data = binarize(planted_interactions(300, 80, 4, 12.0, seed=seed), scale="rating_0_5")
    return temporal_split(data)


def test_tune_parameterless_and_deterministic():
    bundle = synthetic_bundle()
    assert tune("Random", bundle, budget=40).params == {}
    a = tune("EASE", bundle, budget=5, seed=2)
    b = tune("EASE", bundle, budget=5, seed=2)
    assert a == b and a.validation_ndcg is not None
    one = tune("ItemKNN", bundle, budget=1, seed=9)
    assert 5 <= one.params["neighbors"] <= 200
    with pytest.raises(ModelError):
        tune("EASE", bundle, budget=0)


def test_refit_final_uses_train_and_validation():
    bundle = synthetic_bundle(1)
    tv = bundle.trainval()
    pop = refit_final(ModelConfig("MostPop", {}), bundle)
    expected = np.bincount(tv.items, minlength=tv.n_items)
    assert np.array_equal(pop.item_counts, expected)
    ease_tv = refit_final(ModelConfig("EASE", {"lambda": 50.0}), bundle)
    ease_train = fit_model(ModelConfig("EASE", {"lambda": 50.0}), bundle.train)
    assert not np.allclose(ease_tv.weights, ease_train.weights)
    seen = seen_of(tv)
    recs = ease_tv.recommend(k=10)
    for u, row in zip(recs.users, recs.items):
        assert not (set(row[row >= 0].tolist()) & seen[u])
