import io
from collections import Counter

import numpy as np
import pytest

from recrank.corpus import (CorpusError, binarize, event_weight_collapse, event_weights,
                            f_core, f_filter, from_records, parse_interactions, prune_cold,
                            temporal_split, to_canonical_text, SplitBundle)


def pairs(data):
    return sorted((data.user_ids[u], data.item_ids[i]) for u, i in zip(data.users, data.items))


def test_parse_small_file():
    data = parse_interactions(io.StringIO("u,i,w,t\na,x,5,10\nb,x,4,20\n"))
    assert (data.n_users, data.n_items, data.n_records) == (2, 1, 2)
    assert data.weights.tolist() == [5.0, 4.0]
    assert data.timestamps.tolist() == [10, 20]


def test_parse_error_names_line():
    with pytest.raises(CorpusError, match="line 2"):
        parse_interactions(io.StringIO("u,i,w,t\na,x,abc,10\n"))


def test_parse_empty_and_ragged():
    with pytest.raises(CorpusError):
        parse_interactions(io.StringIO(""))
    with pytest.raises(CorpusError, match="line 3"):
        parse_interactions(io.StringIO("u,i\na,x\nb\n"))


def test_parse_defaults_and_tab_detection():
    data = parse_interactions(io.StringIO("user_id\titem_id\na\tx\nb\ty\na\ty\n"))
    assert data.weights.tolist() == [1.0, 1.0, 1.0]
    assert data.timestamps.tolist() == [0, 1, 2]


def test_parse_seconds_to_milliseconds():
    data = parse_interactions(io.StringIO("u,i,t\na,x,3\n"), time_unit="s")
    assert data.timestamps.tolist() == [3000]


def test_parse_thousand_rows_against_text_oracle():
    rng = np.random.default_rng(0)
    rows = [f"u{rng.integers(50)},i{rng.integers(80)},{rng.integers(1, 6)},{t}"
            for t in range(1000)]
    text = "user_id,item_id,rating,timestamp\n" + "\n".join(rows) + "\n"
    data = parse_interactions(io.StringIO(text))
    assert data.n_records == 1000
    assert data.n_users == len({r.split(",")[0] for r in rows})
    assert data.n_items == len({r.split(",")[1] for r in rows})
    assert data.users.max() < data.n_users and data.items.max() < data.n_items


def test_canonical_round_trip():
    data = from_records(["a", "b", "a"], ["x", "y", "y"], [1, 2, 3], [5, 6, 7])
    text = to_canonical_text(data)
    again = parse_interactions(io.StringIO(text))
    assert to_canonical_text(again) == text


def test_binarize_rating_threshold():
    data = from_records(list("abcd"), list("wxyz"), [5, 4, 3, 2])
    out = binarize(data, scale="rating_0_5")
    assert out.n_records == 2 and out.weights.tolist() == [1.0, 1.0]
    assert out.n_users == 2 and out.n_items == 2


def test_binarize_weight_threshold_and_idempotence():
    data = from_records(list("abc"), list("xyz"), [0.1, 0.3, 0.9])
    out = binarize(data, scale="weight_0_1")
    assert pairs(out) == [("b", "y"), ("c", "z")]
    again = binarize(out, 1.0)
    assert pairs(again) == pairs(out)


def test_binarize_errors():
    data = from_records(["a"], ["x"], [1.0])
    with pytest.raises(CorpusError, match="all interactions below threshold"):
        binarize(data, 2.0)
    with pytest.raises(CorpusError):
        binarize(data, scale="custom")
    with pytest.raises(CorpusError):
        binarize(data, float("nan"))


def test_binarize_collapses_duplicates_to_max():
    data = from_records(["a", "a"], ["x", "x"], [2.0, 5.0])
    assert binarize(data, 3.5).n_records == 1


def test_event_weights_formula():
    events = np.array([0] * 8 + [1] * 2)
    w = event_weights(events)
    assert w == {0: pytest.approx(1.25), 1: pytest.approx(5.0)}


def test_event_weights_clamp_equal_frequency():
    w = event_weights(np.array([0, 0, 1, 1]))
    assert w[1] > w[0]


def test_event_collapse_most_frequent_type():
    # pair (a, x): 3 views and 1 purchase; pair (b, y): 1 view, 1 purchase
    users = ["a"] * 4 + ["b", "b"] + ["c"] * 4
    items = ["x"] * 4 + ["y", "y"] + ["z"] * 4
    events = [0, 0, 0, 1, 0, 1, 0, 0, 0, 0]
    data = from_records(users, items, timestamps=range(10), events=events)
    w = event_weights(np.array(events))
    out = event_weight_collapse(data)
    got = {(out.user_ids[u], out.item_ids[i]): wt
           for u, i, wt in zip(out.users, out.items, out.weights)}
    assert got[("a", "x")] == pytest.approx(w[0])
    assert got[("b", "y")] == pytest.approx(w[1])
    assert out.n_records == 3


def test_event_collapse_single_type():
    data = from_records(["a", "a", "b"], ["x", "x", "x"], events=[4, 4, 4])
    out = event_weight_collapse(data)
    assert out.n_records == 2 and np.all(out.weights == 1.0)


def test_event_collapse_requires_events():
    with pytest.raises(CorpusError):
        event_weight_collapse(from_records(["a"], ["x"]))


def brute_filter(records, f):
    items = Counter(i for _, i in records)
    records = [r for r in records if items[r[1]] >= f]
    users = Counter(u for u, _ in records)
    return sorted(r for r in records if users[r[0]] >= f)


def brute_core(records, f):
    while True:
        items = Counter(i for _, i in records)
        users = Counter(u for u, _ in records)
        kept = [r for r in records if items[r[1]] >= f and users[r[0]] >= f]
        if len(kept) == len(records):
            return sorted(kept)
        records = kept


def random_grid(seed, n=6, density=0.5):
    rng = np.random.default_rng(seed)
    return [(f"u{u}", f"i{i}") for u in range(n) for i in range(n) if rng.random() < density]


@pytest.mark.parametrize("seed", range(20))
def test_f_filter_matches_brute_force(seed):
    recs = random_grid(seed)
    data = from_records(*zip(*recs))
    expected = brute_filter(recs, 3)
    if not expected:
        with pytest.raises(CorpusError):
            f_filter(data, 3)
    else:
        assert pairs(f_filter(data, 3)) == expected


def test_f_filter_keeps_low_items_removes_user():
    recs = [(f"u{u}", f"i{i}") for u in range(5) for i in range(5)]
    recs += [("low", "i0"), ("low", "i1"), ("low", "i2"), ("low", "i3")]
    out = f_filter(from_records(*zip(*recs)), 5)
    assert "low" not in set(out.user_ids)
    assert out.n_items == 5


def test_f_filter_identity_at_one():
    recs = random_grid(1)
    data = from_records(*zip(*recs))
    assert pairs(f_filter(data, 1)) == pairs(data)


@pytest.mark.parametrize("seed", range(20))
def test_f_core_matches_brute_force_and_is_fixed_point(seed):
    recs = random_grid(seed, n=8, density=0.55)
    data = from_records(*zip(*recs))
    expected = brute_core(recs, 3)
    if not expected:
        with pytest.raises(CorpusError):
            f_core(data, 3)
        return
    out = f_core(data, 3)
    assert pairs(out) == expected
    assert pairs(f_core(out, 3)) == expected


def test_f_core_complete_bipartite_identity():
    recs = [(f"u{u}", f"i{i}") for u in range(5) for i in range(5)]
    assert len(pairs(f_core(from_records(*zip(*recs)), 5))) == 25


def test_f_core_chain_cascade():
    recs = [("u0", "i0"), ("u0", "i1"), ("u1", "i1"), ("u1", "i2"), ("u2", "i2")]
    with pytest.raises(CorpusError):
        f_core(from_records(*zip(*recs)), 2)


def test_temporal_split_exact_quantiles():
    data = from_records([f"u{t}" for t in range(10)], ["x"] * 10, timestamps=range(1, 11))
    b = temporal_split(data)
    assert sorted(b.train.timestamps.tolist()) == list(range(1, 9))
    assert b.validation.timestamps.tolist() == [9]
    assert b.test.timestamps.tolist() == [10]
    assert b.boundaries == (9, 10)


def test_temporal_split_degenerate():
    data = from_records(["a"] * 10, ["x"] * 10, timestamps=[5] * 10)
    with pytest.raises(CorpusError):
        temporal_split(data)
    with pytest.raises(CorpusError):
        temporal_split(data, (0.5, 0.3, 0.3))


def test_temporal_split_duplicate_boundaries_are_monotone():
    rng = np.random.default_rng(3)
    ts = rng.integers(0, 50, size=1000)
    data = from_records(rng.integers(0, 30, 1000), rng.integers(0, 40, 1000), timestamps=ts)
    b = temporal_split(data)
    assert b.train.timestamps.max() < b.validation.timestamps.min()
    assert b.validation.timestamps.max() < b.test.timestamps.min()
    assert b.train.n_records + b.validation.n_records + b.test.n_records == 1000


def test_prune_cold_membership_oracle():
    rng = np.random.default_rng(4)
    n = 600
    data = from_records(rng.integers(0, 60, n), rng.integers(0, 80, n), timestamps=range(n))
    b = prune_cold(temporal_split(data))
    train_u, train_i = set(b.train.users.tolist()), set(b.train.items.tolist())
    raw = temporal_split(data)
    expected = [(u, i) for u, i in zip(raw.test.users.tolist(), raw.test.items.tolist())
                if u in train_u and i in train_i]
    assert list(zip(b.test.users.tolist(), b.test.items.tolist())) == expected
    for part in (b.validation, b.test):
        assert set(part.users.tolist()) <= train_u
        assert set(part.items.tolist()) <= train_i


def test_prune_cold_errors_when_test_empty():
    data = from_records(["a", "b", "c"], ["x", "y", "z"], timestamps=[1, 2, 3])
    b = temporal_split(data, (0.34, 0.33, 0.33))
    with pytest.raises(CorpusError):
        prune_cold(b)


def test_split_bundle_trainval():
    data = from_records([f"u{t % 3}" for t in range(20)], [f"i{t % 4}" for t in range(20)],
                        timestamps=range(20))
    b = temporal_split(data)
    assert isinstance(b, SplitBundle)
    assert b.trainval().n_records == b.train.n_records + b.validation.n_records
