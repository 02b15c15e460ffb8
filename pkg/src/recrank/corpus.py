"""Interaction logs: parsing, preprocessing, temporal splitting.

Everything here is a pure function from an immutable :class:`InteractionSet`
to a new one. Records are stored column-wise as numpy arrays; users and items
are addressed by dense integer indices with the original opaque ids kept in
``user_ids`` / ``item_ids``.
"""
from __future__ import annotations

import csv
import io
import logging
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, TextIO

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)

RATING_THRESHOLD = 3.5
WEIGHT_THRESHOLD = 0.3
EVENT_WEIGHT_EPS = 1e-9

_ALIASES = {
    "user": ("user_id", "user", "userid", "u"),
    "item": ("item_id", "item", "itemid", "i"),
    "weight": ("weight", "rating", "w", "value"),
    "timestamp": ("timestamp", "time", "ts", "t"),
    "event": ("event", "event_type", "e"),
}


class CorpusError(ValueError):
    """Raised for malformed input or a preprocessing step that empties the data."""


@dataclass(frozen=True, eq=False)
class InteractionSet:
    """Column-wise interaction records with dense user/item index maps.

    ``users[r]`` and ``items[r]`` index into ``user_ids`` / ``item_ids``.
    Splits derived from one set share its index maps, so ``n_users`` is the
    size of the map, not necessarily the number of users with records.
    """

    users: np.ndarray
    items: np.ndarray
    weights: np.ndarray
    timestamps: np.ndarray
    user_ids: np.ndarray
    item_ids: np.ndarray
    events: np.ndarray | None = None
    event_labels: tuple[str, ...] | None = field(default=None)

    def __post_init__(self):
        n = len(self.users)
        if not (len(self.items) == len(self.weights) == len(self.timestamps) == n):
            raise CorpusError("record columns have different lengths")
        if self.events is not None and len(self.events) != n:
            raise CorpusError("event column length mismatch")
        if n:
            if self.timestamps.min() < 0:
                raise CorpusError("timestamps must be non-negative")
            if not np.isfinite(self.weights).all():
                raise CorpusError("weights must be finite")
            if self.users.max() >= len(self.user_ids) or self.items.max() >= len(self.item_ids):
                raise CorpusError("record index outside the index map")

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    @property
    def n_records(self) -> int:
        return len(self.users)

    def __len__(self) -> int:
        return self.n_records

    @cached_property
    def user_index(self) -> dict[str, int]:
        return {uid: i for i, uid in enumerate(self.user_ids)}

    @cached_property
    def item_index(self) -> dict[str, int]:
        return {iid: i for i, iid in enumerate(self.item_ids)}

    def active_users(self) -> np.ndarray:
        return np.unique(self.users)

    def active_items(self) -> np.ndarray:
        return np.unique(self.items)

    def take(self, selector) -> InteractionSet:
        """Subset of records (boolean mask or index array); index maps are shared."""
        return InteractionSet(
            users=self.users[selector],
            items=self.items[selector],
            weights=self.weights[selector],
            timestamps=self.timestamps[selector],
            user_ids=self.user_ids,
            item_ids=self.item_ids,
            events=None if self.events is None else self.events[selector],
            event_labels=self.event_labels,
        )

    def compact(self) -> InteractionSet:
        """Drop unused ids and renumber densely, keeping the relative id order."""
        used_u = np.unique(self.users)
        used_i = np.unique(self.items)
        u_map = np.full(self.n_users, -1, np.int64)
        u_map[used_u] = np.arange(len(used_u))
        i_map = np.full(self.n_items, -1, np.int64)
        i_map[used_i] = np.arange(len(used_i))
        return InteractionSet(
            users=u_map[self.users],
            items=i_map[self.items],
            weights=self.weights,
            timestamps=self.timestamps,
            user_ids=self.user_ids[used_u],
            item_ids=self.item_ids[used_i],
            events=self.events,
            event_labels=self.event_labels,
        )

    def with_weights(self, weights: np.ndarray) -> InteractionSet:
        return InteractionSet(
            self.users, self.items, np.asarray(weights, np.float64), self.timestamps,
            self.user_ids, self.item_ids, self.events, self.event_labels,
        )

    def matrix(self, binary: bool = True) -> sp.csr_matrix:
        """Users x items CSR matrix over the full index maps."""
        values = np.ones(self.n_records) if binary else self.weights
        mat = sp.csr_matrix(
            (values, (self.users, self.items)), shape=(self.n_users, self.n_items)
        )
        if binary:
            mat.data[:] = 1.0
        mat.sort_indices()
        return mat

    def has_duplicates(self) -> bool:
        keys = self.users * self.n_items + self.items
        return len(np.unique(keys)) != len(keys)

    @staticmethod
    def concat(parts: Iterable[InteractionSet]) -> InteractionSet:
        """Concatenate sets that share index maps."""
        parts = list(parts)
        first = parts[0]
        for p in parts[1:]:
            if p.user_ids is not first.user_ids or p.item_ids is not first.item_ids:
                raise CorpusError("can only concatenate sets sharing index maps")
        has_events = all(p.events is not None for p in parts)
        return InteractionSet(
            users=np.concatenate([p.users for p in parts]),
            items=np.concatenate([p.items for p in parts]),
            weights=np.concatenate([p.weights for p in parts]),
            timestamps=np.concatenate([p.timestamps for p in parts]),
            user_ids=first.user_ids,
            item_ids=first.item_ids,
            events=np.concatenate([p.events for p in parts]) if has_events else None,
            event_labels=first.event_labels,
        )


@dataclass(frozen=True, eq=False)
class SplitBundle:
    train: InteractionSet
    validation: InteractionSet
    test: InteractionSet
    boundaries: tuple[int, int]

    def trainval(self) -> InteractionSet:
        return InteractionSet.concat([self.train, self.validation])


def from_records(
    users: Iterable, items: Iterable, weights=None, timestamps=None, events=None
) -> InteractionSet:
    """Build a set from parallel columns of opaque ids, indexing by first appearance."""
    users = [str(u) for u in users]
    items = [str(i) for i in items]
    n = len(users)
    u_idx: dict[str, int] = {}
    i_idx: dict[str, int] = {}
    u_col = np.fromiter((u_idx.setdefault(u, len(u_idx)) for u in users), np.int64, n)
    i_col = np.fromiter((i_idx.setdefault(i, len(i_idx)) for i in items), np.int64, n)
    w = np.ones(n) if weights is None else np.asarray(weights, np.float64)
    t = np.arange(n, dtype=np.int64) if timestamps is None else np.asarray(timestamps, np.int64)
    e = None if events is None else np.asarray(events, np.int64)
    return InteractionSet(
        u_col, i_col, w, t,
        np.array(list(u_idx), dtype=object), np.array(list(i_idx), dtype=object), e,
    )


def _resolve_columns(header: list[str], schema: Mapping[str, str] | None) -> dict[str, int]:
    lowered = [h.strip().lower() for h in header]
    cols: dict[str, int] = {}
    for role, aliases in _ALIASES.items():
        if schema and role in schema:
            name = schema[role].strip().lower()
            if name not in lowered:
                raise CorpusError(f"column {schema[role]!r} for {role} not in header")
            cols[role] = lowered.index(name)
            continue
        for alias in aliases:
            if alias in lowered:
                cols[role] = lowered.index(alias)
                break
    for required in ("user", "item"):
        if required not in cols:
            raise CorpusError(f"header lacks a {required} column: {header}")
    return cols


def _parse_time(raw: str, scale: int) -> int:
    raw = raw.strip()
    try:
        return int(raw) * scale
    except ValueError:
        value = float(raw)
        if not np.isfinite(value):
            raise ValueError(f"non-finite timestamp {raw!r}") from None
        return int(round(value * scale))


def parse_interactions(
    source: str | os.PathLike | TextIO,
    schema: Mapping[str, str] | None = None,
    delimiter: str | None = None,
    time_unit: str = "ms",
) -> InteractionSet:
    """Parse a delimited interaction log with a header row.

    Args:
        source: path or open text stream.
        schema: optional mapping from role (user, item, weight, timestamp,
            event) to a header name; unmapped roles fall back to common aliases.
        delimiter: ``","`` or ``"\\t"``; detected from the header when omitted.
        time_unit: ``"ms"`` or ``"s"``; seconds are converted to milliseconds.

    Missing weights default to 1.0 and missing timestamps to the data-row
    index. Event values that are all integers are kept as codes, otherwise
    labels are coded by first appearance.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8", newline="") as fh:
            return parse_interactions(fh, schema, delimiter, time_unit)
    if time_unit not in ("ms", "s"):
        raise CorpusError(f"unknown time unit {time_unit!r}")
    header_line = source.readline()
    if not header_line.strip():
        raise CorpusError("empty input")
    if delimiter is None:
        delimiter = "\t" if "\t" in header_line else ","
    header = next(csv.reader([header_line], delimiter=delimiter))
    cols = _resolve_columns(header, schema)
    scale = 1000 if time_unit == "s" else 1

    users, items, weights, stamps, events = [], [], [], [], []
    for offset, row in enumerate(csv.reader(source, delimiter=delimiter)):
        line = offset + 2
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(header):
            raise CorpusError(f"line {line}: expected {len(header)} fields, got {len(row)}")
        try:
            users.append(row[cols["user"]].strip())
            items.append(row[cols["item"]].strip())
            weights.append(float(row[cols["weight"]]) if "weight" in cols else 1.0)
            if "timestamp" in cols:
                stamps.append(_parse_time(row[cols["timestamp"]], scale))
            else:
                stamps.append(len(stamps))
        except ValueError as exc:
            raise CorpusError(f"line {line}: {exc}") from None
        if not np.isfinite(weights[-1]):
            raise CorpusError(f"line {line}: non-finite weight")
        if stamps[-1] < 0:
            raise CorpusError(f"line {line}: negative timestamp")
        if "event" in cols:
            events.append(row[cols["event"]].strip())
    if not users:
        raise CorpusError("no data rows")

    codes = labels = None
    if "event" in cols:
        try:
            codes = [int(e) for e in events]
        except ValueError:
            table: dict[str, int] = {}
            codes = [table.setdefault(e, len(table)) for e in events]
            labels = tuple(table)
    data = from_records(users, items, weights, stamps, codes)
    if labels is not None:
        data = InteractionSet(
            data.users, data.items, data.weights, data.timestamps,
            data.user_ids, data.item_ids, data.events, labels,
        )
    return data


def write_interactions(data: InteractionSet, target: str | os.PathLike | TextIO,
                       delimiter: str = ",") -> None:
    """Canonical serialisation: dense integer ids, one record per line."""
    if isinstance(target, (str, os.PathLike)):
        with open(target, "w", encoding="utf-8", newline="") as fh:
            write_interactions(data, fh, delimiter)
        return
    writer = csv.writer(target, delimiter=delimiter, lineterminator="\n")
    header = ["user_id", "item_id", "weight", "timestamp"]
    if data.events is not None:
        header.append("event")
    writer.writerow(header)
    for r in range(data.n_records):
        row = [int(data.users[r]), int(data.items[r]), repr(float(data.weights[r])),
               int(data.timestamps[r])]
        if data.events is not None:
            row.append(int(data.events[r]))
        writer.writerow(row)


def to_canonical_text(data: InteractionSet) -> str:
    buf = io.StringIO()
    write_interactions(data, buf)
    return buf.getvalue()


def deduplicate(data: InteractionSet) -> InteractionSet:
    """Keep one record per (user, item): the max weight, earliest in file order on ties."""
    if data.n_records == 0:
        return data
    keys = data.users * data.n_items + data.items
    order = np.lexsort((np.arange(data.n_records), -data.weights, keys))
    first = np.ones(len(order), bool)
    first[1:] = keys[order][1:] != keys[order][:-1]
    kept = np.sort(order[first])
    return data.take(kept)


def binarize(data: InteractionSet, tau: float | None = None,
             scale: str = "custom") -> InteractionSet:
    """Drop records with weight below ``tau`` and set survivors' weight to 1.

    ``scale="rating_0_5"`` defaults ``tau`` to 3.5, ``"weight_0_1"`` to 0.3.
    Duplicate (user, item) pairs are first collapsed to their max weight.
    """
    if tau is None:
        defaults = {"rating_0_5": RATING_THRESHOLD, "weight_0_1": WEIGHT_THRESHOLD}
        if scale not in defaults:
            raise CorpusError(f"scale {scale!r} needs an explicit tau")
        tau = defaults[scale]
    if not np.isfinite(tau):
        raise CorpusError("tau must be finite")
    if data.has_duplicates():
        data = deduplicate(data)
    kept = data.take(data.weights >= tau)
    if kept.n_records == 0:
        raise CorpusError("all interactions below threshold")
    return kept.with_weights(np.ones(kept.n_records)).compact()


def event_weights(events: np.ndarray) -> dict[int, float]:
    """Per-event weight ``total / count(event)``, clamped so rarer events weigh strictly more.

    Types are ordered by descending frequency (ties by ascending code); a type
    whose weight does not exceed its more frequent predecessor is raised to
    that weight plus 1e-9.
    """
    codes, counts = np.unique(events, return_counts=True)
    total = float(len(events))
    order = np.lexsort((codes, -counts))
    result: dict[int, float] = {}
    prev = None
    for pos in order:
        w = total / counts[pos]
        if prev is not None and w <= prev:
            w = prev + EVENT_WEIGHT_EPS
        result[int(codes[pos])] = w
        prev = w
    return result


def event_weight_collapse(data: InteractionSet) -> InteractionSet:
    """Weight events by rarity and collapse each (user, item) pair to one record.

    A pair keeps the weight of its most frequent event type; count ties go to
    the rarer (higher-weight) type. The surviving record carries the earliest
    timestamp of the chosen type, and pairs are emitted in order of their
    first appearance.
    """
    if data.events is None:
        raise CorpusError("event column absent")
    weights = event_weights(data.events)
    codes = np.array(sorted(weights), np.int64)
    code_pos = np.searchsorted(codes, data.events)
    w_of = np.array([weights[int(c)] for c in codes])

    pair = data.users * data.n_items + data.items
    pair_keys, pair_id, first_seen = _first_appearance(pair)
    n_pairs = len(pair_keys)
    n_types = len(codes)
    cell = pair_id * n_types + code_pos
    counts = np.bincount(cell, minlength=n_pairs * n_types).reshape(n_pairs, n_types)
    # most frequent type per pair, ties toward the higher weight
    tie_rank = np.argsort(np.argsort(w_of, kind="stable"), kind="stable")
    score = counts * (n_types + 1) + np.where(counts > 0, tie_rank[None, :] + 1, 0)
    chosen = np.argmax(score, axis=1)

    chosen_mask = code_pos == chosen[pair_id]
    stamps = np.full(n_pairs, np.iinfo(np.int64).max, np.int64)
    np.minimum.at(stamps, pair_id[chosen_mask], data.timestamps[chosen_mask])

    rep = first_seen
    return InteractionSet(
        users=data.users[rep],
        items=data.items[rep],
        weights=w_of[chosen],
        timestamps=stamps,
        user_ids=data.user_ids,
        item_ids=data.item_ids,
        events=codes[chosen],
        event_labels=data.event_labels,
    ).compact()


def _first_appearance(keys: np.ndarray):
    """Unique keys ordered by first appearance, per-record group id, and first index."""
    uniq, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    return uniq[order], rank[inverse], first[order]


def _drop_sparse(data: InteractionSet, axis: str, f: int) -> InteractionSet:
    col = data.items if axis == "items" else data.users
    size = data.n_items if axis == "items" else data.n_users
    counts = np.bincount(col, minlength=size)
    return data.take(counts[col] >= f)


def f_filter(data: InteractionSet, f: int, order: str = "items_then_users") -> InteractionSet:
    """Single-pass activity filter: one item drop and one user drop, in ``order``."""
    if f < 1:
        raise CorpusError("f must be >= 1")
    if order == "items_then_users":
        passes = ("items", "users")
    elif order == "users_then_items":
        passes = ("users", "items")
    else:
        raise CorpusError(f"unknown filter order {order!r}")
    for axis in passes:
        data = _drop_sparse(data, axis, f)
    if data.n_records == 0:
        raise CorpusError(f"{f}-filter removed every interaction")
    return data.compact()


def f_core(data: InteractionSet, f: int) -> InteractionSet:
    """Iterate item and user drops until every user and item has >= f records."""
    if f < 1:
        raise CorpusError("f must be >= 1")
    while True:
        before = data.n_records
        data = _drop_sparse(_drop_sparse(data, "items", f), "users", f)
        if data.n_records == before or data.n_records == 0:
            break
    if data.n_records == 0:
        raise CorpusError(f"{f}-core is empty")
    return data.compact()


def temporal_split(data: InteractionSet,
                   ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)) -> SplitBundle:
    """Global temporal split at the ratio quantiles of the timestamp order.

    Records sharing a boundary timestamp go to the earlier split, so every
    train timestamp is strictly below every validation timestamp, and so on.
    """
    if len(ratios) != 3 or min(ratios) <= 0:
        raise CorpusError("ratios must be three positive numbers")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise CorpusError(f"ratios must sum to 1, got {sum(ratios)}")
    n = data.n_records
    ts = np.sort(data.timestamps, kind="stable")
    cut_train = int(round(ratios[0] * n))
    cut_val = int(round((ratios[0] + ratios[1]) * n))
    if cut_train < 1 or cut_val <= cut_train or cut_val >= n:
        raise CorpusError("too few records for a three-way split")
    last_train = ts[cut_train - 1]
    last_val = max(ts[cut_val - 1], last_train)
    in_train = data.timestamps <= last_train
    in_val = (data.timestamps > last_train) & (data.timestamps <= last_val)
    in_test = data.timestamps > last_val
    parts = [data.take(in_train), data.take(in_val), data.take(in_test)]
    for name, part in zip(("train", "validation", "test"), parts):
        if part.n_records == 0:
            raise CorpusError(f"{name} split is empty (timestamps too coarse)")
    bounds = (int(parts[1].timestamps.min()), int(parts[2].timestamps.min()))
    return SplitBundle(*parts, boundaries=bounds)


def prune_cold(bundle: SplitBundle) -> SplitBundle:
    """Remove validation/test records whose user or item never occurs in train."""
    train = bundle.train
    warm_u = np.zeros(train.n_users, bool)
    warm_u[train.users] = True
    warm_i = np.zeros(train.n_items, bool)
    warm_i[train.items] = True

    def warm(part: InteractionSet) -> InteractionSet:
        return part.take(warm_u[part.users] & warm_i[part.items])

    val, test = warm(bundle.validation), warm(bundle.test)
    if test.n_records == 0:
        raise CorpusError("test split empty after removing cold users and items")
    dropped = bundle.test.n_records - test.n_records
    if dropped:
        logger.info("pruned %d cold test records", dropped)
    return SplitBundle(train, val, test, bundle.boundaries)
