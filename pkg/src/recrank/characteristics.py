"""Eighteen descriptive statistics of an implicit-feedback dataset.

The vector covers size and shape, per-user and per-item activity,
concentration (Gini), popularity bias inside user profiles and the shape of
the long tail of item counts. All moments use the population (1/n)
convention; skewness and excess kurtosis of a constant vector are 0.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import astuple, dataclass, fields
from typing import Iterable

import numpy as np

from .corpus import InteractionSet

LONG_TAIL_SHARE = 0.2


class CharacteristicsError(ValueError):
    pass


@dataclass(frozen=True)
class CharacteristicsVector:
    SpaceSize: float
    Shape: float
    Density: float
    Nu: float
    Ni: float
    Nr: float
    Rpu: float
    Rpi: float
    Giniu: float
    Ginii: float
    APB: float
    StPB: float
    SkPB: float
    KuPB: float
    LTavg: float
    LTstd: float
    LTsk: float
    LTku: float

    @classmethod
    def names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names(), astuple(self)))


def gini(counts) -> float:
    """Gini coefficient ``sum_i (2i - n - 1) c_i / (n sum c)`` over ascending counts."""
    c = np.sort(np.asarray(counts, dtype=np.float64))
    n = len(c)
    total = c.sum()
    if n == 0 or total == 0:
        return 0.0
    i = np.arange(1, n + 1)
    return float(np.sum((2 * i - n - 1) * c) / (n * total))


def moments(x) -> tuple[float, float, float, float]:
    """Mean, std, skewness and excess kurtosis, population convention."""
    x = np.asarray(x, dtype=np.float64)
    mean = float(x.mean())
    centered = x - mean
    var = float(np.mean(centered**2))
    if var <= 1e-300 or np.all(x == x[0]):
        return mean, 0.0, 0.0, 0.0
    std = math.sqrt(var)
    skew = float(np.mean(centered**3)) / std**3
    kurt = float(np.mean(centered**4)) / var**2 - 3.0
    return mean, std, skew, kurt


def long_tail(counts) -> np.ndarray:
    """Counts of the long tail: the largest low-popularity suffix (descending order)
    holding at most 20% of all interactions; at least the least popular item."""
    c = np.sort(np.asarray(counts, dtype=np.float64))[::-1]
    total = c.sum()
    suffix = np.cumsum(c[::-1])  # suffix[j] = mass of the j+1 least popular items
    size = int(np.searchsorted(suffix, LONG_TAIL_SHARE * total * (1 + 1e-12), side="right"))
    return c[len(c) - max(size, 1):]


def compute_characteristics(data: InteractionSet) -> CharacteristicsVector:
    mat = data.matrix()
    user_counts = np.diff(mat.indptr)
    item_counts = np.diff(mat.tocsc().indptr)
    user_counts = user_counts[user_counts > 0]
    active_items = np.flatnonzero(item_counts > 0)
    item_counts = item_counts[active_items]
    nu, ni, nr = len(user_counts), len(item_counts), int(mat.nnz)
    if nu < 2 or ni < 2:
        raise CharacteristicsError(f"need at least 2 users and 2 items, got {nu} and {ni}")

    popularity = np.zeros(mat.shape[1])
    popularity[active_items] = item_counts / nr
    csr = mat.copy()
    csr.data = popularity[csr.indices]
    rows = np.diff(csr.indptr) > 0
    profile_pop = np.asarray(csr.sum(axis=1)).ravel()[rows] / np.diff(csr.indptr)[rows]
    apb, stpb, _, _ = moments(profile_pop)
    _, _, skpb, kupb = moments(popularity[active_items])
    lt_avg, lt_std, lt_sk, lt_ku = moments(long_tail(item_counts))

    return CharacteristicsVector(
        SpaceSize=float(nu * ni), Shape=nu / ni, Density=nr / (nu * ni),
        Nu=float(nu), Ni=float(ni), Nr=float(nr), Rpu=nr / nu, Rpi=nr / ni,
        Giniu=gini(user_counts), Ginii=gini(item_counts),
        APB=apb, StPB=stpb, SkPB=skpb, KuPB=kupb,
        LTavg=lt_avg, LTstd=lt_std, LTsk=lt_sk, LTku=lt_ku,
    )


def characteristics_csv(rows: Iterable[tuple[str, CharacteristicsVector]]) -> str:
    """One row per dataset under the header ``dataset,SpaceSize,...,LTku``."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["dataset", *CharacteristicsVector.names()])
    for name, vec in rows:
        writer.writerow([name, *(repr(float(v)) for v in vec.as_array())])
    return buf.getvalue()


def read_characteristics_csv(text: str) -> tuple[list[str], list[str], np.ndarray]:
    """Parse a dataset-per-row feature table into ``(datasets, columns, values)``."""
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if len(rows) < 2:
        raise CharacteristicsError("feature table needs a header and at least one row")
    header = rows[0]
    columns = [h.strip() for h in header[1:]]
    datasets, values = [], []
    for line_no, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise CharacteristicsError(f"line {line_no}: expected {len(header)} fields")
        datasets.append(row[0].strip())
        values.append([float(v) for v in row[1:]])
    return datasets, columns, np.array(values, dtype=np.float64)
