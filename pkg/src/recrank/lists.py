"""Top-k recommendation lists shared by the models and metrics modules."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class RecommendationLists:
    """Per-user ordered item lists, stored as a ``(n_users, k)`` array padded with -1.

    Row ``r`` belongs to user index ``users[r]``. Valid entries always precede
    padding, and a row is shorter than ``k`` only when the user has fewer
    than ``k`` unseen candidate items.
    """

    users: np.ndarray
    items: np.ndarray

    def __post_init__(self):
        if self.items.ndim != 2 or len(self.users) != self.items.shape[0]:
            raise ValueError("items must be (n_users, k) aligned with users")

    @property
    def k(self) -> int:
        return self.items.shape[1]

    def lengths(self) -> np.ndarray:
        return (self.items >= 0).sum(axis=1)

    def truncate(self, k: int) -> RecommendationLists:
        if k > self.k:
            raise ValueError(f"lists hold only {self.k} items, asked for {k}")
        return RecommendationLists(self.users, self.items[:, :k])

    def rows_for(self, users: np.ndarray) -> np.ndarray:
        """Row positions of ``users``; raises if any user has no list."""
        order = np.argsort(self.users, kind="stable")
        pos = np.searchsorted(self.users[order], users)
        pos = np.clip(pos, 0, len(order) - 1)
        if len(order) == 0 or not np.array_equal(self.users[order][pos], users):
            raise ValueError("recommendations missing for some evaluated users")
        return order[pos]

    def as_dict(self) -> dict[int, list[int]]:
        return {
            int(u): [int(i) for i in row if i >= 0] for u, row in zip(self.users, self.items)
        }
