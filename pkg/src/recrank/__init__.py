"""Benchmarking toolkit for top-N recommenders and robust rank aggregation.

Subpackages follow the benchmark pipeline: :mod:`corpus` (ingest, filter,
split), :mod:`models`, :mod:`metrics`, :mod:`characteristics`,
:mod:`aggregation`, :mod:`stats`, :mod:`stability`, :mod:`selection` and the
:mod:`cli` orchestration layer.
"""
__version__ = "0.1.0"

from .aggregation import (Leaderboard, MetricMatrix, PerformanceProfile, aggregate_all,  # noqa: E402
                          apply_rule)
from .corpus import InteractionSet, SplitBundle  # noqa: E402
from .kernels import BACKEND  # noqa: E402

__all__ = ["__version__", "BACKEND", "InteractionSet", "SplitBundle", "MetricMatrix",
           "Leaderboard", "PerformanceProfile", "aggregate_all", "apply_rule"]
