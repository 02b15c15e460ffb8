"""End-to-end benchmark: prefilter -> split -> tune -> refit -> evaluate -> aggregate.

A run is described by a :class:`BenchmarkConfig` (YAML file or dict). Each
(dataset, model) cell runs independently on a bounded thread pool; a failed
cell is recorded as missing and methods with any missing cell are left out
of aggregation. Output files are written atomically and contain no timing
information, so identical configs produce byte-identical outputs.
"""
from __future__ import annotations

import logging
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import yaml

from ._seeding import derive_seed
from .aggregation import DEFAULT_BETA_HAT, RULE_NAMES, Leaderboard, MetricMatrix, aggregate_all
from .corpus import (InteractionSet, SplitBundle, binarize, f_core, f_filter, parse_interactions,
                     prune_cold, temporal_split)
from .io import atomic_write, export_metric_matrix, leaderboard_to_csv, leaderboards_to_json, to_json
from .metrics import ALL_METRICS, evaluate, ground_truth
from .models import MODEL_KINDS, ModelConfig, refit_final, tune

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


@dataclass
class DatasetSpec:
    name: str
    path: str
    tau: float | None = None
    scale: str = "custom"
    filter_kind: str = "none"      # none | filter | core
    filter_level: int = 0
    split: tuple[float, float, float] = (0.8, 0.1, 0.1)
    time_unit: str = "ms"


@dataclass
class ModelSpec:
    kind: str
    name: str = ""
    budget: int = 40
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in MODEL_KINDS or self.kind == "External":
            raise ConfigError(f"model kind must be one of {MODEL_KINDS[:-1]}, got {self.kind!r}")
        self.name = self.name or self.kind


@dataclass
class BenchmarkConfig:
    datasets: list[DatasetSpec]
    models: list[ModelSpec]
    k_list: tuple[int, ...] = (10,)
    metrics: tuple[str, ...] = ALL_METRICS
    rules: tuple[str, ...] = RULE_NAMES
    seed: int = 0
    output: str = "results"
    beta_hat: float = DEFAULT_BETA_HAT
    workers: int = 1

    def validate(self, check_paths: bool = True) -> BenchmarkConfig:
        if not self.datasets:
            raise ConfigError("config needs at least one dataset")
        if len(self.models) < 2:
            raise ConfigError("config needs at least two models")
        for group, labels in (("dataset", [d.name for d in self.datasets]),
                              ("model", [m.name for m in self.models])):
            if len(set(labels)) != len(labels):
                raise ConfigError(f"duplicate {group} names: {labels}")
        if not self.k_list or min(self.k_list) < 1:
            raise ConfigError("k list must hold positive integers")
        unknown = set(self.metrics) - set(ALL_METRICS)
        if unknown:
            raise ConfigError(f"unknown metrics {sorted(unknown)}")
        unknown = set(self.rules) - set(RULE_NAMES)
        if unknown:
            raise ConfigError(f"unknown rules {sorted(unknown)}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if check_paths:
            for d in self.datasets:
                if not Path(d.path).exists():
                    raise ConfigError(f"dataset file not found: {d.path}")
        return self


def _as_list(value) -> list:
    if value is None:
        return []
    return list(value) if isinstance(value, (list, tuple)) else [value]


def config_from_dict(doc: Mapping[str, Any], base_dir: str | os.PathLike = ".") -> BenchmarkConfig:
    """Build a config; relative dataset paths resolve against ``base_dir``."""
    base = Path(base_dir)
    datasets = []
    for entry in _as_list(doc.get("datasets")):
        entry = dict(entry)
        path = Path(entry.pop("path"))
        filt = entry.pop("filter", None) or {}
        if isinstance(filt, str):
            filt = {"kind": filt}
        spec = DatasetSpec(
            name=str(entry.pop("name", path.stem)),
            path=str(path if path.is_absolute() else base / path),
            tau=entry.pop("tau", None),
            scale=entry.pop("scale", "custom"),
            filter_kind=filt.get("kind", "none"),
            filter_level=int(filt.get("level", 0)),
            split=tuple(float(x) for x in entry.pop("split", (0.8, 0.1, 0.1))),
            time_unit=entry.pop("time_unit", "ms"),
        )
        if entry:
            raise ConfigError(f"unknown dataset keys {sorted(entry)}")
        datasets.append(spec)
    models = []
    for entry in _as_list(doc.get("models")):
        if isinstance(entry, str):
            entry = {"kind": entry}
        models.append(ModelSpec(entry["kind"], entry.get("name", ""),
                                int(entry.get("budget", 40)), dict(entry.get("params", {}))))
    rules = doc.get("rules", "all")
    rules = RULE_NAMES if rules in ("all", None) else tuple(_as_list(rules))
    metrics = doc.get("metrics", "all")
    metrics = ALL_METRICS if metrics in ("all", None) else tuple(_as_list(metrics))
    out = doc.get("output", "results")
    return BenchmarkConfig(
        datasets=datasets, models=models,
        k_list=tuple(int(k) for k in _as_list(doc.get("k", [10]))),
        metrics=metrics, rules=rules, seed=int(doc.get("seed", 0)),
        output=str(out if Path(out).is_absolute() else base / out),
        beta_hat=float(doc.get("beta_hat", DEFAULT_BETA_HAT)),
        workers=int(doc.get("workers", 1)),
    )


def load_config(path: str | os.PathLike, overrides: Mapping[str, Any] | None = None
                ) -> BenchmarkConfig:
    path = Path(path)
    doc = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    if not isinstance(doc, dict):
        raise ConfigError("config file must hold a mapping")
    doc.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return config_from_dict(doc, path.parent)


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------

def preprocess(data: InteractionSet, spec: DatasetSpec) -> InteractionSet:
    if spec.tau is not None or spec.scale != "custom":
        data = binarize(data, spec.tau, spec.scale)
    else:
        # already implicit: keep every record, only collapse duplicates and unit weights
        data = binarize(data, float(data.weights.min()), "custom")
    if spec.filter_kind == "filter":
        data = f_filter(data, spec.filter_level)
    elif spec.filter_kind == "core":
        data = f_core(data, spec.filter_level)
    elif spec.filter_kind != "none":
        raise ConfigError(f"unknown filter kind {spec.filter_kind!r}")
    return data


def prepare_dataset(spec: DatasetSpec) -> tuple[InteractionSet, SplitBundle]:
    raw = parse_interactions(spec.path, time_unit=spec.time_unit)
    data = preprocess(raw, spec)
    return data, prune_cold(temporal_split(data, spec.split))


@dataclass
class CellResult:
    dataset: str
    model: str
    status: str
    params: dict[str, Any] = field(default_factory=dict)
    validation_ndcg: float | None = None
    values: dict[tuple[str, int], float] = field(default_factory=dict)
    error: str = ""
    seconds: float = 0.0

    def to_doc(self) -> dict:
        doc = {"dataset": self.dataset, "model": self.model, "status": self.status}
        if self.status == "ok":
            doc["params"] = self.params
            doc["validation_ndcg"] = self.validation_ndcg
        else:
            doc["error"] = self.error
        return doc


def run_cell(bundle: SplitBundle, dataset: str, spec: ModelSpec, k_list: Sequence[int],
             seed: int) -> CellResult:
    start = time.perf_counter()
    cell_seed = derive_seed(seed, "cell", dataset, spec.name)
    if spec.params:
        config = ModelConfig(spec.kind, dict(spec.params), cell_seed)
    else:
        config = tune(spec.kind, bundle, spec.budget, cell_seed)
    model = refit_final(config, bundle)
    truth = ground_truth(bundle.test, bundle.trainval())
    recs = model.recommend(truth.users, max(k_list))
    report = evaluate(recs, truth, k_list)
    return CellResult(dataset, spec.name, "ok", dict(config.params), config.validation_ndcg,
                      report.values, seconds=time.perf_counter() - start)


@dataclass
class BenchmarkResult:
    config: BenchmarkConfig
    cells: list[CellResult]
    matrices: dict[str, MetricMatrix]
    leaderboards: dict[str, dict[str, Leaderboard]]
    excluded: dict[str, list[str]]
    paths: list[Path] = field(default_factory=list)

    def report_doc(self) -> dict:
        return {
            "seed": self.config.seed,
            "datasets": [d.name for d in self.config.datasets],
            "models": [m.name for m in self.config.models],
            "k": list(self.config.k_list),
            "beta_hat": self.config.beta_hat,
            "cells": [c.to_doc() for c in self.cells],
            "excluded_methods": self.excluded,
            "leaderboards": {
                name: {rule: {"direction": "higher" if b.higher_is_better else "lower",
                              "ranking": [{"position": p, "method": m, "score": s}
                                          for p, m, s in b.rows()]}
                       for rule, b in boards.items()}
                for name, boards in self.leaderboards.items()
            },
        }


def build_matrices(config: BenchmarkConfig, cells: Sequence[CellResult]
                   ) -> tuple[dict[str, MetricMatrix], dict[str, list[str]]]:
    lookup = {(c.dataset, c.model): c for c in cells}
    datasets = [d.name for d in config.datasets]
    models = [m.name for m in config.models]
    matrices, excluded = {}, {}
    for metric in config.metrics:
        for k in config.k_list:
            keep, dropped = [], []
            for model in models:
                ok = all(lookup[(d, model)].status == "ok" for d in datasets)
                (keep if ok else dropped).append(model)
            name = f"{metric}@{k}"
            if dropped:
                warnings.warn(f"{name}: methods with missing cells excluded: {dropped}",
                              stacklevel=2)
                excluded[name] = dropped
            if len(keep) < 2:
                logger.warning("%s: fewer than two complete methods, skipped", name)
                continue
            values = np.array([[lookup[(d, mdl)].values[(metric, k)] for mdl in keep]
                               for d in datasets])
            matrices[name] = MetricMatrix(values, tuple(datasets), tuple(keep), metric, k)
    return matrices, excluded


def run_benchmark(config: BenchmarkConfig, write: bool = True) -> BenchmarkResult:
    config.validate()
    bundles: dict[str, SplitBundle] = {}
    failures: dict[str, str] = {}
    for spec in config.datasets:
        try:
            bundles[spec.name] = prepare_dataset(spec)[1]
        except ValueError as exc:
            failures[spec.name] = f"{type(exc).__name__}: {exc}"
            logger.error("dataset %s failed: %s", spec.name, exc)

    jobs = [(d.name, m) for d in config.datasets for m in config.models]

    def work(job) -> CellResult:
        dataset, spec = job
        if dataset in failures:
            return CellResult(dataset, spec.name, "missing", error=failures[dataset])
        try:
            cell = run_cell(bundles[dataset], dataset, spec, config.k_list, config.seed)
            logger.info("%s / %s done in %.2fs", dataset, spec.name, cell.seconds)
            return cell
        except (ValueError, ArithmeticError, MemoryError) as exc:
            logger.error("%s / %s failed: %s", dataset, spec.name, exc)
            return CellResult(dataset, spec.name, "missing", error=f"{type(exc).__name__}: {exc}")

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            cells = list(pool.map(work, jobs))
    else:
        cells = [work(j) for j in jobs]

    matrices, excluded = build_matrices(config, cells)
    boards = {name: aggregate_all(q, config.rules, config.beta_hat)
              for name, q in matrices.items()}
    result = BenchmarkResult(config, cells, matrices, boards, excluded)
    if write:
        result.paths = write_outputs(result)
    return result


def write_outputs(result: BenchmarkResult) -> list[Path]:
    out = Path(result.config.output)
    paths = []
    for name, q in result.matrices.items():
        paths.append(atomic_write(out / "matrices" / f"{name}.csv", export_metric_matrix(q)))
    for name, boards in result.leaderboards.items():
        for rule, board in boards.items():
            paths.append(atomic_write(out / "leaderboards" / name / f"{rule}.csv",
                                      leaderboard_to_csv(board)))
        paths.append(atomic_write(out / "leaderboards" / f"{name}.json",
                                  leaderboards_to_json(boards)))
    paths.append(atomic_write(out / "report.json", to_json(result.report_doc())))
    return paths
