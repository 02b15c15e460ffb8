"""Command-line interface: ``recrank <subcommand> ...``.

Every subcommand prints the paths it wrote, one per line, and exits 0 only
when all requested outputs were produced. Usage errors exit with 2, data or
configuration errors with 1.
"""
from __future__ import annotations

import argparse
import io
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from . import __version__
from .aggregation import DEFAULT_BETA_HAT, RULE_NAMES, MetricMatrix, aggregate_all, dm_profile
from .characteristics import characteristics_csv, compute_characteristics, read_characteristics_csv
from .corpus import (SplitBundle, binarize, f_core, f_filter, from_records,
                     parse_interactions, prune_cold, temporal_split, to_canonical_text)
from .io import (atomic_write, export_metric_matrix, import_metric_matrix, leaderboard_to_csv,
                 leaderboards_to_json, to_json)
from .metrics import evaluate, ground_truth, metric_correlation
from .models import refit_final, tune
from .plots import cd_plot_doc, cd_svg, dm_plot_doc, dm_svg, stability_plot_doc
from .selection import (FeatureTable, fidelity_table, optimal_design_select, pca,
                        random_select, select_principal_kmeans, standardize)
from .stability import stress
from .stats import cd_diagram_data, pairwise_tests
from .synthetic import planted_interactions

logger = logging.getLogger("recrank")

SPLIT_NAMES = ("train", "validation", "test")
STRESS_KINDS = ("drop-datasets", "drop-methods", "subset-pairs", "add-similar", "add-best",
                "beta")


class UsageError(Exception):
    pass


def parse_grid(text: str) -> list[float]:
    """``start:stop:step`` (inclusive stop) or a comma-separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"grid {text!r} must be start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise UsageError(f"grid {text!r} needs step > 0 and stop >= start")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(count)]
    return [float(v) for v in text.split(",") if v.strip()]


def parse_rules(text: str) -> tuple[str, ...]:
    if text == "all":
        return RULE_NAMES
    rules = tuple(r.strip() for r in text.split(",") if r.strip())
    unknown = [r for r in rules if r not in RULE_NAMES]
    if unknown:
        raise UsageError(f"unknown rules {unknown}; choose from {', '.join(RULE_NAMES)}")
    return rules


def _emit(paths: Sequence[Path]) -> None:
    for p in paths:
        print(p)


# ---------------------------------------------------------------------------
# data preparation
# ---------------------------------------------------------------------------

def cmd_ingest(args) -> list[Path]:
    data = parse_interactions(args.input, delimiter=args.delimiter, time_unit=args.time_unit)
    if args.tau is not None or args.scale != "custom":
        data = binarize(data, args.tau, args.scale)
    if args.filter == "filter":
        data = f_filter(data, args.level)
    elif args.filter == "core":
        data = f_core(data, args.level)
    return [atomic_write(args.output, to_canonical_text(data))]


def load_split(directory: str | Path) -> SplitBundle:
    """Read ``train/validation/test.csv`` into one shared index space."""
    directory = Path(directory)
    parts = [parse_interactions(directory / f"{name}.csv") for name in SPLIT_NAMES]
    users = np.concatenate([p.user_ids[p.users] for p in parts])
    items = np.concatenate([p.item_ids[p.items] for p in parts])
    merged = from_records(users, items, np.concatenate([p.weights for p in parts]),
                          np.concatenate([p.timestamps for p in parts]))
    bounds = np.cumsum([0] + [p.n_records for p in parts])
    pieces = [merged.take(np.arange(bounds[i], bounds[i + 1])) for i in range(3)]
    return SplitBundle(*pieces, boundaries=(int(pieces[1].timestamps.min(initial=0)),
                                            int(pieces[2].timestamps.min(initial=0))))


def cmd_split(args) -> list[Path]:
    data = parse_interactions(args.input)
    ratios = tuple(float(r) for r in args.ratios.split(","))
    bundle = temporal_split(data, ratios)
    if not args.keep_cold:
        bundle = prune_cold(bundle)
    out = Path(args.output)
    return [atomic_write(out / f"{name}.csv", to_canonical_text(part))
            for name, part in zip(SPLIT_NAMES, (bundle.train, bundle.validation, bundle.test))]


def cmd_synth(args) -> list[Path]:
    out = Path(args.output)
    paths = []
    datasets = []
    for i in range(args.count):
        name = f"synthetic{i}"
        data = planted_interactions(args.users, args.items, args.clusters, args.activity,
                                    seed=args.seed, name=name)
        buf = io.StringIO()
        buf.write("user_id,item_id,rating,timestamp\n")
        for r in range(data.n_records):
            buf.write(f"{data.user_ids[data.users[r]]},{data.item_ids[data.items[r]]},"
                      f"{int(data.weights[r])},{int(data.timestamps[r])}\n")
        paths.append(atomic_write(out / f"{name}.csv", buf.getvalue()))
        datasets.append({"name": name, "path": f"{name}.csv", "scale": "rating_0_5"})
    config = {
        "seed": args.seed, "output": "results", "k": [10], "rules": "all", "metrics": "all",
        "datasets": datasets,
        "models": [{"kind": "Random"}, {"kind": "MostPop"},
                   {"kind": "ItemKNN", "budget": 40}, {"kind": "EASE", "budget": 40}],
    }
    paths.append(atomic_write(out / "config.yaml", _yaml_dump(config)))
    return paths


def _yaml_dump(doc) -> str:
    return yaml.safe_dump(doc, sort_keys=False)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def cmd_eval(args) -> list[Path]:
    from .pipeline import load_config, run_benchmark

    if args.config:
        overrides = {"seed": args.seed, "output": args.output, "workers": args.workers}
        if args.k:
            overrides["k"] = [int(k) for k in args.k.split(",")]
        config = load_config(args.config, overrides)
        if args.output:
            config.output = args.output
        result = run_benchmark(config)
        missing = [c for c in result.cells if c.status != "ok"]
        for cell in missing:
            print(f"missing cell {cell.dataset}/{cell.model}: {cell.error}", file=sys.stderr)
        return result.paths
    if not args.split:
        raise UsageError("eval needs --config or --split")
    bundle = load_split(args.split)
    k_list = [int(k) for k in (args.k or "10").split(",")]
    out = Path(args.output or "eval")
    seed = args.seed or 0
    paths = []
    truth = None
    for kind in args.models.split(","):
        config = tune(kind, bundle, args.budget, seed)
        model = refit_final(config, bundle)
        if truth is None:
            truth = ground_truth(bundle.test, bundle.trainval())
        report = evaluate(model.recommend(truth.users, max(k_list)), truth, k_list)
        paths.append(atomic_write(out / f"{kind}.csv", report.to_csv()))
        paths.append(atomic_write(out / f"{kind}.json", report.to_json()))
    return paths


def cmd_import_q(args) -> list[Path]:
    out = Path(args.output)
    merged: dict[str, MetricMatrix] = {}
    for path in args.inputs:
        q = import_metric_matrix(path)
        if q.name in merged:
            base = merged[q.name]
            if base.datasets != q.datasets:
                raise ValueError(f"{path}: dataset rows differ from earlier {q.name} file")
            for label, col in zip(q.methods, q.values.T):
                base = base.with_column(label, col)
            merged[q.name] = base
        else:
            merged[q.name] = q
    return [atomic_write(out / f"{name}.csv", export_metric_matrix(q))
            for name, q in merged.items()]


def cmd_chars(args) -> list[Path]:
    rows = []
    for path in args.inputs:
        data = parse_interactions(path)
        rows.append((Path(path).stem, compute_characteristics(data)))
    return [atomic_write(args.output, characteristics_csv(rows))]


# ---------------------------------------------------------------------------
# aggregation and comparison
# ---------------------------------------------------------------------------

def cmd_aggregate(args) -> list[Path]:
    q = import_metric_matrix(args.matrix)
    rules = parse_rules(args.rules)
    boards = aggregate_all(q, rules, args.beta_hat)
    if "minimax" in rules and args.minimax_variant != "winning_votes":
        from .aggregation import apply_rule
        boards["minimax"] = apply_rule("minimax", q, args.beta_hat, args.minimax_variant)
    out = Path(args.output)
    paths = [atomic_write(out / f"{rule}.csv", leaderboard_to_csv(b)) for rule, b in boards.items()]
    paths.append(atomic_write(out / "leaderboards.json",
                              leaderboards_to_json(boards, {"matrix": q.name,
                                                            "beta_hat": args.beta_hat})))
    return paths


def cmd_compare(args) -> list[Path]:
    q = import_metric_matrix(args.matrix)
    tests = pairwise_tests(q, args.alpha, args.rope, args.mc_samples, args.seed)
    cd = cd_diagram_data(q, tests)
    profile = dm_profile(q, args.beta_hat)
    out = Path(args.output)
    tests_doc = {
        "methods": list(q.methods), "alpha": args.alpha, "rope": args.rope,
        "wilcoxon_holm_p": tests.p_values, "wilcoxon_raw_p": tests.raw_p_values,
        "bayesian": {"p_left": tests.bayes[..., 0], "p_rope": tests.bayes[..., 1],
                     "p_right": tests.bayes[..., 2]},
    }
    return [
        atomic_write(out / "tests.json", to_json(tests_doc)),
        atomic_write(out / "plot_data.json",
                     to_json({"cd": cd_plot_doc(cd), "dm": dm_plot_doc(profile)})),
        atomic_write(out / "cd.svg", cd_svg(cd)),
        atomic_write(out / "dm.svg", dm_svg(profile)),
    ]


def cmd_corr(args) -> list[Path]:
    matrices = [import_metric_matrix(p) for p in args.inputs]
    if len(matrices) < 2:
        raise UsageError("corr needs at least two metric matrices")
    base = matrices[0]
    for q in matrices[1:]:
        if q.datasets != base.datasets or q.methods != base.methods:
            raise ValueError(f"{q.name}: labels differ from {base.name}")
    cube = np.stack([q.values for q in matrices], axis=2)
    corr = metric_correlation(cube)
    doc = {"metrics": [q.name for q in matrices], "spearman": corr}
    return [atomic_write(args.output, to_json(doc))]


def cmd_stress(args) -> list[Path]:
    q = import_metric_matrix(args.matrix)
    grid = parse_grid(args.alpha) if args.alpha else []
    reports = stress(q, args.kind, parse_rules(args.rules), grid, args.trials, args.seed,
                     args.beta_hat, args.subset_size, args.workers)
    doc = {"matrix": q.name, "kind": args.kind, **stability_plot_doc(reports)}
    return [atomic_write(args.output, to_json(doc))]


def _feature_table(path) -> FeatureTable:
    datasets, columns, values = read_characteristics_csv(Path(path).read_text(encoding="utf-8"))
    return FeatureTable(values, tuple(datasets), tuple(columns))


def cmd_select(args) -> list[Path]:
    features = _feature_table(args.features)
    method = args.method
    if method == "kmeans":
        result = select_principal_kmeans(features, args.count, args.seed)
    elif method == "random":
        result = random_select(features.n, args.count, args.seed)
        result.datasets = features.rows
    else:
        z = pca(standardize(features), max_components=max(1, args.count - 1))
        result = optimal_design_select(z, args.count, "A" if method == "a-optimal" else "D",
                                       seed=args.seed)
    out = Path(args.output)
    paths = [atomic_write(out / "selection.json", to_json(result.to_doc()))]
    if result.labels is not None:
        paths.append(atomic_write(out / "clusters.csv", result.assignment_csv()))
    if args.fidelity:
        matrices = [import_metric_matrix(p) for p in args.fidelity]
        table = fidelity_table(matrices, features, args.count, args.simulations, args.rule,
                               args.seed)
        paths.append(atomic_write(out / "fidelity.csv", table.to_csv()))
        paths.append(atomic_write(out / "fidelity.md", table.to_markdown()))
    return paths


def cmd_report(args) -> list[Path]:
    merged = {}
    for root in args.inputs:
        root = Path(root)
        files = sorted(root.rglob("*.json")) if root.is_dir() else [root]
        for f in files:
            if Path(args.output).resolve() == f.resolve():
                continue
            key = str(f.relative_to(root)) if root.is_dir() else f.name
            merged[key] = json.loads(f.read_text(encoding="utf-8"))
    if not merged:
        raise ValueError("no JSON inputs found")
    return [atomic_write(args.output, to_json({"version": __version__, "parts": merged}))]


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="recrank", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse and preprocess an interaction log")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--tau", type=float)
    p.add_argument("--scale", default="custom", choices=("custom", "rating_0_5", "weight_0_1"))
    p.add_argument("--filter", default="none", choices=("none", "filter", "core"))
    p.add_argument("--level", type=int, default=5)
    p.add_argument("--delimiter")
    p.add_argument("--time-unit", default="ms", choices=("ms", "s"))
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("split", help="global temporal train/validation/test split")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--ratios", default="0.8,0.1,0.1")
    p.add_argument("--keep-cold", action="store_true", help="do not prune cold users/items")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("synth", help="write synthetic datasets and a matching config")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--count", type=int, default=3)
    p.add_argument("--users", type=int, default=2000)
    p.add_argument("--items", type=int, default=500)
    p.add_argument("--clusters", type=int, default=10)
    p.add_argument("--activity", type=float, default=25.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="tune, fit and evaluate models into metric matrices")
    p.add_argument("--config", help="YAML benchmark config")
    p.add_argument("--split", help="directory with train/validation/test.csv")
    p.add_argument("--models", default="Random,MostPop,ItemKNN,EASE")
    p.add_argument("--budget", type=int, default=40)
    p.add_argument("--k", help="comma-separated cutoffs")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("import-q", help="validate and import external metric matrices")
    p.add_argument("inputs", nargs="+")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(func=cmd_import_q)

    p = sub.add_parser("chars", help="dataset characteristics table")
    p.add_argument("inputs", nargs="+", help="preprocessed interaction files")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_chars)

    p = sub.add_parser("aggregate", help="leaderboards from a metric matrix")
    p.add_argument("matrix")
    p.add_argument("--rules", default="all")
    p.add_argument("--beta-hat", type=float, default=DEFAULT_BETA_HAT)
    p.add_argument("--minimax-variant", default="winning_votes",
                   choices=("winning_votes", "literal_count"))
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("compare", help="significance tests, CD and DM plot data, SVG")
    p.add_argument("matrix")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--rope", type=float, default=0.0)
    p.add_argument("--mc-samples", type=int, default=10_000)
    p.add_argument("--beta-hat", type=float, default=DEFAULT_BETA_HAT)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("corr", help="dataset-averaged Spearman correlation between metrics")
    p.add_argument("inputs", nargs="+", help="metric matrices sharing labels")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_corr)

    p = sub.add_parser("stress", help="stability of aggregation rules under perturbation")
    p.add_argument("matrix")
    p.add_argument("--kind", required=True, choices=STRESS_KINDS)
    p.add_argument("--alpha", help="grid start:stop:step or list (alpha, drop count or beta)")
    p.add_argument("--rules", default="all")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--subset-size", type=int, default=5)
    p.add_argument("--beta-hat", type=float, default=DEFAULT_BETA_HAT)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_stress)

    p = sub.add_parser("select", help="principal dataset selection")
    p.add_argument("features", help="characteristics table")
    p.add_argument("--method", default="kmeans",
                   choices=("kmeans", "random", "a-optimal", "d-optimal"))
    p.add_argument("--count", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fidelity", nargs="*", help="metric matrices for the fidelity table")
    p.add_argument("--simulations", type=int, default=500)
    p.add_argument("--rule", default="dm_auc", choices=RULE_NAMES)
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("report", help="merge JSON outputs into one document")
    p.add_argument("inputs", nargs="+", help="JSON files or directories")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        paths = args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"recrank {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"recrank {args.command}: error: {exc}", file=sys.stderr)
        return 1
    _emit(paths)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
