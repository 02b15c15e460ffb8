import io
import json
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest

from recrank.aggregation import RULE_NAMES, MetricMatrix, aggregate_all
from recrank.cli import main, parse_grid
from recrank.io import (FormatError, atomic_write, export_metric_matrix, import_metric_matrix,
                        leaderboard_from_csv, leaderboard_to_csv, leaderboards_from_json,
                        leaderboards_to_json)


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, [Path(p) for p in out.out.split()], out.err


def write_q(path, rows, methods=("A", "B", "C")):
    q = MetricMatrix(np.asarray(rows, float), tuple(f"d{i}" for i in range(len(rows))), methods)
    export_metric_matrix(q, path)
    return q


def test_matrix_round_trip(tmp_path):
    q = MetricMatrix(np.random.default_rng(0).random((4, 3)), ("a", "b", "c", "d"),
                     ("X", "Y", "Z"), "ndcg", 10)
    path = tmp_path / "ndcg@10.csv"
    export_metric_matrix(q, path)
    again = import_metric_matrix(path)
    assert np.array_equal(again.values, q.values)
    assert (again.metric, again.k, again.datasets, again.methods) == \
        ("ndcg", 10, q.datasets, q.methods)
    assert export_metric_matrix(again) == path.read_text()


@pytest.mark.parametrize("text", ["dataset,A\nd0,1\n", "dataset,A,A\nd0,1,2\n",
                                  "dataset,A,B\nd0,1\n", "dataset,A,B\nd0,x,1\n",
                                  "dataset,A,B\nd0,nan,1\n", "dataset,A,B\nd0,1,2\nd0,1,2\n"])
def test_matrix_import_errors(text):
    with pytest.raises(FormatError):
        import_metric_matrix(io.StringIO(text))


def test_leaderboard_round_trips():
    q = MetricMatrix(np.random.default_rng(1).random((5, 4)), tuple("abcde"), tuple("WXYZ"))
    boards = aggregate_all(q)
    for rule, board in boards.items():
        again = leaderboard_from_csv(io.StringIO(leaderboard_to_csv(board)), rule,
                                     board.higher_is_better)
        assert again.methods == board.methods and again.scores == board.scores
    back = leaderboards_from_json(leaderboards_to_json(boards))
    for rule, board in boards.items():
        assert back[rule].methods == board.methods
        assert back[rule].higher_is_better == board.higher_is_better


def test_atomic_write_creates_parents(tmp_path):
    p = atomic_write(tmp_path / "a" / "b.txt", "hi")
    assert p.read_text() == "hi" and not list((tmp_path / "a").glob("*.tmp*"))


def test_parse_grid():
    assert len(parse_grid("1:4:0.25")) == 13
    assert parse_grid("0.9,1,1.1") == [0.9, 1.0, 1.1]


def test_aggregate_all_rules_on_2x2(tmp_path, capsys):
    write_q(tmp_path / "q.csv", [[0.3, 0.2], [0.4, 0.1]], ("A", "B"))
    code, paths, _ = run(capsys, "aggregate", tmp_path / "q.csv", "--rules", "all",
                         "-o", tmp_path / "out")
    assert code == 0
    csvs = [p for p in paths if p.suffix == ".csv"]
    assert len(csvs) == len(RULE_NAMES) == 8
    doc = json.loads((tmp_path / "out" / "leaderboards.json").read_text())
    assert set(doc["leaderboards"]) == set(RULE_NAMES)
    for p in csvs:
        assert leaderboard_from_csv(p).methods[0] == "A"


def test_compare_writes_json_and_svg(tmp_path, capsys):
    rng = np.random.default_rng(2)
    base = rng.random(10)
    write_q(tmp_path / "q.csv", np.column_stack([base + 0.2, base, base + 0.01]))
    code, paths, _ = run(capsys, "compare", tmp_path / "q.csv", "--mc-samples", "500",
                         "-o", tmp_path / "cmp")
    assert code == 0 and len(paths) == 4
    tests = json.loads((tmp_path / "cmp" / "tests.json").read_text())
    assert tests["wilcoxon_holm_p"][0][0] is None
    plot = json.loads((tmp_path / "cmp" / "plot_data.json").read_text())
    assert plot["cd"]["methods"][0] == "A" and len(plot["dm"]["methods"]) == 3
    for name in ("cd.svg", "dm.svg"):
        root = ET.fromstring((tmp_path / "cmp" / name).read_text())
        assert root.tag.endswith("svg")


def test_stress_add_best_grid(tmp_path, capsys):
    write_q(tmp_path / "q.csv", np.random.default_rng(3).uniform(0.1, 1, (6, 3)))
    code, _, _ = run(capsys, "stress", tmp_path / "q.csv", "--kind", "add-best",
                     "--alpha", "1:4:0.25", "--rules", "ma,minimax", "-o", tmp_path / "s.json")
    assert code == 0
    doc = json.loads((tmp_path / "s.json").read_text())
    assert [len(s["points"]) for s in doc["series"]] == [13, 13]
    code, _, _ = run(capsys, "stress", tmp_path / "q.csv", "--kind", "drop-datasets",
                     "--alpha", "0,2", "--trials", "5", "--workers", "2",
                     "-o", tmp_path / "d.json")
    assert code == 0


def test_usage_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["aggregate"])
    assert exc.value.code != 0
    write_q(tmp_path / "q.csv", [[0.3, 0.2, 0.1]])
    code, _, err = run(capsys, "aggregate", tmp_path / "q.csv", "--rules", "borda",
                       "-o", tmp_path / "o")
    assert code == 2 and "borda" in err
    code, _, _ = run(capsys, "aggregate", tmp_path / "missing.csv", "-o", tmp_path / "o")
    assert code == 1


def test_import_q_merges_columns(tmp_path, capsys):
    d = tmp_path / "a"
    d.mkdir()
    (tmp_path / "b").mkdir()
    write_q(d / "ndcg@10.csv", [[0.1, 0.2], [0.3, 0.4]], ("A", "B"))
    write_q(tmp_path / "b" / "ndcg@10.csv", [[0.5, 0.6], [0.7, 0.8]], ("C", "D"))
    code, paths, _ = run(capsys, "import-q", d / "ndcg@10.csv", tmp_path / "b" / "ndcg@10.csv",
                         "-o", tmp_path / "merged")
    assert code == 0
    q = import_metric_matrix(paths[0])
    assert q.methods == ("A", "B", "C", "D") and q.k == 10


def test_corr(tmp_path, capsys):
    rng = np.random.default_rng(4)
    rows = rng.random((5, 4))
    write_q(tmp_path / "ndcg@10.csv", rows, tuple("ABCD"))
    write_q(tmp_path / "recall@10.csv", rows**2, tuple("ABCD"))
    code, _, _ = run(capsys, "corr", tmp_path / "ndcg@10.csv", tmp_path / "recall@10.csv",
                     "-o", tmp_path / "c.json")
    doc = json.loads((tmp_path / "c.json").read_text())
    assert code == 0 and doc["spearman"][0][1] == pytest.approx(1.0)


@pytest.fixture(scope="module")
def pipeline_dir(tmp_path_factory):
    """Synthetic datasets written by the CLI, evaluated once for the pipeline tests."""
    root = tmp_path_factory.mktemp("pipe")
    assert main(["synth", "-o", str(root), "--count", "2", "--users", "250", "--items", "80",
                 "--clusters", "4", "--seed", "1"]) == 0
    return root


def test_data_preparation_subcommands(pipeline_dir, tmp_path, capsys):
    src = pipeline_dir / "synthetic0.csv"
    code, paths, _ = run(capsys, "ingest", src, "--scale", "rating_0_5", "--filter", "core",
                         "--level", "2", "-o", tmp_path / "clean.csv")
    assert code == 0 and paths == [tmp_path / "clean.csv"]
    code, paths, _ = run(capsys, "split", tmp_path / "clean.csv", "-o", tmp_path / "split")
    assert code == 0 and [p.name for p in paths] == ["train.csv", "validation.csv", "test.csv"]
    code, paths, _ = run(capsys, "eval", "--split", tmp_path / "split", "--models",
                         "MostPop,Random", "--budget", "2", "--k", "5,10",
                         "-o", tmp_path / "eval")
    assert code == 0 and len(paths) == 4
    code, paths, _ = run(capsys, "chars", tmp_path / "clean.csv", src, "-o",
                         tmp_path / "chars.csv")
    assert code == 0
    header = (tmp_path / "chars.csv").read_text().splitlines()[0].split(",")
    assert len(header) == 19


def test_eval_with_config_and_report(pipeline_dir, tmp_path, capsys):
    import yaml
    cfg = yaml.safe_load((pipeline_dir / "config.yaml").read_text())
    cfg["models"] = [{"kind": "Random"}, {"kind": "MostPop"},
                     {"kind": "EASE", "params": {"lambda": 50.0}}]
    cfg["metrics"] = ["ndcg", "coverage"]
    (pipeline_dir / "small.yaml").write_text(yaml.safe_dump(cfg))
    out = tmp_path / "results"
    code, paths, _ = run(capsys, "eval", "--config", pipeline_dir / "small.yaml",
                         "-o", out, "--seed", "3")
    assert code == 0
    q = import_metric_matrix(out / "matrices" / "ndcg@10.csv")
    assert q.shape == (2, 3)
    report = json.loads((out / "report.json").read_text())
    assert report["seed"] == 3 and len(report["cells"]) == 6
    code, paths, _ = run(capsys, "report", out, "-o", tmp_path / "all.json")
    merged = json.loads((tmp_path / "all.json").read_text())
    assert code == 0 and "report.json" in merged["parts"]


def test_select_subcommand(tmp_path, capsys):
    from recrank.synthetic import clustered_benchmark
    from recrank.characteristics import CharacteristicsVector
    feats, mats = clustered_benchmark(seed=1)
    names = CharacteristicsVector.names()
    lines = ["dataset," + ",".join(names)]
    lines += [r + "," + ",".join(repr(float(v)) for v in row)
              for r, row in zip(feats.rows, feats.values)]
    (tmp_path / "chars.csv").write_text("\n".join(lines) + "\n")
    for q in mats:
        export_metric_matrix(q, tmp_path / f"{q.name}.csv")
    code, paths, _ = run(capsys, "select", tmp_path / "chars.csv", "--method", "kmeans",
                         "--count", "6", "-o", tmp_path / "sel")
    assert code == 0
    doc = json.loads((tmp_path / "sel" / "selection.json").read_text())
    assert len(doc["labels"]) == feats.n and len(set(doc["labels"])) == 6
    assert len(doc["indices"]) == 6
    clusters = (tmp_path / "sel" / "clusters.csv").read_text().splitlines()
    assert clusters[0] == "dataset,cluster,selected" and len(clusters) == feats.n + 1
    for method in ("random", "d-optimal", "a-optimal"):
        code, _, _ = run(capsys, "select", tmp_path / "chars.csv", "--method", method,
                         "--count", "6", "-o", tmp_path / method)
        assert code == 0
    code, _, _ = run(capsys, "select", tmp_path / "chars.csv", "--count", "6",
                     "--fidelity", *[tmp_path / f"{q.name}.csv" for q in mats],
                     "--simulations", "2", "-o", tmp_path / "fid")
    assert code == 0
    header = (tmp_path / "fid" / "fidelity.csv").read_text().splitlines()[0]
    assert header == "Method,nDCG@10,HitRate@10,Coverage"
