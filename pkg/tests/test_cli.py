import json
from pathlib import Path

import pandas as pd

import cli


def run(tmp_path: Path, *argv: str) -> int:
    return cli.main([*argv, "--log-dir", str(tmp_path / "logs"), "--config", str(tmp_path / "missing.yml")])


def make_clusters(tmp_path: Path) -> Path:
    metric = tmp_path / "m.csv"
    assert run(tmp_path, "gen", "--fixture", "C", "2", "2", "10", "--out", str(metric)) == cli.EXIT_OK
    return metric


def test_gen_then_ramsey(tmp_path: Path):
    metric = make_clusters(tmp_path)
    out = tmp_path / "r.json"
    assert run(tmp_path, "ramsey", "--t", "2", "--in", str(metric), "--out", str(out)) == cli.EXIT_OK
    payload = json.loads(out.read_text())
    assert payload["subspace"] == [0, 1, 2, 3]
    assert (tmp_path / "r.json.manifest.json").exists()
    manifest = json.loads((tmp_path / "m.csv.manifest.json").read_text())
    assert manifest["command"] == "gen"
    assert list((tmp_path / "logs").glob("runner_*.json"))


def test_oracle_build_and_query(tmp_path: Path, capsys):
    metric = make_clusters(tmp_path)
    directory = tmp_path / "oracle"
    assert run(tmp_path, "oracle", "build", "--t", "2", "--in", str(metric), "--out", str(directory)) == cli.EXIT_OK
    assert (directory / "manifest.json").exists()
    capsys.readouterr()
    assert run(tmp_path, "oracle", "query", str(directory), "0", "2") == cli.EXIT_OK
    assert capsys.readouterr().out.strip() == "10"
    assert run(tmp_path, "oracle", "query", str(directory), "0", "9") == cli.EXIT_USAGE


def test_oracle_bench_writes_table(tmp_path: Path):
    out = tmp_path / "bench"
    code = run(tmp_path, "oracle", "bench", "--sizes", "4", "8", "--fixture", "path", "--out", str(out))
    assert code == cli.EXIT_OK
    frame = pd.read_csv(tmp_path / "bench.csv")
    assert frame["n"].tolist() == [4, 8]
    assert list(frame.columns)[:3] == ["n", "t", "builder"]


def test_verify_flags_corrupted_artifact(tmp_path: Path, capsys):
    metric = make_clusters(tmp_path)
    out = tmp_path / "r.json"
    run(tmp_path, "ramsey", "--in", str(metric), "--out", str(out))
    assert run(tmp_path, "verify", "--in", str(out), "--metric", str(metric)) == cli.EXIT_OK
    payload = json.loads(out.read_text())
    payload["nodes"][1]["label"] = 20.0
    out.write_text(json.dumps(payload))
    capsys.readouterr()
    assert run(tmp_path, "verify", "--in", str(out), "--metric", str(metric)) == cli.EXIT_VIOLATION
    result = json.loads(capsys.readouterr().out)
    assert result["ok"] is False
    assert result["violations"][0]["rule"] == "label-decay"


def test_analyze_ramsey_artifact(tmp_path: Path, capsys):
    metric = make_clusters(tmp_path)
    out = tmp_path / "r.json"
    run(tmp_path, "ramsey", "--in", str(metric), "--out", str(out))
    capsys.readouterr()
    assert run(tmp_path, "analyze", "--in", str(out), "--metric", str(metric), "--q", "1", "2") == cli.EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["distortion"]["universe"] == "subspace"
    assert report["distortion"]["worst"] == 1.0


def test_other_builders_run(tmp_path: Path):
    metric = tmp_path / "p.csv"
    assert run(tmp_path, "gen", "--fixture", "planar", "20", "3", "--out", str(metric)) == cli.EXIT_OK
    for argv in (
        ("partial", "--delta", "0.5", "--epsilon", "0.25"),
        ("scaling", "--schedule", "log-square"),
        ("embed", "--builder", "scaling"),
        ("cover", "--t", "3"),
        ("multiembed", "--epsilon", "0.5", "--paths", "20"),
        ("bundle", "--scale", "0.3"),
        ("lpembed", "--p", "1"),
    ):
        out = tmp_path / f"{argv[0]}.json"
        if argv[0] == "lpembed":
            out = tmp_path / "coords.csv"
        assert run(tmp_path, *argv, "--in", str(metric), "--out", str(out)) == cli.EXIT_OK, argv
    assert (tmp_path / "coords.json").exists()
    for name in ("cover.json", "bundle.json", "coords.json"):
        code = run(tmp_path, "verify", "--in", str(tmp_path / name), "--metric", str(metric))
        assert code == cli.EXIT_OK, name


def test_usage_errors_exit_one(tmp_path: Path):
    assert run(tmp_path, "gen", "--fixture", "hexagon", "3", "--out", str(tmp_path / "x.csv")) == cli.EXIT_USAGE
    assert run(tmp_path, "ramsey", "--in", str(tmp_path / "x.csv")) == cli.EXIT_USAGE
    assert run(tmp_path, "ramsey", "--in", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "r.json")) == cli.EXIT_USAGE


def test_gen_corpus_from_config(tmp_path: Path):
    config = tmp_path / "conf.yml"
    config.write_text("corpus:\n  - {kind: path, n: 5}\n  - {kind: clusters, k: 2, m: 3, s: 4}\n")
    out = tmp_path / "corpus"
    code = cli.main(["gen", "--corpus", "--out", str(out), "--config", str(config), "--log-dir", str(tmp_path / "logs")])
    assert code == cli.EXIT_OK
    assert sorted(p.name for p in out.glob("*.csv")) == ["clusters_2_3_4.csv", "path_5.csv"]
