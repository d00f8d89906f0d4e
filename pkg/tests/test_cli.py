import json
import subprocess
import sys

import pytest

from cadfeat.cli import build_parser, main
from cadfeat.synthetic import bundled_paths

from conftest import WORKED, run_pipeline

COMMANDS = ["featurize", "simplify", "rank", "brown", "sotd", "label", "train", "predict", "evaluate", "report"]


def cli(*args):
    return subprocess.run([sys.executable, "-m", "cadfeat", *args], capture_output=True, text=True)


def test_top_level_help_lists_commands_and_formats():
    r = cli("--help")
    assert r.returncode == 0
    for name in COMMANDS:
        assert name in r.stdout
    for fmt in ("problem_id,ordering,time_s,status", "vars:", "jsonl"):
        assert fmt in r.stdout


@pytest.mark.parametrize("name", COMMANDS)
def test_subcommand_help_documents_formats(name, capsys):
    assert main([name, "--help"]) == 0
    out = capsys.readouterr().out
    assert "file formats:" in out and (" in:" in out or " out:" in out)


def test_version():
    assert "cadfeat" in cli("--version").stdout


@pytest.mark.parametrize("argv", [
    [],
    ["frobnicate"],
    ["featurize"],
    ["featurize", "/no/such/corpus", "-o", "x.csv"],
    ["train", "f.csv", "--labels", "l.csv", "-o", "m.json", "--grid", "banana"],
])
def test_usage_errors_exit_1(argv, capsys, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 1
    assert "error" in capsys.readouterr().err


def test_parse_error_reports_position(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("vars: x1\nx1^-2\n")
    assert main(["brown", str(bad)]) == 1
    assert "bad.txt:2:" in capsys.readouterr().err


def test_subprocess_exit_code_and_stdout(tmp_path):
    (tmp_path / "w.txt").write_text(WORKED)
    r = cli("brown", str(tmp_path / "w.txt"))
    assert r.returncode == 0
    rec = json.loads(r.stdout)
    assert rec[0]["orderings"] == ["x1>x3>x2", "x3>x1>x2"]
    assert cli("sotd", str(tmp_path / "missing.txt")).returncode == 1


def test_csv_prediction_format(tmp_path, capsys):
    (tmp_path / "w.txt").write_text(WORKED)
    assert main(["sotd", str(tmp_path / "w.txt"), "--format", "csv"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "problem_id,method,orderings"
    assert lines[1].startswith("w,sotd,")


def test_pipeline_outputs(tmp_path):
    files = run_pipeline(tmp_path)
    names = {str(f.relative_to(tmp_path)) for f in files}
    assert {"features.csv", "simple.csv", "model.json", "report/summary.csv"} <= names
    header = (tmp_path / "features.csv").read_text().splitlines()[0].split(",")
    assert len(header) == 1 + 1728
    summary = (tmp_path / "report" / "summary.csv").read_text().splitlines()
    methods = [line.split(",")[0] for line in summary[1:]]
    assert methods == ["knn", "brown", "sotd", "virtual-best", "virtual-worst", "random"]
    rows = {line.split(",")[0]: line.split(",") for line in summary[1:]}
    best = float(rows["virtual-best"][3])
    assert all(float(r[3]) >= best for r in rows.values())
    assert rows["virtual-best"][2] == "100.0"
    hist = (tmp_path / "report" / "histogram_knn.csv").read_text().splitlines()
    assert hist[0] == "bin_start_percent,count"
    assert sum(int(line.split(",")[1]) for line in hist[1:]) == int(rows["knn"][1])


def test_label_rejects_bad_schedule(tmp_path, capsys):
    _, timings = bundled_paths()
    assert main(["label", str(timings), "-o", str(tmp_path / "l.csv"), "--limits", "4,8"]) == 1
    assert "limit" in capsys.readouterr().err


def test_parser_builds():
    assert build_parser().prog == "cadfeat"
