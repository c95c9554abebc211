import hashlib
import json

import pytest

from tinycompress import modelfmt
from tinycompress.cli import main
from tinycompress.data import load_csv

TINY = ["--set", "arch=[52,24,16,2]", "--set", "train.epochs=3", "--set", "cluster.clusters_per_layer=8",
        "--set", "cluster.finetune_epochs=1", "--per-fault", "40"]


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_synth_writes_documented_schema(tmp_path, capsys):
    out = tmp_path / "ds.csv"
    assert main(["synth", "--seed", "7", "--per-fault", "200", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 18 * 200 + 1
    assert lines[0].split(",")[-1] == "faultNumber" and lines[0].startswith("meas_1,")
    assert len(load_csv(out)) == 3600
    assert json.loads((tmp_path / "config.json").read_text())["seed"] == 7
    assert "3600 samples" in capsys.readouterr().out


def test_synth_is_repeatable(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert main(["synth", "--seed", "7", "--per-fault", "20", "--out", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_zero_samples_is_a_usage_error(tmp_path, capsys):
    assert main(["synth", "--per-fault", "0", "--out", str(tmp_path / "x.csv")]) == 2
    assert "samples_per_fault" in capsys.readouterr().err


@pytest.mark.parametrize("argv,field", [
    (["train"], "--fault"),
    (["train", "--fault", "6", "--set", "cluster.nope=1"], "cluster.nope"),
    (["train", "--fault", "3"], "--fault 3"),
    (["nonsense"], "invalid choice"),
    (["train", "--fault", "6", "--set", "novalue"], "KEY=VALUE"),
])
def test_usage_errors(argv, field, capsys):
    assert main(argv) == 2
    assert field in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    assert main(["grid", "--config", str(tmp_path / "none.json")]) == 2
    assert "cannot read config" in capsys.readouterr().err


def test_runtime_errors_exit_one(tmp_path, capsys):
    assert main(["inspect", str(tmp_path / "missing.tcmp")]) == 1
    bad = tmp_path / "bad.tcmp"
    bad.write_bytes(b"TCMP\x01\x00")
    assert main(["inspect", str(bad)]) == 1
    assert "error" in capsys.readouterr().err


def test_seed_environment_default(tmp_path, monkeypatch):
    monkeypatch.setenv("TINYCOMPRESS_SEED", "99")
    assert main(["synth", "--per-fault", "2", "--out", str(tmp_path / "x.csv")]) == 0
    assert json.loads((tmp_path / "config.json").read_text())["seed"] == 99


def test_train_compress_inspect_eval(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["train", "--fault", "6", "--out-dir", str(out), *TINY]) == 0
    base = out / "baseline_f06.tcmp"
    assert (out / "config.json").exists() and (out / "baseline_f06.history.json").exists()
    before = digest(base)

    assert main(["compress", str(base), "--pipeline", "pcq", "--fault", "6", "--out-dir", str(out), *TINY]) == 0
    assert digest(base) == before  # inputs are never modified
    cm = modelfmt.load(out / "f06_PCQ.tcmp")
    assert cm.kinds == ["SparseClusteredQuantized"] * 3
    capsys.readouterr()

    assert main(["inspect", str(out / "f06_PCQ.tcmp")]) == 0
    text = capsys.readouterr().out
    assert text.count("SparseClusteredQuantized") == 3
    assert "nonzeros" in text and "codebook" in text and "bytes" in text

    assert main(["eval", str(base), "--fault", "6", "--split", "train", "--out-dir", str(out), *TINY]) == 0
    acc = json.loads((out / "eval.json").read_text())["accuracy"]
    assert 0.0 <= acc <= 100.0
    assert f"{acc:.2f}%" in capsys.readouterr().out

    assert main(["eval", str(out / "f06_PCQ.tcmp"), "--fault", "6", "--out-dir", str(out), *TINY]) == 0


def test_compress_rejects_compressed_input(tmp_path):
    out = tmp_path / "run"
    assert main(["train", "--fault", "6", "--out-dir", str(out), *TINY]) == 0
    assert main(["compress", str(out / "baseline_f06.tcmp"), "--pipeline", "q", "--fault", "6",
                 "--out", str(out / "q.tcmp"), *TINY]) == 0
    assert main(["compress", str(out / "q.tcmp"), "--pipeline", "p", "--fault", "6", *TINY]) == 2


def test_grid_writes_reports(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"data": {"faults": [6, 14]}, "output_dir": str(tmp_path / "grid")}))
    assert main(["grid", "--config", str(cfg), *TINY]) == 0
    out = tmp_path / "grid"
    names = {p.name for p in out.iterdir()}
    pipelines = ["P", "C", "Q", "PC", "PQ", "CQ", "PCQ"]
    assert {f"report_{p}.md" for p in pipelines} <= names
    assert {f"report_{p}.csv" for p in pipelines} <= names
    assert {"summary.csv", "summary.svg", "config.json", "report.json"} <= names
    resolved = json.loads((out / "config.json").read_text())
    assert resolved["arch"] == [52, 24, 16, 2] and resolved["data"]["samples_per_fault"] == 40
    assert "PCQ" in capsys.readouterr().out
