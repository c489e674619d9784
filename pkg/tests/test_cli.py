import json
import subprocess
import sys

import pytest

from equidecomp.cli import main
from equidecomp.pipeline import ConfigError, RunConfig

TINY = {"cells": 4000, "max_degree": 6, "expansion_trials": 30, "render_height": 64}


@pytest.fixture
def tiny(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(TINY))
    return path


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("tiny")
    cfg = d / "tiny.json"
    cfg.write_text(json.dumps(TINY))
    assert main(["pipeline", "--config", str(cfg), "--out", str(d / "run")]) == 0
    return cfg, d / "run"


def test_gap_preset_exit_0(capsys):
    assert main(["gap", "--max-degree", "4", "--cells", "2000"]) == 0
    assert "gap lower bound  0.266667" in capsys.readouterr().out


def test_gap_identity_exit_1():
    assert main(["gap", "--generators", "preset:identity", "--max-degree", "3", "--cells", "1000"]) == 1


def test_gap_malformed_rotation_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"quaternions": [[1, 2]]}))
    assert main(["gap", "--generators", str(bad)]) == 2
    assert "usage error" in capsys.readouterr().err
    (tmp_path / "junk.json").write_text("{not json")
    assert main(["gap", "--generators", str(tmp_path / "junk.json")]) == 2


def test_config_errors(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"cellz": 10}))
    assert main(["gap", "--config", str(cfg)]) == 2
    assert main(["gap", "--eta", "1.5"]) == 2
    with pytest.raises(ConfigError):
        RunConfig.load(None, epsilon=-1.0)


def test_flags_override_config(tiny):
    cfg = RunConfig.load(str(tiny), cells=5000)
    assert cfg.cells == 5000 and cfg.max_degree == 6


def test_overlapping_sets_exit_3(tmp_path, capsys):
    cfg = tmp_path / "o.json"
    cfg.write_text(json.dumps({**TINY, "B": {"type": "cap", "center": [0, 0, 1], "measure": 0.2}}))
    assert main(["pipeline", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3
    assert "stage 'sets'" in capsys.readouterr().err


def test_expand_not_found_exit_1(tmp_path):
    cfg = tmp_path / "e.json"
    cfg.write_text(json.dumps({**TINY, "max_word_length": 1}))
    assert main(["expand", "--config", str(cfg), "--eta", "0.01", "--out", str(tmp_path / "e")]) == 1


def test_pipeline_then_verify(tiny_run, capsys):
    _, run = tiny_run
    assert main(["verify", str(run)]) == 0
    table = capsys.readouterr().out
    assert "anomaly" not in table
    for name in ("manifest", "phase.contract", "claim2", "pieces.invariants", "residual"):
        assert any(line.startswith(name) and " ok " in line for line in table.splitlines())


def test_rerun_manifest_identical(tiny_run, tmp_path):
    cfg, run = tiny_run
    assert main(["pipeline", "--config", str(cfg), "--out", str(tmp_path / "again")]) == 0
    assert (tmp_path / "again" / "MANIFEST").read_bytes() == (run / "MANIFEST").read_bytes()


def test_tampered_report_detected(tiny_run, tmp_path, capsys):
    import shutil

    _, run = tiny_run
    copy = tmp_path / "copy"
    shutil.copytree(run, copy)
    with open(copy / "phases.jsonl", "a") as fh:
        fh.write("\n")
    assert main(["verify", str(copy)]) == 1
    line = next(l for l in capsys.readouterr().out.splitlines() if l.startswith("manifest"))
    assert "anomaly" in line and "phases.jsonl" in line


def test_missing_file_exit_2(tiny_run, tmp_path):
    import shutil

    _, run = tiny_run
    copy = tmp_path / "copy"
    shutil.copytree(run, copy)
    (copy / "graph.bin").unlink()
    assert main(["verify", str(copy)]) == 2
    assert main(["verify"]) == 2


def test_stagewise_commands(tiny, tmp_path):
    out = str(tmp_path / "s")
    assert main(["graph", "--config", str(tiny), "--out", out]) == 0
    assert main(["match", "--out", out]) == 0
    assert main(["decompose", "--out", out]) == 0
    assert (tmp_path / "s" / "pieces.ppm").is_file()


def test_console_script_entry():
    r = subprocess.run([sys.executable, "-m", "equidecomp.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for sub in ("gap", "expand", "graph", "match", "decompose", "pipeline", "verify"):
        assert sub in r.stdout
