import json
import os
import subprocess
import sys

import pytest

from particle_limits import cli
from particle_limits.harness import SCHEMA_VERSION, BlowupComparison, ConvergenceReport


def run_cli(tmp_path, *args, prefix="run"):
    argv = list(args) + ["--output.dir", str(tmp_path), "--output.prefix", prefix]
    return cli.main(argv)


def outputs(tmp_path):
    return sorted(p for p in os.listdir(tmp_path) if not p.startswith("."))


def test_simulate_ssep(tmp_path, capsys):
    code = run_cli(tmp_path, "simulate", "--model.n", "16", "--time", "0.01", "--seed", "3",
                   "--model.replicas", "2", "--profile", '{"name": "cosine", "mean": 0.5, "amp": 0.25}')
    assert code == 0
    assert outputs(tmp_path) == ["run.csv", "run.json", "run.png", "run.svg"]
    doc = json.loads((tmp_path / "run.json").read_text())
    assert doc["schema"] == SCHEMA_VERSION and len(doc["trajectories"]) == 2
    assert doc["config"]["model"]["n"] == 16
    header = (tmp_path / "run.csv").read_text().splitlines()[0]
    assert header == "replica,checkpoint_time,site,occupation"
    assert capsys.readouterr().out.startswith("simulate ssep N=16")


def test_simulate_bdrw_writes_summary(tmp_path):
    code = run_cli(tmp_path, "simulate", "--model.kind", "bdrw", "--model.n", "8", "--model.ell", "10",
                   "--time", "0.05", "--model.rates", '{"family": "logistic"}', "--output.png", "false")
    assert code == 0
    assert outputs(tmp_path) == ["run.csv", "run.json", "run.summary.csv", "run.svg"]
    rows = (tmp_path / "run.summary.csv").read_text().splitlines()
    assert rows[0] == "replica,outcome,tau_estimate,events,max_occupation"


def test_solve_heat_cosine(tmp_path, capsys):
    code = run_cli(tmp_path, "solve", "--time", "0.05", "--grid.m", "64", "--checkpoints", "4",
                   "--profile", '{"name": "cosine", "mean": 0.5, "amp": 0.5}')
    assert code == 0
    lines = (tmp_path / "run.csv").read_text().splitlines()
    assert lines[0] == "time,u,rho" and len(lines) == 1 + 5 * 64
    svg = (tmp_path / "run.svg").read_text()
    assert svg.count("<polyline") == 5
    assert "solve heat M=64 status=resolved" in capsys.readouterr().out


def test_solve_reaction_diffusion_reports_blowup(tmp_path, capsys):
    code = run_cli(tmp_path, "solve", "--model.kind", "bdrw", "--model.rates", '{"family": "power", "p": 2}',
                   "--profile", '{"name": "constant", "value": 1.0}', "--time", "0.9", "--grid.m", "16")
    assert code == 0
    doc = json.loads((tmp_path / "run.json").read_text())
    assert doc["equation"] == "reaction_diffusion"
    assert doc["solution"]["status"]["status"] == "resolved"


def test_converge_hydrodynamic(tmp_path, capsys):
    code = run_cli(tmp_path, "converge", "--schedule.ns", "[8, 16]", "--time", "0.01",
                   "--checkpoints", "2", "--study.replicas", "4", "--study.k_max", "1",
                   "--profile", '{"name": "cosine", "mean": 0.5, "amp": 0.25}')
    assert code == 0
    doc = json.loads((tmp_path / "run.json").read_text())
    report = ConvergenceReport.from_dict(doc["report"])
    assert [r["n"] for r in report.rows] == [8, 16]
    svg = (tmp_path / "run.svg").read_text()
    assert f"slope = {report.fit['slope']:.3f}" in svg
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 2 and out[0].startswith("hydrodynamic N=8 ell=1")


def test_blowup_death_only_exits_cleanly(tmp_path, capsys):
    code = run_cli(tmp_path, "blowup", "--model.rates", '{"family": "death", "mu": 5}',
                   "--model.ell", "20", "--schedule.ns", "[8]", "--schedule.params", '{"value": 20}',
                   "--study.replicas", "3", "--time", "1.0",
                   "--profile", '{"name": "constant", "value": 1.0}')
    assert code == 0
    doc = json.loads((tmp_path / "run.json").read_text())
    comp = BlowupComparison.from_dict(doc["report"])
    assert comp.rows[0]["exploded"] == 0
    captured = capsys.readouterr()
    assert "exploded=0/3" in captured.out
    assert "warning:" in captured.err


def test_check_subcommands(tmp_path, capsys):
    assert run_cli(tmp_path, "check", "--model.rates", '{"family": "power", "p": 2}', prefix="crit") == 0
    crit = json.loads((tmp_path / "crit.json").read_text())
    assert crit["criterion"]["verdict"] == "satisfied"
    assert run_cli(tmp_path, "check", "--check.kind", "a2", "--schedule.rule", "log_power",
                   "--schedule.params", '{"beta": 1}', prefix="a2") == 0
    a2 = json.loads((tmp_path / "a2.json").read_text())
    assert a2["a2"]["convergent"] is False and a2["a2"]["grid_relative"] is True
    out = capsys.readouterr().out
    assert "verdict=satisfied" in out and "verdict=divergent symbolic=divergent" in out


@pytest.mark.parametrize("args", [
    ["simulate", "--time", "0.1", "--profile", '{"name": "constant", "value": 1.5}'],
    ["simulate", "--time", "0.1", "--model.bogus", "1"],
    ["solve", "--time", "0.1", "--grid.m", "16", "--grid.dt", "0.01"],
    ["teleport"],
    ["simulate", "--time"],
    ["simulate", "stray"],
])
def test_config_errors_exit_2(tmp_path, args, capsys):
    assert run_cli(tmp_path, *args) == 2
    assert outputs(tmp_path) == []


def test_runtime_failure_exits_1_with_report(tmp_path, capsys):
    # the PDE blows up before the requested horizon, so the study refuses to run
    code = run_cli(tmp_path, "converge", "--model.kind", "bdrw", "--model.rates", '{"family": "power", "p": 2}',
                   "--profile", '{"name": "constant", "value": 1.0}', "--time", "2.0", "--grid.m", "16",
                   "--schedule.ns", "[8]", "--study.replicas", "2")
    assert code == 1
    assert outputs(tmp_path) == ["run.error.json"]
    report = json.loads((tmp_path / "run.error.json").read_text())
    assert report["status"] == "error" and report["error"] == "ValueError"
    assert json.loads(capsys.readouterr().err)["command"] == "converge"


def test_reruns_are_byte_identical(tmp_path):
    args = ["converge", "--schedule.ns", "[8, 16]", "--time", "0.01", "--checkpoints", "2",
            "--study.replicas", "3", "--profile", '{"name": "cosine", "mean": 0.5, "amp": 0.25}']
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cli(a, *args) == 0 and run_cli(b, *args) == 0
    for name in outputs(a):
        data_a = (a / name).read_bytes()
        data_b = (b / name).read_bytes()
        if name.endswith(".json"):
            # the config block records the output directory itself
            data_a = data_a.replace(str(a).encode(), b"")
            data_b = data_b.replace(str(b).encode(), b"")
        assert data_a == data_b, name


def test_atomic_write_leaves_nothing_on_failure(tmp_path, monkeypatch):
    target = tmp_path / "out.json"
    cli.atomic_write(str(target), "old")

    def boom(src, dst):
        raise OSError("disk full")

    monkeypatch.setattr(cli.os, "replace", boom)
    with pytest.raises(OSError):
        cli.atomic_write(str(target), "new")
    assert target.read_text() == "old"
    assert sorted(os.listdir(tmp_path)) == ["out.json"]


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"time": 0.01, "model": {"kind": "ssep", "n": 8},
                               "output": {"svg": False, "png": False}}))
    assert run_cli(tmp_path, "simulate", "--config", str(cfg), "--model.n=12") == 0
    doc = json.loads((tmp_path / "run.json").read_text())
    assert doc["config"]["model"]["n"] == 12
    assert outputs(tmp_path) == ["cfg.json", "run.csv", "run.json"]


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "particle_limits.cli", "check", "--output.dir", str(tmp_path)],
                          capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.startswith("check criterion")
