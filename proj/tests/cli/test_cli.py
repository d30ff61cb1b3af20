import json
import os
import subprocess
from pathlib import Path

import pytest

CLI = os.environ.get("NSLDP_CLI", "nsldp")


def run(*args, cwd=None):
    return subprocess.run([CLI, *map(str, args)], capture_output=True, text=True, cwd=cwd)


def manifest(out):
    return json.loads((Path(out) / "manifest.json").read_text())


def test_selftest_passes_and_lists_every_output(tmp_path):
    r = run("selftest", "--out-dir", tmp_path)
    assert r.returncode == 0, r.stdout + r.stderr
    m = manifest(tmp_path)
    assert m["status"] == 0
    listed = {o["path"] for o in m["outputs"]}
    on_disk = {str(p.relative_to(tmp_path)) for p in tmp_path.rglob("*") if p.is_file()} - {"manifest.json"}
    assert listed == on_disk
    assert m["untracked"] == []


def test_decay_needs_three_noise_levels(tmp_path):
    r = run("decay", "--set", "measure.eps_list=0.1", "--out-dir", tmp_path)
    assert r.returncode == 2
    assert "measure.eps_list" in r.stderr


def test_config_errors_name_the_key(tmp_path):
    r = run("simulate", "--set", "flow.dt=fast", "--out-dir", tmp_path)
    assert r.returncode == 2
    assert "flow.dt" in r.stderr
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[flow]\nwind = 3\n")
    r = run("simulate", "--config", cfg, "--out-dir", tmp_path / "o")
    assert r.returncode == 2
    assert "flow.wind" in r.stderr


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[basis]\nK = 2\n\n[flow]\nT = 0.5\nepsilon = 0.05\n")
    r = run("simulate", "--config", cfg, "--set", "flow.record_every=100", "--seed", 9, "--out-dir", tmp_path / "o")
    assert r.returncode == 0, r.stderr
    m = manifest(tmp_path / "o")
    assert m["config"]["basis"]["K"] == "2"
    assert m["config"]["flow"]["record_every"] == "100"
    assert m["seed"] == 9
    assert m["inputs"][0]["path"] == str(cfg)
    rows = (tmp_path / "o" / "trajectory.csv").read_text().strip().splitlines()
    assert len(rows) == 1 + 6  # header, t = 0 and five records


def test_blowup_is_a_numerical_failure(tmp_path):
    r = run("simulate", "--set", "flow.dt=0.5", "--set", "flow.forcing_amplitude=1000", "--set", "flow.T=50",
            "--out-dir", tmp_path)
    assert r.returncode == 3
    assert "step" in r.stderr
    assert manifest(tmp_path)["status"] == 3


def test_resume_continues_the_same_path(tmp_path):
    common = ["--set", "flow.epsilon=0.05", "--set", "flow.record_every=250", "--seed", 4]
    assert run("simulate", "--set", "flow.T=2", *common, "--out-dir", tmp_path / "full").returncode == 0
    assert run("simulate", "--set", "flow.T=1", *common, "--out-dir", tmp_path / "a").returncode == 0
    r = run("simulate", "--set", "flow.T=1", "--set", f"flow.resume={tmp_path / 'a' / 'checkpoint.txt'}", *common,
            "--out-dir", tmp_path / "b")
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "full" / "final_state.csv").read_bytes() == (tmp_path / "b" / "final_state.csv").read_bytes()


def test_rerun_replaces_previous_outputs(tmp_path):
    assert run("simulate", "--set", "flow.T=0.2", "--set", "flow.snapshot_every=100", "--out-dir", tmp_path).returncode == 0
    assert (tmp_path / "snapshots").exists()
    assert run("simulate", "--set", "flow.T=0.2", "--out-dir", tmp_path).returncode == 0
    assert not list((tmp_path / "snapshots").glob("*.csv"))
    assert manifest(tmp_path)["untracked"] == []


def test_chain_reconstruction(tmp_path):
    chain = tmp_path / "chain.txt"
    chain.write_text("# two states, one step before the window\n2\n0.9 0.1\n0.2 0.8\n1 1\n")
    r = run("reconstruct", "--set", f"reconstruct.chain={chain}", "--set", "reconstruct.gamma=0",
            "--set", "reconstruct.delta=2", "--out-dir", tmp_path / "o")
    assert r.returncode == 0, r.stdout + r.stderr
    report = (tmp_path / "o" / "reconstruct_report.txt").read_text()
    assert "FAIL" not in report
    # the same set with stopping times that differ between states
    chain.write_text("2\n0.9 0.1\n0.2 0.8\n0 3\n")
    r = run("reconstruct", "--set", f"reconstruct.chain={chain}", "--set", "reconstruct.gamma=0",
            "--set", "reconstruct.delta=2", "--out-dir", tmp_path / "p")
    assert r.returncode == 4
    assert "FAIL" in (tmp_path / "p" / "reconstruct_report.txt").read_text()


def test_config_reference_lists_every_section():
    r = run("--config-reference")
    assert r.returncode == 0
    for section in ["run", "basis", "noise", "flow", "coupling", "attractor", "action", "measure", "reconstruct"]:
        assert f"`{section}." in r.stdout
