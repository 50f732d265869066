"""End-to-end runs of the command line front end."""

import json
import subprocess
import sys

PYTHON = sys.executable


def run_cli(*args):
    return subprocess.run(
        [PYTHON, "-m", "cascadelab.cli", *args], capture_output=True, text=True
    )


def write_config(path, **overrides):
    cfg = {
        "model": {"family": "s2_diag", "p": 2, "r": 12, "gamma": -0.5},
        "audit": {"n_samples": 20},
        "integrator": {"dt": 0.001, "duration": 0.05},
        "seed": 7,
    }
    cfg.update(overrides)
    path.write_text(json.dumps(cfg))
    return path


def read_tree(root):
    return {
        p.name: p.read_bytes() for p in sorted(root.iterdir()) if p.is_file()
    }


def test_build_writes_table_and_manifest(tmp_path):
    cfg = write_config(tmp_path / "cfg.json")
    out = tmp_path / "out"
    res = run_cli("build", "--config", str(cfg), "--out", str(out))
    assert res.returncode == 0, res.stderr
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["subcommand"] == "build"
    assert manifest["files"] == ["coupling.tsv"]
    assert manifest["seed"] == 7
    assert manifest["config"]["model"]["gamma"] == -0.5
    first = (out / "coupling.tsv").read_text().splitlines()[0].split("\t")
    assert first[:3] == ["0", "1", "2"]


def test_unknown_key_is_named_and_exits_1(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"model": {"family": "s2_diag", "p": 2, "r": 12, "g": 1}}))
    res = run_cli("build", "--config", str(cfg), "--out", str(tmp_path / "o"))
    assert res.returncode == 1
    assert "model.g" in res.stderr


def test_missing_config_exits_1(tmp_path):
    res = run_cli("build", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path))
    assert res.returncode == 1
    assert "not found" in res.stderr


def test_missing_gamma_exits_1(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"model": {"family": "s3_diag", "p": 2, "r": 12}}))
    res = run_cli("build", "--config", str(cfg), "--out", str(tmp_path / "o"))
    assert res.returncode == 1
    assert "model.gamma" in res.stderr


def test_bad_subcommand_exits_1(tmp_path):
    res = run_cli("frobnicate", "--config", "x")
    assert res.returncode == 1


def test_audit_schema_and_strict_verdict(tmp_path):
    cfg = write_config(tmp_path / "cfg.json")
    out = tmp_path / "out"
    res = run_cli("audit", "--config", str(cfg), "--out", str(out))
    assert res.returncode == 0, res.stderr
    payload = json.loads((out / "audit.json").read_text())
    by_name = {rep["quantity"]: rep for rep in payload["reports"]}
    # both candidate weights are recorded: the printed exponent is violated,
    # the solved one holds
    assert by_name["helicity"]["verdict"] == "violated"
    assert by_name["second_invariant"]["verdict"] == "conserved"
    assert by_name["energy"]["verdict"] == "conserved"
    assert by_name["helicity"]["symbolic_residuals"]
    assert payload["weight_basis"]["dimension"] == 2

    # the violated printed weight makes --strict exit 3
    res = run_cli("audit", "--config", str(cfg), "--out", str(tmp_path / "o2"), "--strict")
    assert res.returncode == 3


def test_scan_strict_tracks_claim_matches(tmp_path):
    cfg = write_config(
        tmp_path / "s3.json",
        model={"family": "s3_diag", "p": 2, "r": 14, "gamma": -0.5},
        scan={"interval": [-3.0, 3.0], "grid_step": 0.01},
    )
    out = tmp_path / "out"
    res = run_cli("scan", "--config", str(cfg), "--out", str(out), "--strict")
    assert res.returncode == 3  # claimed exponents are not roots
    report = json.loads((out / "scan.json").read_text())
    assert report["paper_claims"] == [2.5, 1.25]
    assert report["matches"] == [False, False]
    assert [round(r["gamma"], 6) for r in report["roots"]] == [-0.5, -0.25]

    cfg2 = write_config(tmp_path / "s2.json", scan={"interval": [-1.0, 0.5], "grid_step": 0.01})
    res = run_cli("scan", "--config", str(cfg2), "--out", str(tmp_path / "o2"), "--strict")
    assert res.returncode == 0


def test_simulate_outputs_and_determinism(tmp_path):
    cfg = write_config(
        tmp_path / "cfg.json",
        initial={"kind": "random", "amplitude": 0.1, "envelope": True},
    )
    out1, out2 = tmp_path / "a", tmp_path / "b"
    res1 = run_cli("simulate", "--config", str(cfg), "--out", str(out1))
    res2 = run_cli("simulate", "--config", str(cfg), "--out", str(out2))
    assert res1.returncode == 0, res1.stderr
    assert res2.returncode == 0
    assert read_tree(out1) == read_tree(out2)
    drift = json.loads((out1 / "drift.json").read_text())
    assert drift["invariants"]["energy"] <= 1e-10
    assert (out1 / "trajectory.csv").read_text().startswith("t,V0,")
    assert (out1 / "spectrum.csv").read_text().startswith("shell,E_i")


def test_seed_override_changes_initial_state(tmp_path):
    cfg = write_config(
        tmp_path / "cfg.json",
        initial={"kind": "random", "amplitude": 0.1, "envelope": True},
    )
    base = tmp_path / "base"
    other = tmp_path / "other"
    run_cli("simulate", "--config", str(cfg), "--out", str(base))
    res = run_cli("simulate", "--config", str(cfg), "--out", str(other), "--seed", "8")
    assert res.returncode == 0
    t1 = (base / "trajectory.csv").read_text()
    t2 = (other / "trajectory.csv").read_text()
    assert t1 != t2
    manifest = json.loads((other / "manifest.json").read_text())
    assert manifest["seed"] == 8


def test_json_format_outputs(tmp_path):
    cfg = write_config(tmp_path / "cfg.json")
    out = tmp_path / "out"
    res = run_cli("simulate", "--config", str(cfg), "--out", str(out), "--format", "json")
    assert res.returncode == 0, res.stderr
    traj = json.loads((out / "trajectory.json").read_text())
    assert "t" in traj and "V0" in traj
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["format"] == "json"
    assert "trajectory.json" in manifest["files"]


def test_goy_check_requires_matching_model(tmp_path):
    cfg = write_config(tmp_path / "ok.json")
    out = tmp_path / "out"
    res = run_cli("goy-check", "--config", str(cfg), "--out", str(out))
    assert res.returncode == 0, res.stderr
    report = json.loads((out / "goy_check.json").read_text())
    assert report["passes"] is True
    assert report["lambda"] == 2.0

    bad = write_config(
        tmp_path / "bad.json", model={"family": "s2_diag", "p": 2, "r": 12, "gamma": -0.25}
    )
    res = run_cli("goy-check", "--config", str(bad), "--out", str(tmp_path / "o2"))
    assert res.returncode == 1


def test_goy_family_audit(tmp_path):
    cfg = write_config(
        tmp_path / "goy.json",
        model={"family": "goy", "lambda": 2.0, "eps": 2.5, "r": 12},
    )
    out = tmp_path / "out"
    res = run_cli("audit", "--config", str(cfg), "--out", str(out))
    assert res.returncode == 0, res.stderr
    payload = json.loads((out / "audit.json").read_text())
    verdicts = {rep["quantity"]: rep["verdict"] for rep in payload["reports"]}
    assert verdicts == {"energy": "conserved", "second_invariant": "conserved"}


def test_stationary_subcommand(tmp_path):
    cfg = write_config(tmp_path / "cfg.json")
    out = tmp_path / "out"
    res = run_cli("stationary", "--config", str(cfg), "--out", str(out), "--strict")
    assert res.returncode == 0, res.stderr
    summary = json.loads((out / "stationary.json").read_text())
    assert summary["max_abs_residual"] <= 1e-12
    assert abs(summary["spectrum_exponent"] + 2.0 / 3.0) <= 1e-12
    lines = (out / "residuals.csv").read_text().strip().splitlines()
    assert lines[0] == "shell,residual"
    assert len(lines) == 1 + (summary["interior"][1] - summary["interior"][0] + 1)

    # off-root gamma fails under --strict
    bad = write_config(
        tmp_path / "bad.json", model={"family": "s2_diag", "p": 2, "r": 12, "gamma": 0.3}
    )
    res = run_cli("stationary", "--config", str(bad), "--out", str(tmp_path / "o2"), "--strict")
    assert res.returncode == 3


def test_dissipation_warning_on_stderr(tmp_path):
    cfg = write_config(
        tmp_path / "cfg.json",
        dissipation={"nu0": 1e-3},
        integrator={"dt": 0.01, "duration": 0.02},
    )
    out = tmp_path / "out"
    res = run_cli("simulate", "--config", str(cfg), "--out", str(out))
    assert res.returncode == 0
    assert "under-resolved" in res.stderr
