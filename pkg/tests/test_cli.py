import json

import pytest

from greenlab.cli import main


@pytest.fixture
def out(tmp_path, monkeypatch):
    monkeypatch.delenv("GREENLAB_OUT", raising=False)
    return tmp_path / "out"


def test_chain_out_of_scale(out, capsys):
    code = main(["chain", "--x", "0,0", "--y", "0.1,0", "--out", str(out)])
    assert code == 2
    assert "0<ρ:=|x−y|<R_0/8" in capsys.readouterr().err


def test_chain_json_deterministic(out, capsys):
    args = ["chain", "--x", "0.05,0.02", "--y", "0.02,0.01", "--out", str(out)]
    assert main(args) == 0
    first = (out / "chain.json").read_bytes()
    assert main(args) == 0
    assert (out / "chain.json").read_bytes() == first
    d = json.loads(first)
    assert d["k"] >= 1 and len(d["balls"]) >= d["k"] and d["invariants"]["all"]


def test_certify_exit_codes(out, capsys):
    assert main(["certify", "--config", "square", "--out", str(out), "certify.lipschitz=1.0"]) == 0
    assert json.loads((out / "certify.json").read_text())["passed"]
    # the square's corners are not flat at any scale
    assert main(["certify", "--config", "square", "--out", str(out), "certify.gamma=0.0104"]) == 1


def test_usage_errors(out, capsys):
    assert main(["chain", "--x", "0,0", "--y", "0.01,0", "--out", str(out), "nope.key=1"]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["chain", "--x", "0,0,1", "--y", "0,0"]) == 2
    assert main(["green", "--pole", "0.1,0.05", "--eps", "5", "--out", str(out)]) == 2
    assert main(["report", "--out", str(out / "empty")]) == 2
    assert main(["certify", "--config", "missing.json"]) == 2


def test_env_overrides_out(tmp_path, monkeypatch, capsys):
    env = tmp_path / "env"
    monkeypatch.setenv("GREENLAB_OUT", str(env))
    assert main(["chain", "--x", "0.05,0.02", "--y", "0.02,0.01", "--out", str(tmp_path / "flag")]) == 0
    assert (env / "chain.json").exists() and not (tmp_path / "flag").exists()


def test_green_csv(out, capsys):
    code = main(["green", "--pole", "0.1,0.05", "--eps", "0.05", "--out", str(out), "mesh.h=0.1"])
    assert code == 0
    lines = (out / "green.csv").read_text().splitlines()
    assert lines[0].startswith("x1,x2,")
    assert len(lines) > 1
    info = json.loads((out / "green_info.json").read_text())
    assert info["eps"] == 0.05


def test_verify_and_report(out, capsys):
    args = ["--out", str(out), "coefficients.kind=skew_checkerboard", "coefficients.contrast=10.0",
            "symmetry.n_pairs=3", "symmetry.h=0.12"]
    assert main(["verify", "--suite", "symmetry"] + args) == 0
    assert "PASS symmetry" in capsys.readouterr().out
    assert main(["report", "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["passed"] and list(summary["suites"]) == ["symmetry"]


def test_verify_failure_exit(out, capsys):
    assert main(["verify", "--suite", "m1", "--out", str(out), "m1.holder_R=[1.5]"]) == 1
    assert "FAIL m1" in capsys.readouterr().out
    assert main(["report", "--out", str(out)]) == 1


@pytest.mark.slow
def test_verify_all_disk(out, capsys):
    assert main(["verify", "--suite", "all", "--out", str(out)]) == 0
    assert main(["report", "--out", str(out)]) == 0
    assert (out / "summary.json").exists() and list(out.glob("m1_*.svg"))
