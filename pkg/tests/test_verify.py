import json

import numpy as np
import pytest

from greenlab.errors import InvalidParameter
from greenlab.verify import ExperimentPlan, SuiteReport, merge_reports
from greenlab.verify.plots import write_plots
from greenlab.verify.suites import parallel_map, run_chain_suite, run_symmetry_suite, run_theorem_m1


def test_plan_defaults_and_overrides():
    plan = ExperimentPlan.preset("disk")
    assert plan["domain"]["preset"] == "disk" and plan["m1"]["q0_grid"][-1] == 4.0
    p2 = plan.with_overrides(["mesh.h=0.1", "coefficients.kind=checkerboard", "poles=[[0.0, 0.1]]"])
    assert p2["mesh"]["h"] == 0.1 and p2["coefficients"]["kind"] == "checkerboard"
    assert plan["mesh"]["h"] == 0.05            # the original plan is untouched
    assert np.allclose(p2.poles, [[0.0, 0.1]])


@pytest.mark.parametrize("bad", ["mesh.nope=1", "nope=1", "mesh=3", "mesh.h"])
def test_plan_rejects_unknown_keys(bad):
    with pytest.raises(InvalidParameter):
        ExperimentPlan.preset("disk").with_overrides([bad])


def test_plan_json_roundtrip(tmp_path):
    plan = ExperimentPlan.preset("square").with_overrides(["seed=3"])
    (tmp_path / "p.json").write_text(plan.to_json())
    assert ExperimentPlan.from_json(tmp_path / "p.json").to_dict() == plan.to_dict()
    with pytest.raises(InvalidParameter):
        ExperimentPlan.from_dict({"bogus": 1})
    with pytest.raises(InvalidParameter):
        ExperimentPlan.preset("missing")


def test_plan_check_scale_range():
    plan = ExperimentPlan.preset("disk").with_overrides(["m1.local_R=[2.0, 0.5]"])
    bad = plan.check("m1")
    assert any("R ∈ (0, R0]" in b for b in bad)
    assert ExperimentPlan.preset("disk").check("m1") == []
    outside = ExperimentPlan.preset("disk").with_overrides(["poles=[[3.0, 0.0]]"])
    assert any("interior" in b for b in outside.check("symmetry"))


def test_m1_aborts_out_of_range_radius():
    rep = run_theorem_m1(ExperimentPlan.preset("disk").with_overrides(["m1.holder_R=[1.5]"]))
    assert rep.aborted and "R ∈ (0, R0]" in rep.aborted and not rep.passed
    assert rep.failures[0].startswith("aborted")


def _report(name, ok):
    rep = SuiteReport(name)
    rep.add("a", ok, 1.0, 2.0)
    rep.add("b", True, np.float64(np.inf), None)
    rep.measurements["x"] = np.arange(3)
    return rep


def test_report_json_deterministic(tmp_path):
    rep = _report("chain", True)
    text = rep.to_json()
    assert text == _report("chain", True).to_json()
    d = json.loads(text)
    assert d["contracts"]["b"]["value"] == "inf" and d["measurements"]["x"] == [0, 1, 2]
    back = SuiteReport.load(rep.write(tmp_path))
    assert back.to_json() == text


def test_merge_order_independent():
    reps = [_report("symmetry", True), _report("chain", False), _report("m1", True)]
    a = merge_reports(reps)
    b = merge_reports(reps[::-1])
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
    assert not a["passed"] and a["suites"]["chain"]["failures"] == ["a"]


def test_parallel_map_preserves_order():
    items = list(range(20))
    assert parallel_map(lambda x: x * x, items, threads=4) == [x * x for x in items]
    assert parallel_map(lambda x: -x, items, threads=1) == [-x for x in items]


@pytest.fixture(scope="module")
def symmetry_report():
    plan = ExperimentPlan.preset("disk").with_overrides(
        ["coefficients.kind=skew_checkerboard", "coefficients.contrast=10.0", "symmetry.n_pairs=3",
         "symmetry.h=0.12"])
    return run_symmetry_suite(plan)


def test_symmetry_suite(symmetry_report):
    rep = symmetry_report
    assert rep.passed, rep.failures
    assert rep.contracts["corrupted_pairing_flagged"]["passed"]
    assert rep.contracts["corrupted_pairing_flagged"]["value"] > 1e-2
    assert not rep.measurements["self_adjoint"]


def test_plots_written(tmp_path, symmetry_report):
    rep = SuiteReport("m1", measurements={"poles": []})
    write_plots(symmetry_report, tmp_path)
    write_plots(rep, tmp_path)
    for p in tmp_path.glob("*.svg"):
        assert p.read_text().lstrip().startswith(("<?xml", "<svg"))


@pytest.mark.slow
def test_chain_suite_small(tmp_path):
    # the default mesh is graded enough to resolve the chain suite's ε = R0/128
    plan = ExperimentPlan.preset("disk").with_overrides(["chain.n_pairs=20", "chain.green_pairs=2"])
    rep = run_chain_suite(plan)
    assert rep.passed, rep.failures
    assert rep.measurements["green_chains"]
    write_plots(rep, tmp_path)
    assert (tmp_path / "chain_averages.svg").exists()


def test_chain_suite_reports_underresolved_mesh():
    plan = ExperimentPlan.preset("disk").with_overrides(["chain.n_pairs=2", "chain.green_pairs=1", "mesh.h=0.1",
                                                         "chain.domains=[\"flat_disk\"]"])
    rep = run_chain_suite(plan)
    assert rep.failures == ["green_chains"] and "ResolutionError" in rep.contracts["green_chains"]["detail"]
