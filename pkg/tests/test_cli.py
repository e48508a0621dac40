import json
import os

from freemult.cli import main

DIRAC1 = '{"kind": "named", "family": "dirac", "params": {"c": 1}}'
GAMMA21 = '{"kind": "named", "family": "gamma", "params": {"p": 2, "theta": 1}}'
LAMBDA1 = '{"kind": "named", "family": "lambda", "params": {"b": 1}}'
TWO_ATOMS = '{"kind": "atomic", "atoms": [{"w": 0.5, "a": 1}, {"w": 0.5, "a": 4}]}'


def test_density_writes_outputs(tmp_path):
    # the trapezoid mass check at 1e-4 needs about a thousand points
    out = str(tmp_path)
    code = main(["density", "--measure", DIRAC1, "--t", "1", "--points", "1024",
                 "--check", "mass", "--check", "mean", "--check", "logunimodal",
                 "--out", out])
    assert code == 0
    report = json.loads(open(os.path.join(out, "density_report.json")).read())
    entry = report["results"]["per_t"][0]
    assert entry["mass_pass"] is True
    assert entry["mean_pass"] is True
    assert entry["logunimodal"] == "unimodal"
    assert entry["support_components"] == 1
    csv = open(os.path.join(out, "density_t1.csv")).read()
    assert csv.startswith("x,q,xq\n")
    assert report["tolerances"]["tol_root"] == 1e-10


def test_density_deterministic(tmp_path):
    outs = []
    for sub in ("a", "b"):
        out = str(tmp_path / sub)
        os.makedirs(out)
        code = main(["density", "--measure", DIRAC1, "--t", "0.5,2",
                     "--points", "128", "--out", out])
        assert code == 0
        outs.append(out)
    for name in ("density_report.json", "density_t0.5.csv", "density_t2.csv"):
        a = open(os.path.join(outs[0], name), "rb").read()
        b = open(os.path.join(outs[1], name), "rb").read()
        assert a == b, f"{name} not byte-identical"


def test_check_exit_codes(tmp_path):
    assert main(["check", "--measure", GAMMA21, "--out", str(tmp_path)]) == 0
    assert main(["check", "--measure", LAMBDA1, "--strong",
                 "--out", str(tmp_path)]) == 1
    assert main(["check", "--measure", TWO_ATOMS, "--out", str(tmp_path)]) == 3


def test_check_report_contents(tmp_path):
    out = str(tmp_path)
    assert main(["check", "--measure", GAMMA21, "--out", out]) == 0
    report = json.loads(open(os.path.join(out, "check_report.json")).read())
    assert report["results"]["logunimodal"]["verdict"] == "unimodal"
    assert abs(report["results"]["logunimodal"]["modes"][0] - 2.0) < 0.01
    assert report["results"]["pick"]["holds"] is True


def test_config_error_exits():
    assert main(["density", "--measure", '{"kind": "named", "family": "lambda",'
                 ' "params": {"b": 4}}', "--t", "1"]) == 2
    assert main(["density", "--measure", DIRAC1, "--t", ""]) == 2
    assert main(["scenario", "/nonexistent/sc.json"]) == 2
    assert main(["density"]) == 2  # missing required flags
    assert main([]) == 2


def test_sweep_command(tmp_path):
    out = str(tmp_path)
    code = main(["sweep", "--measure", DIRAC1, "--t", "1", "--angles", "8",
                 "--grid", "1024", "--out", out])
    assert code == 0
    report = json.loads(open(os.path.join(out, "sweep_report.json")).read())
    assert report["results"]["per_t"][0]["log_unimodal"] is True
    csv = open(os.path.join(out, "sweep_t1.csv")).read()
    assert csv.startswith("R,count,effective_count,boundary,roots\n")


def test_counterexample_command(tmp_path):
    out = str(tmp_path)
    code = main(["counterexample", "--n-atoms", "12", "--t", "0.5,1",
                 "--out", out])
    assert code == 0
    report = json.loads(
        open(os.path.join(out, "counterexample_report.json")).read())
    for entry in report["results"]["per_t"]:
        assert entry["certificate_found"] is True
        assert entry["support_components"] >= 2


def test_pick_command(tmp_path):
    out = str(tmp_path)
    assert main(["pick", "--measure", GAMMA21, "--mode", "2", "--out", out]) == 0
    assert main(["pick", "--measure", TWO_ATOMS, "--mode-sweep", "0.5,5,5",
                 "--out", out]) == 1
    assert os.path.exists(os.path.join(out, "pick_violations.csv"))


def test_sweep_hypothesis_violation_is_warning(tmp_path):
    # interval [1, 2] fails the threshold hypothesis: 16 - 3 >= 4; the sweep
    # still runs and the report carries the warning
    out = str(tmp_path)
    uniform12 = '{"kind": "named", "family": "uniform", "params": {"lo": 1, "hi": 2}}'
    code = main(["sweep", "--measure", uniform12, "--t", "1", "--angles", "6",
                 "--grid", "1024", "--out", out])
    report = json.loads(open(os.path.join(out, "sweep_report.json")).read())
    assert any("threshold unavailable" in w for w in report["warnings"])
    assert "time_threshold" not in report["results"]
    assert report["results"]["per_t"]
    assert code in (0, 1)


def test_scenario_cascade(tmp_path):
    path = os.path.join(os.path.dirname(__file__), "..", "scenarios",
                        "atomic_gap_cascade.json")
    assert main(["scenario", path, "--out", str(tmp_path)]) == 0
    assert os.path.isdir(str(tmp_path / "run00_counterexample"))
    assert os.path.isdir(str(tmp_path / "run01_density"))


def test_scenario_symmetric(tmp_path):
    path = os.path.join(os.path.dirname(__file__), "..", "scenarios",
                        "symmetric_unimodal.json")
    assert main(["scenario", path, "--out", str(tmp_path)]) == 0
    report = json.loads(open(
        str(tmp_path / "run00_density" / "density_report.json")).read())
    assert all(e["logunimodal"] == "unimodal"
               for e in report["results"]["per_t"])


def test_seedless_flag_accepted(tmp_path):
    assert main(["density", "--measure", DIRAC1, "--t", "1", "--points", "128",
                 "--seedless", "--out", str(tmp_path)]) == 0


def test_check_inconclusive_exit(tmp_path):
    # a secondary bump with prominence between half and full hysteresis
    import numpy as np

    x = np.geomspace(0.05, 500.0, 2001)
    f = (np.exp(-2 * (np.log(x) - 1) ** 2)
         + 7e-4 * np.exp(-40 * (np.log(x) - 4) ** 2)) / x
    mass = float(np.trapezoid(f, x))
    measure = json.dumps({"kind": "grid",
                          "grid": {"x": x.tolist(), "f": (f / mass).tolist()}})
    code = main(["check", "--measure", measure, "--hysteresis", "1e-3",
                 "--out", str(tmp_path)])
    assert code == 4
