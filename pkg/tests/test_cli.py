import json
import subprocess
import sys

import numpy as np

from shefluct.cli import main
from shefluct.io import load_fields, read_table

LINEAR = {"N": 32, "dt": 1e-3, "T": 0.04, "coefficient": "constant(1)",
          "u0": {"kind": "cosine", "mean": 1, "amplitude": 0.5}}


def write(tmp_path, doc, name="s.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def test_rates_check_passes_for_linear_equation(tmp_path, capsys):
    cfg = write(tmp_path, {"schema": 1, "scenario": LINEAR,
                           "experiment": {"epsilons": [2.0**-k for k in range(2, 7)], "p": 2}})
    assert main(["rates", cfg, "--replicas", "100", "--out", str(tmp_path / "o"), "--check"]) == 0
    assert "slope 1.000" in capsys.readouterr().out
    rows = read_table(tmp_path / "o" / "results.csv")
    assert len(rows) == 5 and rows[0]["M"] == "100"
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["status"] == 0 and man["result"]["report"]["passed"] and len(man["content_hash"]) == 64


def test_rates_check_failure_exit_code(tmp_path):
    exp = {"epsilons": [2.0**-k for k in range(2, 7)], "schedule": {"kind": "fixed", "delta": 0.0},
           "tolerance": 1e-6}
    cfg = write(tmp_path, {"schema": 1, "scenario": {**LINEAR, "coefficient": "cosine"}, "experiment": exp})
    assert main(["rates", cfg, "--replicas", "64", "--out", str(tmp_path / "o"), "--check"]) == 3


def test_malformed_config_exit_code(tmp_path, capsys):
    cfg = write(tmp_path, {"schema": 1, "scenario": {"N": 7}})
    assert main(["rates", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "$.scenario.N" in capsys.readouterr().err
    assert main(["rates", str(tmp_path / "missing.json")]) == 2
    assert main(["simulate"]) == 2
    assert main(["rates", write(tmp_path, {"schema": 1})]) == 2


def test_blow_up_exit_code(tmp_path, monkeypatch):
    from shefluct.coefficients import DiffusionCoefficient
    from shefluct.harness.scenario import Scenario

    monkeypatch.setattr(Scenario, "G", lambda self: DiffusionCoefficient("exp", lambda u, l: np.exp(u)))
    cfg = write(tmp_path, {"schema": 1, "scenario": {**LINEAR, "u0": 50.0, "eps": 1.0}})
    assert main(["simulate", cfg, "--out", str(tmp_path / "o")]) == 4
    assert main(["remainder", cfg, "--replicas", "4", "--out", str(tmp_path / "o")]) == 4


def test_covariance_and_presets(tmp_path, capsys):
    assert main(["covariance-check", "--replicas", "300", "--out", str(tmp_path / "c")]) == 0
    assert json.loads(capsys.readouterr().out)["passed"]
    assert main(["presets", "--out", str(tmp_path / "p")]) == 0
    assert "dean-kawasaki" in json.loads(capsys.readouterr().out)


def test_simulate_and_expand_dumps(tmp_path):
    cfg = write(tmp_path, {"schema": 1, "preset": "fleming-viot", "scenario": {"N": 16, "T": 0.01, "n": 2}})
    assert main(["simulate", cfg, "--seed", "4", "--out", str(tmp_path / "o")]) == 0
    arrays, meta = load_fields(tmp_path / "o" / "trajectory")
    assert arrays["states"].shape == (11, 16) and meta["seed"] == 4
    assert main(["expand", cfg, "--seed", "4", "--out", str(tmp_path / "o")]) == 0
    arrays, meta = load_fields(tmp_path / "o" / "stack")
    assert arrays["fields"].shape == (3, 11, 16) and meta["coefficient"]["name"].startswith("logistic-sqrt")


def test_remainder_survival_divergence(tmp_path):
    cfg = write(tmp_path, {"schema": 1, "scenario": {**LINEAR, "eps": 0.01, "n": 1},
                           "experiment": {"estimator": "terminal-mean"}})
    assert main(["remainder", cfg, "--replicas", "8", "--out", str(tmp_path / "r")]) == 0
    assert float(read_table(tmp_path / "r" / "results.csv")[0]["estimate"]) < 1e-20
    cfg = write(tmp_path, {"schema": 1, "preset": "dawson-watanabe", "scenario": {"N": 16, "T": 0.02},
                           "experiment": {"epsilons": [1e-2, 1e-3, 1e-4], "min_final_survival": 0.9}})
    assert main(["survival", cfg, "--replicas", "20", "--out", str(tmp_path / "s"), "--check"]) == 0
    cfg = write(tmp_path, {"schema": 1, "scenario": LINEAR,
                           "experiment": {"deltas": [0.2, 0.1, 0.05, 0.025]}})
    assert main(["divergence", cfg, "--replicas", "64", "--out", str(tmp_path / "d"), "--check"]) == 0


def test_output_independent_of_workers(tmp_path):
    cfg = write(tmp_path, {"schema": 1, "scenario": {**LINEAR, "coefficient": "cosine"},
                           "experiment": {"epsilons": [2.0**-k for k in range(2, 7)]}})
    for w in (1, 3):
        assert main(["rates", cfg, "--replicas", "130", "--workers", str(w), "--out", str(tmp_path / f"w{w}")]) == 0
    assert (tmp_path / "w1" / "results.csv").read_bytes() == (tmp_path / "w3" / "results.csv").read_bytes()


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "shefluct.cli", "presets", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert out.returncode == 0 and "ssep" in out.stdout
