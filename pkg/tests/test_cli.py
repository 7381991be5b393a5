import csv
import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from conicdet.cli import EXIT_ERROR, EXIT_FAIL, EXIT_PASS, SCHEMA_VERSION, Report, RunConfig, main, run
from conicdet.errors import ConfigError


def _run(tmp_path, config, *extra):
    tmp_path.mkdir(parents=True, exist_ok=True)
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps(config))
    out = tmp_path / "out"
    code = main(["--config", str(cfg), "--out", str(out), *extra])
    report = json.loads((out / "report.json").read_text()) if (out / "report.json").exists() else None
    return code, report, out


def test_exit_code_contract():
    assert (EXIT_PASS, EXIT_ERROR, EXIT_FAIL) == (0, 1, 2)
    rep = Report("x", {})
    rep.verdict("a", 0.5, 1.0, "m")
    assert rep.exit_code == EXIT_PASS
    rep.verdict("b", 2.0, 1.0, "m")
    assert rep.exit_code == EXIT_FAIL
    rep.error = {"type": "E"}
    assert rep.exit_code == EXIT_ERROR


def test_schiffer_example(tmp_path):
    code, rep, out = _run(tmp_path, {"command": "schiffer", "family": "degree2", "z1": 0, "z2": 1})
    assert code == 0 and rep["schema_version"] == SCHEMA_VERSION
    S = sorted(complex(*s).real for s in rep["results"]["schiffer"])
    assert_allclose(S, [-3, 3], atol=1e-10)
    rhs = sorted(complex(*r).real for r in rep["results"]["variational_rhs"])
    assert_allclose(rhs, [-0.25, 0.125], atol=1e-10)
    assert (out / "schiffer.csv").exists()


def test_validate_cubic_rejected(tmp_path):
    code, rep, _ = _run(tmp_path, {"command": "validate", "numerator": [0, 0, 0, 1], "denominator": [1]})
    assert code == EXIT_ERROR
    assert rep["error"]["type"] == "DegenerateCritical"
    assert rep["error"]["module"]


def test_validate_accepts_degree2(tmp_path):
    code, rep, _ = _run(tmp_path, {"command": "validate", "family": "degree2", "z1": 0, "z2": "2i"})
    assert code == EXIT_PASS
    assert rep["error"] is None


def test_tau_degree2_closed_form(tmp_path):
    path = {"family": "degree2", "nodes": [[0, 1], [0, 3]]}
    code, rep, out = _run(tmp_path, {"command": "tau", "path": path})
    assert code == EXIT_PASS
    assert_allclose(rep["results"]["closed_form_delta"], 0.5 * np.log(3), atol=1e-12)
    assert_allclose(rep["results"]["rhs_delta"], 0.1469466662, atol=1e-9)
    with open(out / "tau_ledger.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "integrand"]
    assert (out / "tau_ledger.csv").read_bytes().count(b"\r\n") == len(rows)


def test_tau_closed_loop(tmp_path):
    path = {"family": "degree2_circle", "z1": 0, "center": [2, 1], "radius": 0.7}
    code, rep, _ = _run(tmp_path, {"command": "tau", "path": path})
    assert code == EXIT_PASS and rep["results"]["closed"]


@pytest.mark.parametrize("raw", [
    {"command": "nope"},
    {"command": "schiffer", "bogus": 1},
    {"command": "schiffer", "seed": -1},
    [1, 2],
])
def test_config_errors(raw):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(raw)


def test_config_error_exit(tmp_path, capsys):
    code, rep, _ = _run(tmp_path, {"command": "nope"})
    assert code == EXIT_ERROR and rep is None
    assert "ConfigError" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["--config", str(tmp_path / "absent.json")]) == EXIT_ERROR


def test_tau_requires_path():
    rep = run(RunConfig.from_dict({"command": "tau"}))
    assert rep.exit_code == EXIT_ERROR and rep.error["type"] == "ConfigError"


def test_determinism(tmp_path):
    cfg = {"command": "spectrum", "family": "degree2", "z1": 0, "z2": 1, "L": 12}
    _, a, out_a = _run(tmp_path / "a", cfg, "--seed", "7")
    _, b, out_b = _run(tmp_path / "b", cfg, "--seed", "7")
    a.pop("timing"), b.pop("timing")
    assert a == b
    assert (out_a / "spectrum.csv").read_bytes() == (out_b / "spectrum.csv").read_bytes()


def test_heat_fit_exact(tmp_path):
    code, rep, out = _run(tmp_path, {"command": "heat-fit", "source": "exact", "nu_max": 200})
    assert code == EXIT_PASS
    assert_allclose(rep["results"]["model"]["c_m1"], 2.0, rtol=1e-3)
    assert (out / "heat_trace.csv").exists()
