import csv
import json

import numpy as np
import pytest

from chargetransfer.cli import EXIT_ABORT, EXIT_CONFIG, EXIT_OK, EXIT_SOFT, EXIT_SOLVER, main


def _write(tmp_path, name, doc):
    doc = dict(doc, name=name)
    p = tmp_path / f"{name}.json"
    p.write_text(json.dumps(doc))
    return str(p)


def _report(out, name, cmd):
    return json.loads((out / f"{name}_{cmd}.json").read_text())["report"]


SECH = {
    "grid": {"dim": 1, "n": 512, "length": 40.0},
    "model": {"kind": "scalar", "potentials": [{"shape": "sech2", "amplitude": -1.0}]},
    "time": {"T": 1.0, "dt": 0.01},
}
FREE = {
    "grid": {"dim": 1, "n": 1024, "length": 200.0},
    "model": {"kind": "scalar"},
    "initial": {"kind": "gaussian", "width": 1.0},
    "time": {"T": 10.0, "dt": 0.05, "samples": 21},
}


def test_eig_reports_ground_state(tmp_path):
    out = tmp_path / "out"
    assert main(["eig", "--scenario", _write(tmp_path, "well", SECH), "--out", str(out), "--quiet"]) == EXIT_OK
    rep = _report(out, "well", "eig")
    assert len(rep["eigenvalues"]) == 1
    assert rep["eigenvalues"][0]["re"] == pytest.approx(-0.5, abs=1e-6)
    assert (out / "well_eig_eigenfields_channel0.csv").exists()
    manifest = json.loads((out / "well_eig_manifest.json").read_text())
    assert set(manifest["outputs"]) == {p.name for p in out.iterdir()}
    assert len(manifest["config_hash"]) == 64


def test_eig_free_scenario_is_empty(tmp_path):
    out = tmp_path / "out"
    assert main(["eig", "--scenario", _write(tmp_path, "free", FREE), "--out", str(out), "--quiet"]) == EXIT_OK
    assert _report(out, "free", "eig")["eigenvalues"] == []


def test_malformed_config_exit_code(tmp_path, capsys):
    bad = {k: v for k, v in SECH.items() if k != "grid"}
    code = main(["eig", "--scenario", _write(tmp_path, "bad", bad), "--out", str(tmp_path / "out")])
    assert code == EXIT_CONFIG
    assert "grid" in capsys.readouterr().out


def test_missing_file_exit_code(tmp_path):
    assert main(["eig", "--scenario", str(tmp_path / "nope.json"), "--out", str(tmp_path), "--quiet"]) == EXIT_CONFIG


def test_evolve_csv_columns(tmp_path):
    out = tmp_path / "out"
    assert main(["evolve", "--scenario", _write(tmp_path, "free", FREE), "--out", str(out), "--quiet"]) == EXIT_OK
    with open(out / "free_evolve_norms.csv") as fh:
        rows = list(csv.DictReader(fh))
    t = np.array([float(r["t"]) for r in rows])
    linf = np.array([float(r["linf"]) for r in rows])
    l2 = np.array([float(r["l2"]) for r in rows])
    assert np.all(np.diff(linf[t >= 1]) < 0)
    assert np.ptp(l2) < 1e-10


def test_dt_override_is_second_order(tmp_path):
    doc = dict(SECH, initial={"kind": "gaussian", "center": 1.0, "momentum": 1.0}, time={"T": 2.0, "dt": 0.04})
    path = _write(tmp_path, "ord", doc)
    finals = []
    for dt in (0.04, 0.02, 0.01, 0.0025):
        out = tmp_path / f"o{dt}"
        assert main(["evolve", "--scenario", path, "--out", str(out), "--dt-override", str(dt), "--quiet"]) == EXIT_OK
        finals.append(_report(out, "ord", "evolve")["final_norms"]["linf"])
    ref = finals[-1]
    e1, e2 = (abs(f - ref) for f in finals[:2])
    assert 3.0 < e1 / e2 < 5.0


def test_nan_initial_state_aborts(tmp_path):
    npy = tmp_path / "nan.npy"
    np.save(npy, np.full(512, np.nan, dtype=complex))
    doc = dict(SECH, initial={"kind": "file", "path": str(npy)})
    assert main(["evolve", "--scenario", _write(tmp_path, "nan", doc), "--out", str(tmp_path / "o"), "--quiet"]) == EXIT_ABORT


def test_solver_error_exit_code(tmp_path):
    doc = {
        "grid": {"dim": 3, "n": 8, "length": 10.0},
        "model": {"kind": "matrix", "mu": 1.0, "potentials": [{"shape": "gaussian", "amplitude": -1.0}]},
        "time": {"T": 1.0, "dt": 0.1},
    }
    assert main(["eig", "--scenario", _write(tmp_path, "m3", doc), "--out", str(tmp_path / "o"), "--quiet"]) == EXIT_SOLVER


def test_soft_warning_for_non_decaying_datum(tmp_path):
    doc = dict(SECH, initial={"kind": "bound_state"}, time={"T": 10.0, "dt": 0.05, "samples": 21},
               diagnostics=[{"name": "decay", "window": [1.0, 10.0]}])
    assert main(["decay", "--scenario", _write(tmp_path, "bs", doc), "--out", str(tmp_path / "o"), "--quiet"]) == EXIT_SOFT
    rep = _report(tmp_path / "o", "bs", "decay")
    assert rep["linf"]["status"].startswith("fails decay")


def test_translaw_free_matrix(tmp_path):
    doc = {
        "grid": {"dim": 1, "n": 256, "length": 40.0},
        "model": {"kind": "matrix", "potentials": [
            {"shape": "sech2", "amplitude": 0.0, "alpha": 1.0, "gamma": 0.7, "velocity": 1.0}]},
        "time": {"T": 1.0, "dt": 0.01},
    }
    out = tmp_path / "o"
    assert main(["translaw", "--scenario", _write(tmp_path, "tl", doc), "--out", str(out), "--quiet"]) == EXIT_OK
    rep = _report(out, "tl", "translaw")
    assert rep["discrepancy_split"] < 1e-10 and rep["discrepancy_exact"] < 1e-10


def test_complete_on_eigenstate(tmp_path):
    doc = dict(SECH, grid={"dim": 1, "n": 512, "length": 50.26548245743669},
               initial={"kind": "bound_state"}, time={"T": 4.0, "dt": 0.01, "samples": 21})
    out = tmp_path / "o"
    assert main(["complete", "--scenario", _write(tmp_path, "cp", doc), "--out", str(out), "--quiet"]) == EXIT_OK
    coeff = _report(out, "cp", "complete")["coefficients"][0]
    assert abs(complex(coeff["A"]["re"], coeff["A"]["im"]) - 1) < 1e-4


def test_kato_report_schema(tmp_path):
    doc = dict(FREE, time={"T": 1.0, "dt": 0.05}, diagnostics=[{"name": "kato", "R": 5.0, "M": [4, 8, 16]}])
    out = tmp_path / "o"
    assert main(["kato", "--scenario", _write(tmp_path, "k", doc), "--out", str(out), "--quiet"]) == EXIT_OK
    rep = _report(out, "k", "kato")
    assert "slope" in rep and len(rep["M"]) >= 3


def test_outputs_are_deterministic(tmp_path):
    path = _write(tmp_path, "det", dict(SECH, initial={"kind": "gaussian", "center": 2.0}))
    for d in ("a", "b"):
        assert main(["evolve", "--scenario", path, "--out", str(tmp_path / d), "--quiet", "--seed", "3"]) == EXIT_OK
    for name in ("det_evolve.json", "det_evolve_norms.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_batch_with_workers(tmp_path):
    paths = [_write(tmp_path, f"b{i}", dict(SECH, initial={"kind": "gaussian", "center": float(i)})) for i in range(2)]
    argv = ["evolve", "--out", str(tmp_path / "o"), "--workers", "2", "--quiet"]
    for p in paths:
        argv += ["--scenario", p]
    assert main(argv) == EXIT_OK
    assert (tmp_path / "o" / "b0_evolve.json").exists() and (tmp_path / "o" / "b1_evolve.json").exists()


def test_channels_on_free_model_is_config_error(tmp_path):
    assert main(["channels", "--scenario", _write(tmp_path, "f", FREE), "--out", str(tmp_path / "o"), "--quiet"]) == EXIT_CONFIG
