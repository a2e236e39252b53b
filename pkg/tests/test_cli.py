import csv
import json
import math
import subprocess
import sys

import pytest

from resolimit.cli import main

PAIR = {"spikes": [{"t": -0.01, "re": 1.0, "im": 0.0}, {"t": 0.01, "re": -1.0, "im": 0.0}]}


@pytest.fixture
def measure_file(tmp_path):
    p = tmp_path / "m.json"
    p.write_text(json.dumps(PAIR))
    return str(p)


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "gamma-star" in capsys.readouterr().out


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "resolimit.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "usage" in out.stdout


def test_missing_psf_is_validation_error(capsys):
    assert main(["gamma-star"]) == 2
    assert "--psf" in capsys.readouterr().err


def test_unknown_psf_and_flag():
    assert main(["certify", "--psf", "lorentzian", "--N", "101", "--sep", "1.5"]) == 2
    assert main(["certify", "--psf", "sinc", "--N", "101", "--sep", "1.5", "--bogus"]) == 2
    assert main(["certify", "--psf", "sinc", "--N", "100", "--sep", "1.5"]) == 2


def test_malformed_files_name_the_field(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"spikes": [{"t": 0.1}]}))
    assert main(["certify-multi", "--psf", "sinc", "--N", "101", "--measure", str(bad)]) == 2
    assert "'re'" in capsys.readouterr().err
    psf = tmp_path / "psf.json"
    psf.write_text(json.dumps({"name": "x", "B": 1.0}))
    assert main(["certify", "--psf", str(psf), "--N", "101", "--sep", "1.5"]) == 2
    assert "kind" in capsys.readouterr().err
    assert main(["certify-multi", "--psf", "sinc", "--N", "101", "--measure", str(tmp_path / "nope.json")]) == 2


def test_gamma_star_sinc(tmp_path, capsys):
    out = tmp_path / "report.json"
    assert main(["gamma-star", "--psf", "sinc", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["gamma_star"] == pytest.approx(1.132, abs=0.005)
    assert "1.13" in capsys.readouterr().out


def test_psf_export_roundtrip(tmp_path):
    p = tmp_path / "tri.json"
    assert main(["psf", "export", "--name", "triangular", "--out", str(p)]) == 0
    v = tmp_path / "v.json"
    assert main(["certify", "--psf", str(p), "--N", "101", "--sep", "2.0", "--out", str(v)]) == 0
    verdict = json.loads(v.read_text())
    assert verdict["interp_ok"] and verdict["extremal_ok"] and verdict["nondegenerate_ok"]
    assert {"sup_off_support", "sup_location", "second_derivs"} <= set(verdict)


def test_certify_multi(tmp_path, measure_file):
    v = tmp_path / "v.json"
    assert main(["certify-multi", "--psf", "sinc", "--N", "101", "--measure", measure_file,
                 "--out", str(v)]) == 0
    assert json.loads(v.read_text())["interp_ok"]


def test_autocorr_subcommands(tmp_path):
    out = tmp_path / "k.csv"
    assert main(["autocorr", "eval", "--psf", "sinc", "--l", "0", "--tau", "0,0.5", "--out", str(out)]) == 0
    rows = list(csv.reader(out.read_text().splitlines()))
    vals = [float(r[-1]) for r in rows[-2:]]
    assert vals[0] == pytest.approx(1.0, abs=1e-10)
    assert vals[1] == pytest.approx(2 / math.pi, abs=1e-10)
    conv = tmp_path / "c.csv"
    assert main(["autocorr", "convergence", "--psf", "triangular", "--N", "51,101", "--out", str(conv)]) == 0
    assert conv.exists()


def test_solve_outputs_and_determinism(tmp_path, measure_file):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["solve", "--psf", "sinc", "--measure", measure_file, "--snr", "60", "--seed", "7"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_text() == b.read_text()
    res = json.loads(a.read_text())
    assert len(res["estimate"]) == 2 and res["converged"]
    assert "duality_gap" in res
    side = tmp_path / "a_dual.csv"
    assert side.exists() and len(side.read_text().splitlines()) > 100


def test_sweep_thread_independent(tmp_path, monkeypatch):
    common = ["sweep", "--psf", "sinc", "--N", "31", "--trials", "3", "--sep", "1.0,2.0", "--no-gamma-ref"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["--threads", "1"] + common + ["--out", str(a)]) == 0
    monkeypatch.setenv("RESOLIMIT_THREADS", "2")
    assert main(common + ["--out", str(b)]) == 0
    assert a.read_text() == b.read_text()
    assert a.read_text().startswith("n_delta,trials,successes,rate,mean_loc_err,gamma_star_ref")
