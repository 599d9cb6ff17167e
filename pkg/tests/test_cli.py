import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from rbmokit.cli import UsageError, main, parse_function, parse_lambda, parse_t_grid
from rbmokit.dominating import BallMeasure, Envelope, PowerLaw
from rbmokit.generate import uniform_grid

HERE = Path(__file__).parent
S3_FILE = HERE / "data" / "s3.json"


def run(tmp_path, *argv):
    return main([*argv, "--out", str(tmp_path)])


def test_analyze_grid_passes(tmp_path):
    assert run(tmp_path, "analyze", "--generate", "uniform_grid(8,1)") == 0
    doc = json.loads((tmp_path / "analyze.json").read_text())
    assert doc
    assert (tmp_path / "canonical_balls.csv").read_text().startswith("center,radius,members,measure")


def test_misfit_power_law_is_check_failure(tmp_path, capsys):
    assert run(tmp_path, "analyze", "--generate", "uniform_grid(8,1)", "--lambda", "power_law(0.5,1)") == 1
    assert "FAIL: upper_doubling" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["analyze", "--space", "missing.json"],
    ["rbmo", "--generate", "random_euclidean(25,0)", "--f", "random"],
    ["rbmo", "--space", str(S3_FILE), "--f", "0,0,1", "--rho", "1"],
    ["rbmo", "--space", str(S3_FILE), "--f", "0,0"],
    ["rbmo", "--space", str(S3_FILE), "--f", "0,0,1", "--lambda", "nonsense"],
    ["analyze"],
    ["frobnicate"],
    ["jn", "--space", str(S3_FILE), "--f", "0,0,1", "--alpha", "3"],
])
def test_usage_errors(tmp_path, argv):
    assert run(tmp_path, *argv) == 2


def test_force_lifts_cap(tmp_path):
    assert run(tmp_path, "rbmo", "--generate", "uniform_grid(21,1)", "--f", "sawtooth(3)", "--force") == 0


def test_rbmo_matches_golden(tmp_path):
    assert run(tmp_path, "rbmo", "--space", str(S3_FILE), "--lambda", "power_law(2,1)", "--f", "0,0,1", "--rho", "2") == 0
    got = json.loads((tmp_path / "rbmo.json").read_text())
    want = json.loads((HERE / "golden" / "s3_rbmo.json").read_text())
    assert got["A"] == pytest.approx(want["A"], rel=1e-9)
    assert got["A"] == pytest.approx(24 / 65, rel=1e-9)
    assert [(b["center"], b["radius"]) for b in got["balls"]] == [(b["center"], b["radius"]) for b in want["balls"]]
    for g, w in zip(got["balls"], want["balls"]):
        assert g["f_B"] == pytest.approx(w["f_B"], abs=1e-7)
    for name in ("slacks.csv", "constraints.txt", "doubling_checks.json"):
        assert (tmp_path / name).stat().st_size > 0


def test_reruns_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["rbmo", "--space", str(S3_FILE), "--f", "0,0,1", "--out", str(out)]) == 0
        assert main(["jn", "--generate", "uniform_grid(8,1)", "--f", "random", "--seed", "3", "--out", str(out)]) == 0
    for f in sorted(a.iterdir()):
        assert f.read_bytes() == (b / f.name).read_bytes(), f.name


def test_jn_constant_has_header_only_tail(tmp_path):
    assert run(tmp_path, "jn", "--generate", "uniform_grid(8,1)", "--f", "const(2)") == 0
    assert (tmp_path / "tail.csv").read_text() == "t,tail,envelope\n"
    assert "plot" in (tmp_path / "tail.gp").read_text()
    doc = json.loads((tmp_path / "jn.json").read_text())
    assert doc["A"] == 0 and doc["passed"]


def test_jn_reports_lp(tmp_path):
    assert run(tmp_path, "jn", "--generate", "uniform_grid(16,1)", "--f", "spike(5)", "--rho", "3") == 0
    doc = json.loads((tmp_path / "jn.json").read_text())
    assert [r["p"] for r in doc["lp"]] == [1, 2, 4]
    assert all(r["value"] <= r["bound"] for r in doc["lp"])


def test_maximal_and_generate(tmp_path):
    assert run(tmp_path, "maximal", "--generate", "cantor_dust(2)", "--f", "spike(1)") == 0
    assert (tmp_path / "maximal.csv").exists() and (tmp_path / "weak_type.json").exists()
    assert run(tmp_path, "generate", "--generate", "cantor_dust(2)") == 0
    gen = tmp_path / "space.json"
    assert main(["analyze", "--space", str(gen), "--out", str(tmp_path / "again")]) == 0


def test_config_file_and_override(tmp_path):
    conf = tmp_path / "conf.json"
    conf.write_text(json.dumps({"space": str(S3_FILE), "f": "0,0,1", "rho": 1.0}))
    assert run(tmp_path, "rbmo", "--config", str(conf)) == 2
    assert run(tmp_path, "rbmo", "--config", str(conf), "--rho", "2") == 0
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"no_such_option": 1}))
    assert run(tmp_path, "rbmo", "--config", str(bad)) == 2


def test_console_script_installed():
    assert shutil.which("rbmokit") is not None


def test_parsers():
    g = uniform_grid(6, 1)
    assert isinstance(parse_lambda("ball_measure", g), BallMeasure)
    lam = parse_lambda("power_law(2,1)", g)
    assert isinstance(lam, PowerLaw) and lam.C_lambda == 2.0
    assert isinstance(parse_lambda("envelope(2)", g), Envelope)
    assert parse_function("spike(2)", g, 0).tolist() == [0, 0, 1, 0, 0, 0]
    assert parse_function("const(1.5)", g, 0).tolist() == [1.5] * 6
    assert parse_function("sawtooth(2)", g, 0).tolist() == [0, 1, 0, 1, 0, 1]
    assert np.array_equal(parse_function("random", g, 4), parse_function("random", g, 4))
    assert parse_t_grid("0.5:1.5:3") == [0.5, 1.0, 1.5]
    with pytest.raises(UsageError):
        parse_t_grid("0:1:3")
