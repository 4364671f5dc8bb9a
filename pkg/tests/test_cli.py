import io
import json
import subprocess
import sys

import pytest

from pgcore.cli import build_parser, main, parse_point, run
from pgcore.families import random_economy, save_economy, symmetric_quadratic


@pytest.fixture
def quad_file(tmp_path):
    path = tmp_path / "quad2.json"
    save_economy(symmetric_quadratic(), path)
    return str(path)


def call(argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(build_parser().parse_args(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def call_json(argv):
    code, out, err = call(argv + ["--json"])
    return code, json.loads(out)


def test_point_parsing():
    assert parse_point("1.0,5e-1,0") == [1.0, 0.5, 0.0]
    with pytest.raises(Exception):
        parse_point("1,x")


def test_check_corner(quad_file):
    code, doc = call_json(["check", "--economy", quad_file, "--point", "1.0,1.0"])
    assert code == 0
    report = doc["report"]
    assert doc["schema"] == "v1" and report["status"] == "IN_CORE"
    assert report["programs_solved"] <= 6


def test_check_text(quad_file):
    code, out, _ = call(["check", "--economy", quad_file, "--point", "1,1"])
    assert code == 0 and "status: IN_CORE" in out and "certificate valid: True" in out


def test_compare_half_point(quad_file):
    code, doc = call_json(["compare", "--economy", quad_file, "--point", "0.5,0.5", "--grid-res", "21"])
    assert code == 0
    r = doc["report"]
    assert r["algorithm_in_core"] is False and r["oracle_in_core"] is False
    assert r["agreement"] is True
    assert r["characterization"]["status"] == "PASS"


def test_dimension_mismatch_exits_2(quad_file):
    code, out, err = call(["check", "--economy", quad_file, "--point", "1.0,1.0,1.0"])
    assert code == 2 and "DimensionMismatch" in err


def test_bad_inputs_exit_2(quad_file, tmp_path):
    assert call(["check", "--economy", str(tmp_path / "nope.json"), "--point", "1,1"])[0] == 2
    assert call(["check", "--economy", quad_file, "--point", "1.5,1"])[0] == 2
    assert call(["check", "--economy", quad_file, "--point", "1,1", "--mode", "approx"])[0] == 2
    assert call(["check", "--economy", quad_file, "--point", "1,1", "--epsilon", "1e-3"])[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"n": 2, "family": "affine", "seed": 1, "extra": 0}')
    code, doc = call_json(["validate", "--economy", str(bad)])
    assert code == 2 and doc["error"] == "ConfigParseError"


def test_parse_errors_exit_2(quad_file):
    for argv in (["check", "--economy", quad_file], ["check", "--point", "1,1"], ["fly"],
                 ["check", "--economy", quad_file, "--point", "a,b"]):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 2


def test_other_verbs(quad_file):
    assert call_json(["pareto", "--economy", quad_file, "--point", "0.5,0.5"])[1]["report"]["efficient"] is False
    lin = call_json(["lindahl", "--economy", quad_file, "--point", "1,1"])[1]["report"]
    assert lin["is_lindahl"] is True
    zero = call_json(["lindahl", "--economy", quad_file, "--point", "0,0"])[1]["report"]
    assert zero["skipped"] is True
    bf = call_json(["bruteforce", "--economy", quad_file, "--point", "0.2,0.2", "--grid-res", "41"])[1]
    assert bf["report"]["decided"] is False
    val = call_json(["validate", "--economy", quad_file])[1]["report"]
    assert val["valid"] is True


def test_approx_mode_default_kappa(quad_file):
    code, doc = call_json(["check", "--economy", quad_file, "--point", "1,1", "--mode", "approx", "--eps-core", "0.01"])
    assert code == 0
    cfg = doc["report"]["config"]
    assert cfg["mode"] == "approx" and cfg["kappa"] > 0


def test_compare_mismatch_exits_1(quad_file, monkeypatch):
    import pgcore.cli as cli

    class Fake:
        agreement = False
        algorithm_decided = True
        oracle_verdict = type("O", (), {"decided": False, "strength": 1.0})()
        verdict = type("V", (), {"status": "IN_CORE"})()
        characterization = type("C", (), {"status": "FAIL", "pareto": True,
                                          "individually_rational": True, "connected": True})()

        def to_dict(self):
            return {"agreement": False}

    monkeypatch.setattr(cli, "compare", lambda *a, **k: Fake())
    assert call(["compare", "--economy", quad_file, "--point", "1,1"])[0] == 1


def test_json_is_byte_identical(tmp_path):
    path = tmp_path / "l3.json"
    save_economy(random_economy("logagg", 3, 7), path)
    argv = ["compare", "--economy", str(path), "--point", "0.5,0.6,0.7", "--seed", "3", "--json"]
    assert call(argv)[1] == call(argv)[1]


def test_module_entry_point(quad_file):
    proc = subprocess.run(
        [sys.executable, "-m", "pgcore", "check", "--economy", quad_file, "--point", "1,1,1"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 2
