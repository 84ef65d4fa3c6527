import io
import json
import math
from pathlib import Path

import pytest

from affine_moments import models, spec_io
from affine_moments.cli import parse_number, run
from affine_moments.transform import exp_moment

from oracles import cir_exponent

SPECS = Path(__file__).parent.parent / "model_specs"


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run([str(a) for a in argv], stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def pure_jump_spec(tmp_path):
    path = tmp_path / "pure_jump.json"
    path.write_text(spec_io.dumps(spec_io.ModelSpec(models.pure_jump(rate=3.0))))
    return path


def test_moment_cir():
    code, out, _ = call("moment", "--model", SPECS / "cir.json", "--y", "-5", "--x", "0.04", "--T", "1")
    assert code == 0
    doc = json.loads(out)
    p, q = cir_exponent(1.0, 0.02, 0.2, -5.0, 1.0)
    assert doc["verdict"] == "finite"
    assert doc["value"] == pytest.approx(math.exp(p + 0.04 * q), rel=1e-8)
    assert doc["value"] == exp_moment(models.cir(), [0.04], [-5.0], 1.0).value


def test_moment_zero_exponent():
    code, out, _ = call("moment", "--model", SPECS / "cir.json", "--y", "0", "--x", "0.04", "--T", "1")
    assert code == 0
    assert '"verdict": "finite"' in out and '"value": 1.0' in out


def test_scenario_defaults():
    code, out, _ = call("moment", "--model", SPECS / "cir.json", "--scenario", "base")
    assert code == 0
    ref = exp_moment(models.cir(), [0.04], [-5.0], 1.0).value
    assert json.loads(out)["value"] == ref


def test_validate_bad_drift():
    code, out, _ = call("validate", "--model", SPECS / "bad_drift.json")
    assert code == 2
    assert "b ∈ D" in json.loads(out)["violations"][0]["message"]


def test_validate_good_model():
    code, out, _ = call("validate", "--model", SPECS / "heston.json")
    assert code == 0 and json.loads(out)["passed"] is True


def test_usage_errors(tmp_path):
    assert call("moment", "--model", SPECS / "cir.json", "--bogus", "1")[0] == 1
    assert call("frobnicate", "--model", SPECS / "cir.json")[0] == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = call("validate", "--model", bad)
    assert code == 1 and "cannot read model" in err
    assert call("validate", "--model", tmp_path / "missing.json")[0] == 1
    assert call("moment", "--model", SPECS / "cir.json", "--x", "0.04", "--T", "1")[0] == 1


def test_invalid_params_exit_2():
    assert call("moment", "--model", SPECS / "bad_drift.json", "--y", "0", "--x", "0.04",
                "--T", "1")[0] == 2


def test_domain_error_exit_3(pure_jump_spec):
    code, _, err = call("solve", "--model", pure_jump_spec, "--y", "3.5", "--T", "1")
    assert code == 3 and "domain" in err
    assert call("moment", "--model", SPECS / "cir.json", "--y", "1", "--x", "-0.1",
                "--T", "1")[0] == 3


def test_csv_and_json_agree():
    base = ("moment", "--model", SPECS / "cir.json", "--y", "-5", "--x", "0.04", "--T", "1")
    _, js, _ = call(*base)
    _, csv, _ = call(*base, "--format", "csv")
    rows = dict(line.split(",", 1) for line in csv.strip().splitlines()[1:])
    doc = json.loads(js)
    assert float(rows["value"]) == doc["value"]
    assert float(rows["p"]) == doc["p"] and float(rows["q[0]"]) == doc["q"][0]


def test_solve_csv_trajectory():
    code, out, _ = call("solve", "--model", SPECS / "cir.json", "--y", "-5", "--T", "1")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "t,p,q_1" and lines[-1].startswith("# ")
    status = json.loads(lines[-1][2:])
    assert status["status"]["kind"] == "completed"
    code, js, _ = call("solve", "--model", SPECS / "cir.json", "--y", "-5", "--T", "1",
                       "--format", "json")
    assert json.loads(js)["p"] == float(lines[-2].split(",")[1])


def test_cf_and_fourier_and_bond():
    code, out, _ = call("cf", "--model", SPECS / "heston.json", "--scenario", "base")
    assert code == 0 and json.loads(out)["kind"] == "value"
    code, out, _ = call("fourier", "--model", SPECS / "black_scholes.json", "--x", "0", "--T", "1",
                        "--strike", "1", "--theta", "1", "--l", "0")
    assert code == 0 and json.loads(out)["value"] == pytest.approx(0.0796557, abs=1e-7)
    code, out, _ = call("bond", "--model", SPECS / "cir.json", "--x", "0.03", "--T", "5")
    assert code == 0 and 0 < json.loads(out)["value"] < 1


def test_explosion_and_martingale():
    code, out, _ = call("explosion", "--model", SPECS / "cir.json", "--y", "60", "--tol", "1e-8")
    assert code == 0
    doc = json.loads(out)
    assert doc["verdict"] == "finite"
    assert doc["t_plus"] == pytest.approx(math.log(1 / (1 - 50 / 60)), rel=1e-6)
    code, out, _ = call("martingale", "--model", SPECS / "heston.json")
    assert code == 0 and json.loads(out)["sufficient"] is True


def test_out_file(tmp_path):
    target = tmp_path / "res.json"
    code, out, _ = call("validate", "--model", SPECS / "cir.json", "--out", target)
    assert code == 0 and out == ""
    assert json.loads(target.read_text())["passed"] is True


def test_mc_verify_deterministic():
    argv = ("mc-verify", "--model", SPECS / "cir.json", "--scenario", "base", "--paths", "2000",
            "--steps", "20", "--seed", "5")
    a, b = call(*argv), call(*argv)
    assert a[0] == 0 and a[1] == b[1]
    assert json.loads(a[1])["max_abs_z"] < 5


def test_complex_tokens():
    assert parse_number("1.5") == 1.5
    assert parse_number("0+2i") == 2j
    assert parse_number("-0.5-3i") == complex(-0.5, -3)
    code, out, _ = call("cf", "--model", SPECS / "cir.json", "--x", "0.04", "--T", "1",
                        "--u=-1+2i")
    assert code == 0 and json.loads(out)["kind"] == "value"
