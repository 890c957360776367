import json
import math
import os
import pathlib
import subprocess

import pytest

import sweepmp

ROOT = pathlib.Path(__file__).resolve().parents[2]
FIXTURES = ROOT / "fixtures"
SCHEMAS = ROOT / "schemas"


def fixture(name):
    return sweepmp.load_problem(str(FIXTURES / f"{name}.json"))


def test_problem_metadata():
    p = fixture("two_sphere")
    assert (p.n, p.m, p.constraint_count) == (3, 1, 2)
    assert p.horizon == 2.75


def test_wall_steady_state():
    # On the wall the multiplier balances f = 1, so x = 1 + sigma + log(1/gamma)/gamma.
    g = 100.0
    tr = sweepmp.simulate(fixture("wall_1d"), g)
    assert tr["x"][-1][0] == pytest.approx(1 + 1 / g + math.log(1 / g) / g, rel=1e-6)
    assert tr["max_invariance_excess"] <= 1e-9


def test_catching_up_oracle():
    tr = sweepmp.catching_up(fixture("wall_1d"), 1e-3)
    err = max(abs(x[0] - min(t, 1.0)) for t, x in zip(tr["t"], tr["x"]))
    assert err <= 2e-3


def test_a1_discrimination():
    assert sweepmp.validate_a1(fixture("two_sphere"))["pass"]
    bad = sweepmp.validate_a1(fixture("obtuse_corner"))
    assert not bad["inner_ok"]


def test_interior_certificate():
    r = sweepmp.certify(fixture("interior"), 200.0)
    assert r["verdict"] and r["corollary"]


def test_expressions():
    assert sweepmp.evaluate("x1^2 + sin(t)", {"x1": 3.0, "t": 0.0}) == 9.0
    d = sweepmp.derivative("x1^3", "x1", ["x1"])
    assert sweepmp.evaluate(d, {"x1": 2.0}) == pytest.approx(12.0)
    with pytest.raises(sweepmp.SweepmpError, match="unknown_variable"):
        sweepmp.evaluate("x1 + y", {"x1": 1.0})


# CLI outputs against the shipped schemas.

jsonschema = pytest.importorskip("jsonschema")
referencing = pytest.importorskip("referencing")


def validator(name):
    resources = []
    for f in SCHEMAS.glob("*.json"):
        doc = json.loads(f.read_text())
        resources.append((doc["$id"], referencing.Resource.from_contents(doc)))
    registry = referencing.Registry().with_resources(resources)
    schema = json.loads((SCHEMAS / f"{name}.json").read_text())
    cls = jsonschema.validators.validator_for(schema)
    cls.check_schema(schema)
    return cls(schema, registry=registry)


@pytest.mark.parametrize("name", ["wall_1d", "moving_wall", "obtuse_corner", "interior", "two_sphere"])
def test_fixtures_match_problem_schema(name):
    validator("problem").validate(json.loads((FIXTURES / f"{name}.json").read_text()))


def sweepctl(*args):
    exe = os.environ.get("SWEEPCTL")
    if not exe:
        pytest.skip("SWEEPCTL not set")
    return subprocess.run([exe, *args], capture_output=True, text=True).returncode


@pytest.mark.parametrize(
    "command, extra, reports",
    [
        ("validate", [], ["a1_report"]),
        ("simulate", ["--dt", "0.001", "--gamma", "50,100"], ["simulate"]),
        ("converge", [], ["convergence_report"]),
        ("adjoint", ["--gamma", "50,100"], ["diagnostics"]),
        ("certify", [], ["mp_report"]),
    ],
)
def test_cli_reports_validate(tmp_path, command, extra, reports):
    code = sweepctl(command, "--problem", str(FIXTURES / "wall_1d.json"), "--out", str(tmp_path), *extra)
    assert code == 0
    for r in reports:
        validator(r).validate(json.loads((tmp_path / f"{r}.json").read_text()))


def test_cli_error_report(tmp_path):
    bad = tmp_path / "bad.json"
    doc = json.loads((FIXTURES / "wall_1d.json").read_text())
    doc["constraints"] = ["x1 - y"]
    bad.write_text(json.dumps(doc))
    assert sweepctl("validate", "--problem", str(bad), "--out", str(tmp_path)) == 2
    err = json.loads((tmp_path / "error.json").read_text())
    validator("error").validate(err)
    assert err["error"]["pointer"] == "/constraints/0"
    assert err["error"]["offset"] == 5


def test_example_bundle_validates():
    out = pathlib.Path(os.environ.get("SWEEPMP_CLI_OUT", "")) / "example"
    if not (out / "example.json").exists():
        pytest.skip("example bundle not produced yet")
    validator("example").validate(json.loads((out / "example.json").read_text()))
    validator("contact").validate(json.loads((out / "contact.json").read_text()))


def test_schemas_reject_malformed_reports():
    v = validator("mp_report")
    with pytest.raises(jsonschema.ValidationError):
        v.validate({"verdict": True})
    v = validator("error")
    with pytest.raises(jsonschema.ValidationError):
        v.validate({"error": {"kind": "x", "message": "m", "extra": 1}, "metadata": {}})
