"""Configuration parsing, dispatch, exit codes and emitted files."""
import json

import pytest

from subaudit import __version__
from subaudit.cli import RunConfig, main, parse_config, run
from subaudit.errors import PreconditionError
from subaudit.report import dumps


def invoke(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def payload(text):
    return json.loads(text)["payload"]


### parse_config

def test_delta_flags():
    cfg = parse_config(flags={"command": "delta", "example": "hopf", "k": 2, "point": "theta=1.0,phi=0.5,psi=0.3"})
    assert cfg.command == "delta" and cfg.example == "hopf" and cfg.k == 2
    assert (cfg.seed, cfg.restarts, cfg.tol) == (42, 64, 1e-6)


def test_flags_override_file():
    text = "[run]\ncommand = delta\nexample = hopf\nseed = 7  # file value\n"
    assert parse_config(text).seed == 7
    assert parse_config(text, {"seed": 9}).seed == 9


def test_unknown_key_suggestion():
    with pytest.raises(PreconditionError, match="did you mean 'restarts'"):
        parse_config("[run]\ncommand = delta\nexample = hopf\nrestart = 3\n")


def test_type_mismatch():
    with pytest.raises(PreconditionError, match="expects int"):
        parse_config("[run]\ncommand = delta\nexample = hopf\nseed = many\n")


def test_missing_required_key():
    with pytest.raises(PreconditionError):
        parse_config(flags={"command": "delta"})
    with pytest.raises(PreconditionError):
        parse_config(flags={"command": "inequality", "example": "hopf"})


def test_k_bound():
    with pytest.raises(PreconditionError, match="k must satisfy 2 ≤ k ≤ dim−1"):
        parse_config(flags={"command": "delta", "example": "hopf", "k": 0})


def test_ini_round_trip():
    cfg = parse_config(flags={"command": "inequality", "example": "warped_hyperbolic", "which": "thm33",
                              "params": {"r": 3}, "seed": 5, "tol": 1e-7, "point": "0.1,0,0,0"})
    again = parse_config(cfg.to_ini())
    assert again == cfg


### exit codes and payloads

def test_catalog_list(capsys):
    code, out, _ = invoke(capsys, "catalog", "list")
    assert code == 0
    env = json.loads(out)
    assert env["version"] == __version__
    assert "hopf" in [e["name"] for e in env["payload"]["entries"]]


def test_audit_flat(capsys):
    code, out, _ = invoke(capsys, "audit", "--example", "euclidean_projection", "--convention", "standard")
    assert code == 0
    for rec in payload(out)["audit"]["records"]:
        assert rec["residual"] <= 1e-9


def test_audit_auto_embeds_resolution(capsys):
    code, out, _ = invoke(capsys, "audit", "--example", "hopf", "--samples", "1")
    assert code == 0
    p = payload(out)
    assert p["convention"]["sigma"] == -1
    assert p["scalar_decomposition"]["resolved_residual"] <= 1e-5


def test_k_zero_exit_code(capsys):
    code, out, err = invoke(capsys, "delta", "--example", "hopf", "--k", "0")
    assert code == 2 and out == ""
    assert "k must satisfy 2 ≤ k ≤ dim−1" in err


def test_precondition_exit_codes(capsys):
    assert invoke(capsys, "delta", "--example", "nosuch")[0] == 2
    assert invoke(capsys, "inequality", "--which", "thm33", "--example", "hopf", "--convention", "standard")[0] == 2
    assert invoke(capsys, "delta", "--example", "hopf", "--point", "9,9,9")[0] == 2
    assert invoke(capsys, "corollary", "--example", "hopf", "--convention", "standard")[0] == 2


def test_numerical_quality_exit_code(capsys, tmp_path):
    # differencing across the kink of a non-smooth metric breaks the curvature symmetries
    cfg = tmp_path / "bad.ini"
    cfg.write_text(
        "[run]\ncommand = delta\nk = 2\n"
        "total_coords = x,y,z\ntotal_metric = 1; 2+abs(x)*y; 2+abs(y)*x\ntotal_domain = -1:1; -1:1; -1:1\n"
        "base_coords = x,y\nbase_metric = 1; 1\nbase_domain = -1:1; -1:1\nprojection = x; y\n"
        "point = 3e-6,2e-6,0.1\n"
    )
    code, _, err = invoke(capsys, "--config", str(cfg), "delta")
    assert code == 3, err


def test_user_defined_chart(capsys):
    code, out, _ = invoke(
        capsys, "delta", "--k", "2",
        "--total-coords", "t,x1,x2", "--total-metric", "1; exp(2*t); exp(2*t)", "--total-domain=-1:1;-1:1;-1:1",
        "--base-coords", "t", "--base-metric", "1", "--base-domain=-1:1", "--projection", "t",
    )
    assert code == 0
    assert payload(out)["delta"]["tau_total"] == pytest.approx(-3.0, abs=1e-6)


def test_wind_round_trip(capsys, tmp_path):
    csv_path = tmp_path / "linear.csv"
    code, _, _ = invoke(capsys, "wind", "synth", "--example", "linear", "--output", str(csv_path))
    assert code == 0
    omega_csv, svg = tmp_path / "omega.csv", tmp_path / "omega.svg"
    code, out, _ = invoke(capsys, "wind", "analyze", "--input", str(csv_path), "--surface-level", "0",
                          "--csv", str(omega_csv), "--svg", str(svg))
    assert code == 0
    p = payload(out)
    assert p["motion"]["omega_profile"] == pytest.approx([0.0, -1.0, -2.0, -3.0, -4.0], abs=1e-12)
    assert len(omega_csv.read_text().splitlines()) == 1 + 5 * 5 * 5
    text = svg.read_text()
    assert text.count("<polyline") == 1 and 'version="1.1"' in text
    assert p["divergence_theorem"]["residual"] <= 1e-12


def test_wind_analyze_missing_file(capsys, tmp_path):
    assert invoke(capsys, "wind", "analyze", "--input", str(tmp_path / "none.csv"))[0] == 2


def test_output_file(capsys, tmp_path):
    path = tmp_path / "out.json"
    code, out, _ = invoke(capsys, "catalog", "list", "--output", str(path))
    assert code == 0 and out == ""
    assert json.loads(path.read_text())["payload"]["entries"]


### determinism and serialization

def test_determinism_byte_identical(capsys):
    argv = ["inequality", "--which", "thm33", "--example", "flat_umbilical", "--k", "2", "--samples", "1"]
    _, a, _ = invoke(capsys, *argv)
    _, b, _ = invoke(capsys, *argv)
    assert dumps(json.loads(a)["payload"]) == dumps(json.loads(b)["payload"])
    assert a.split('"payload":')[1].split(',"timestamp"')[0] == b.split('"payload":')[1].split(',"timestamp"')[0]


def test_embedded_config_reproduces_payload(capsys):
    _, out, _ = invoke(capsys, "delta", "--example", "round_product", "--k", "2", "--seed", "3")
    env = json.loads(out)
    again = run(RunConfig(**env["config"]))
    assert dumps(again["payload"]) == dumps(env["payload"])


def test_json_is_sorted_with_17_digits():
    text = dumps({"b": 0.1, "a": [1, float("nan")], "c": {"z": 1.0 / 3.0, "y": True}})
    assert text == '{"a":[1,null],"b":0.10000000000000001,"c":{"y":true,"z":0.33333333333333331}}'
    assert json.loads(text)["c"]["z"] == 1.0 / 3.0
