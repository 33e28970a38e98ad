import math
import pathlib

import pytest

import contract_forge as cf

CONFIGS = pathlib.Path(__file__).resolve().parents[2] / "configs"


def config(name):
    return (CONFIGS / f"{name}.ini").read_text()


def test_parse_config_normalizes():
    parsed = cf.parse_config(config("entropic_single_asset"))
    assert parsed["mode"] == "markov"
    assert parsed["market"]["n_assets"] == 1
    assert parsed["agent"]["penalty"] == "entropic"


def test_invalid_config_raises():
    with pytest.raises(cf.ContractError) as info:
        cf.parse_config(config("bad_lambda"))
    assert info.value.args[1] == "InvalidPenalty" or "lambda" in info.value.args[0]


def test_solve_example_verifies():
    report = cf.solve(config("entropic_single_asset"))
    assert report["schema_version"] == "1"
    assert report["verification"]["passed"]
    solution = report["solution"]
    assert solution["weights"]["principal"] == 0.5
    effort = solution["per_time"][0]["A"][0]
    assert abs(effort - 0.04901961554177877) < 1e-9
    assert len(report["contract"]["theta"]) == 8


def test_verify_round_trip():
    text = config("tvar_tvar")
    report = cf.solve(text)
    checked = cf.verify(text, report)
    assert checked["verification"]["passed"]
    assert checked["solution"] == report["solution"]


def test_mode_override():
    report = cf.solve(config("entropic_single_asset"), mode="general")
    assert report["solution"]["mode"] == "general"
    assert report["solution"]["nodes"]


def test_oce_value():
    x = [1.0, -1.0]
    p = [0.5, 0.5]
    entropic = cf.oce_value(x, p, "entropic", 1.0)
    assert abs(entropic + math.log(0.5 * math.exp(-1.0) + 0.5 * math.exp(1.0))) < 1e-14
    assert abs(cf.oce_value(x, p, "tvar", 0.5) + 1.0) < 1e-14
    with pytest.raises(cf.ContractError):
        cf.oce_value(x, p, "tvar", 2.0)
