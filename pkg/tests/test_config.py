import json

import pytest

from particle_limits.config import ConfigError, parse_config, parse_flag_value

MINIMAL = {"seed": 1, "time": 0.05, "model": {"kind": "ssep", "n": 64},
           "profile": {"name": "constant", "value": 0.5}}


def test_minimal_ssep_config_is_valid():
    cfg = parse_config(MINIMAL, command="simulate")
    assert cfg.model["n"] == 64 and cfg.time == 0.05 and cfg.seed == 1
    assert cfg.grid["m"] == 256
    assert cfg.checkpoint_times().tolist() == pytest.approx([0.01, 0.02, 0.03, 0.04, 0.05])
    assert cfg.checkpoint_times(include_zero=True)[0] == 0.0


def test_json_text_and_flags_override_file():
    cfg = parse_config(json.dumps(MINIMAL), {"model.n": 128, "output.svg": False}, command="simulate")
    assert cfg.model["n"] == 128 and cfg.output["svg"] is False


def test_dense_profile_rejected_for_exclusion():
    doc = {**MINIMAL, "profile": {"name": "constant", "value": 1.5}}
    with pytest.raises(ConfigError, match="profile"):
        parse_config(doc, command="simulate")
    # the same profile is fine for the unbounded model
    parse_config({**doc, "model": {"kind": "bdrw", "n": 8}}, command="simulate")


def test_power_family_resolves():
    doc = {**MINIMAL, "model": {"kind": "bdrw", "n": 16, "rates": {"family": "power", "p": 2}}}
    cfg = parse_config(doc, command="simulate")
    from particle_limits.rates import rates_from_dict
    assert rates_from_dict(cfg.model["rates"]).f(3.0) == pytest.approx(9.0)


@pytest.mark.parametrize("flags, key", [
    ({"model.nn": 4}, "model.nn"),
    ({"bogus": 1}, "bogus"),
    ({"model.n": 1}, "model.n"),
    ({"model.n": "many"}, "model.n"),
    ({"model.kind": "zrp"}, "model.kind"),
    ({"seed": -1}, "seed"),
    ({"output.png": "yes"}, "output.png"),
    ({"checkpoints": [0.02, 0.01]}, "checkpoints"),
    ({"grid.dt": 1.0}, "grid.dt"),
    ({"model.rates": {"family": "warp"}}, "model.rates"),
    ({"schedule.ns": [64, 32]}, "schedule"),
])
def test_errors_name_the_key(flags, key):
    with pytest.raises(ConfigError, match=key.replace(".", r"\.")):
        parse_config(MINIMAL, flags, command="simulate")


def test_time_required_for_simulation():
    with pytest.raises(ConfigError, match="time"):
        parse_config({"model": {"kind": "ssep", "n": 8}}, command="simulate")
    parse_config({"model": {"kind": "ssep", "n": 8}}, command="check")


def test_blowup_grid_default_and_checkpoint_bound():
    assert parse_config({}, command="blowup").grid["m"] == 64
    with pytest.raises(ConfigError, match="checkpoints"):
        parse_config(MINIMAL, {"checkpoints": [0.01, 0.2]}, command="simulate")


def test_hydrodynamic_converge_needs_unit_ell():
    with pytest.raises(ConfigError, match="schedule.rule"):
        parse_config(MINIMAL, {"schedule.rule": "power"}, command="converge")


def test_invalid_json_text():
    with pytest.raises(ConfigError, match="JSON"):
        parse_config("{not json", command="simulate")


def test_flag_values_parse_as_json_then_string():
    assert parse_flag_value("3") == 3
    assert parse_flag_value("[1, 2]") == [1, 2]
    assert parse_flag_value("true") is True
    assert parse_flag_value("cosine") == "cosine"


def test_round_trip_through_dict():
    cfg = parse_config(MINIMAL, command="simulate")
    again = parse_config(cfg.to_dict())
    assert again == cfg
