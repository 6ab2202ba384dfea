import json

import pytest

from winplan import config
from winplan.errors import ConfigError
from winplan.scenario import Exponential


@pytest.mark.parametrize("name", config.preset_names())
def test_preset_round_trip(name):
    doc = config.load_document(config.preset_path(name))
    spec = config.spec_from_dict(doc)
    expanded = config.spec_to_dict(spec)
    again = config.spec_from_dict(json.loads(json.dumps(expanded)))
    assert again == spec
    assert config.config_hash(again) == config.config_hash(spec)


def test_presets_present():
    assert {"s1", "s2", "s3", "s4", "heartfid", "heartfid_observed"} <= set(config.preset_names())


def test_unknown_preset():
    with pytest.raises(ConfigError):
        config.preset_path("nope")


def test_event_prob_form():
    sc = config.load_scenario(config.preset_path("heartfid"))
    assert isinstance(sc.control[0], Exponential)
    assert sc.control[0].rate == pytest.approx(0.108699, abs=1e-6)
    assert sc.treatment[0].rate == pytest.approx(0.0899, abs=5e-5)


def minimal():
    return {
        "endpoints": [{
            "type": "continuous",
            "control": {"family": "normal", "mean": 0, "sd": 1},
            "effect": {"kind": "mean_difference", "value": 0.5},
        }],
        "design": {"m": 50},
    }


def test_defaults_fill_in():
    spec = config.spec_from_dict(minimal())
    assert spec.estimator.n_sp == 2000
    assert spec.dependence.kind == "independence"
    assert spec.design.measures == ("WR", "NB", "WO", "DOOR")


@pytest.mark.parametrize("mutate,pointer", [
    (lambda d: d["endpoints"][0]["control"].update(sd=-1), "/endpoints/0/control/sd"),
    (lambda d: d["endpoints"][0].update(type="weird"), "/endpoints/0/type"),
    (lambda d: d["design"].update(alpha=2), "/design/alpha"),
    (lambda d: d.update(extra=1), "/"),
])
def test_schema_errors_name_pointer(mutate, pointer):
    doc = minimal()
    mutate(doc)
    with pytest.raises(ConfigError) as exc:
        config.spec_from_dict(doc)
    assert exc.value.path == pointer


def test_effect_or_treatment_required():
    doc = minimal()
    del doc["endpoints"][0]["effect"]
    with pytest.raises(ConfigError):
        config.spec_from_dict(doc)


def test_json_syntax_error_reports_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"endpoints": [\n')
    with pytest.raises(ConfigError, match="line 2"):
        config.load_document(path)


def test_hash_tracks_content():
    a = config.spec_from_dict(minimal())
    doc = minimal()
    doc["design"]["m"] = 51
    b = config.spec_from_dict(doc)
    assert config.config_hash(a) != config.config_hash(b)
    assert len(config.config_hash(a)) == 16
