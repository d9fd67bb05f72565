import json

import pytest

from einstein27 import constants
from einstein27.collapse import CollapseModel
from einstein27.config import ConfigError, RunConfig, apply_overrides, reference_config_dict
from einstein27.simkit import Coherent, Fock1


def test_reference_config_defaults():
    cfg = RunConfig.reference()
    assert cfg.collapse is CollapseModel.HELLWIG_KRAUS
    assert isinstance(cfg.source.statistics, Fock1)
    d2, d3 = cfg.detector("D2"), cfg.detector("D3")
    assert d2.position_x == pytest.approx(-d3.position_x)
    assert d2.position_x == pytest.approx(4.0 * 0.6944, abs=1e-3)
    assert cfg.analysis.range_ps == (-51000, 51000)
    assert cfg.analysis.bin_ps == 2000 and cfg.analysis.window_ps == 2000
    assert cfg.run.seed == 1927


def test_overrides_and_list_indices():
    cfg = RunConfig.reference(["source.statistics=\"Coherent\"", "detectors.1.afterpulse_prob=0", "run.seed=5"])
    assert isinstance(cfg.source.statistics, Coherent)
    assert cfg.detector("D3").afterpulse_prob == 0
    assert cfg.run.seed == 5
    # bare words are taken as strings
    assert apply_overrides({}, ["collapse.model=Instantaneous"]) == {"collapse": {"model": "Instantaneous"}}
    with pytest.raises(ConfigError):
        apply_overrides({"a": [1]}, ["a.5=2"])
    with pytest.raises(ConfigError):
        apply_overrides({}, ["novalue"])


def test_overrides_do_not_mutate_input():
    doc = reference_config_dict()
    apply_overrides(doc, ["run.seed=9"])
    assert doc["run"]["seed"] == 1927


def test_hash_tracks_content():
    a, b = RunConfig.reference(), RunConfig.reference()
    assert a.config_hash() == b.config_hash()
    assert RunConfig.reference(["run.seed=2"]).config_hash() != a.config_hash()


def test_missing_seed():
    doc = reference_config_dict()
    del doc["run"]["seed"]
    with pytest.raises(ConfigError, match="seed"):
        RunConfig.from_dict(doc)


def test_unknown_section():
    with pytest.raises(ConfigError, match="unknown"):
        RunConfig.from_dict({**reference_config_dict(), "lasers": {}})


@pytest.mark.parametrize(
    "override,match",
    [
        ("detectors.0={\"name\":\"D2\",\"position_x\":4.0}", "off the screen"),
        ("run.duration_s=0", "duration"),
        ("run.primary=\"D9\"", "primary"),
        ("source.statistics=\"Thermal\"", "statistics"),
        ("detectors.1.position_x=0.0", "order or position_x"),
        ("source.herald_rate=-1", "herald_rate"),
        ("grating.period_p=0", "period_p"),
    ],
)
def test_invalid_configs(override, match):
    with pytest.raises(ConfigError, match=match):
        RunConfig.reference([override])


def test_order_placement_needs_grating():
    with pytest.raises(ConfigError, match="needs a grating"):
        RunConfig.reference(["grating=null"])


def test_no_grating_uses_spot():
    doc = reference_config_dict()
    doc["grating"] = None
    doc["detectors"] = [{"name": "D2", "position_x": 0.0}]
    cfg = RunConfig.from_dict(doc)
    assert cfg.screen_profile() is cfg.spot_profile()
    with pytest.raises(ConfigError):
        cfg.grating_profile()


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        RunConfig.load(tmp_path / "missing.json")
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError, match="invalid JSON"):
        RunConfig.load(p)
    p.write_text("[]")
    with pytest.raises(ConfigError, match="object"):
        RunConfig.load(p)


def test_load_roundtrip(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(reference_config_dict()))
    cfg = RunConfig.load(p, ["run.seed=3"])
    assert cfg.run.seed == 3
    assert cfg.to_dict()["run"]["seed"] == 3


def test_phase_plan_moves_primary_to_centre():
    cfg = RunConfig.reference(["screen.sample_count=65536"])
    plan = cfg.phase_plan()
    base_prof, base_dets = plan["baseline"]
    grat_prof, grat_dets = plan["grating"]
    assert [d.position_x for d in base_dets][0] == 0.0
    assert base_dets[1] == cfg.detector("D3")
    assert grat_dets == cfg.detectors
    assert base_prof.center_of_mass == pytest.approx(0.0, abs=1e-9)
    assert grat_prof.positions.max() <= constants.SLIT_SPREAD_EXTENT
