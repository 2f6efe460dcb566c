"""YAML config and scenario loading."""

import numpy as np
import pytest
import yaml

from chirploc.config import (
    config_from_dict,
    config_to_dict,
    default_config,
    load_config,
    load_scenario,
    save_config,
    scenario_from_dict,
)
from chirploc.errors import ConfigError


def test_defaults_carry_the_working_constants():
    cfg = default_config()
    assert cfg.channel.c == 1480.0
    assert cfg.chirp.sample_rate == 48000
    assert (cfg.chirp.f_start, cfg.chirp.f_end) == (4500.0, 8500.0)
    assert cfg.chirp.duration == 0.010
    assert cfg.layout.stagger_samples == 9600
    assert cfg.layout.period == 10.0
    assert len(cfg.constellation) == 4
    assert cfg.volume.radius == 3.65
    assert cfg.solver.tol == 1e-6
    assert cfg.solver.max_iter == 25
    assert np.allclose(cfg.constellation.sigmas, 0.05)


def test_empty_mapping_is_a_valid_config():
    cfg = config_from_dict({})
    assert config_to_dict(cfg) == config_to_dict(default_config())


def test_round_trip_through_yaml_is_identity(tmp_path):
    cfg = default_config()
    path = tmp_path / "cfg.yaml"
    save_config(cfg, path)
    again = load_config(path)
    assert config_to_dict(again) == config_to_dict(cfg)


def test_sparse_override_keeps_other_defaults():
    cfg = config_from_dict({"channel": {"noise_sigma": 0.25}})
    assert cfg.channel.noise_sigma == 0.25
    assert cfg.channel.c == 1480.0
    assert cfg.chirp.f_end == 8500.0


def test_unknown_section_rejected():
    with pytest.raises(ConfigError, match="unknown config section"):
        config_from_dict({"chirppp": {}})


def test_channel_speaker_count_mismatch_rejected():
    five = [[3.6, 0, 0], [0, 3.6, 0.9], [-3.6, 0, 1.8], [0, -3.6, 2.7],
            [2.0, 2.0, 1.0]]
    with pytest.raises(ConfigError, match="4 channels"):
        config_from_dict({"constellation": {"speakers": five}})


def test_three_speakers_rejected():
    with pytest.raises(ConfigError):
        config_from_dict(
            {"constellation": {"speakers": [[3.6, 0, 0], [0, 3.6, 0], [-3.6, 0, 0]]}})


def test_overlapping_stagger_rejected():
    with pytest.raises(ConfigError, match="stagger"):
        config_from_dict({"layout": {"stagger_samples": 400}})


def test_codebook_rate_must_match_ranging_rate():
    with pytest.raises(ConfigError, match="sample_rate"):
        config_from_dict({"codebook": {"commands": {
            "forward": {"f_start": 500, "f_end": 1500, "duration": 0.005,
                        "sample_rate": 44100},
        }}})


def test_command_band_collisions_rejected_on_load():
    with pytest.raises(ConfigError):
        config_from_dict({"codebook": {"commands": {
            "forward": {"f_start": 500, "f_end": 1500, "duration": 0.005},
            "left": {"f_start": 1400, "f_end": 2400, "duration": 0.005},
        }}})


def test_volume_parsing():
    cfg = config_from_dict({"volume": {"kind": "box", "mins": [0, 0, 0],
                                       "maxs": [1, 2, 3]}})
    assert cfg.volume.maxs == (1.0, 2.0, 3.0)
    with pytest.raises(ConfigError, match="mins"):
        config_from_dict({"volume": {"kind": "box", "maxs": [1, 2, 3]}})
    with pytest.raises(ConfigError, match="kind"):
        config_from_dict({"volume": {"kind": "sphere"}})


def test_missing_file_and_bad_yaml(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "absent.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("chirp: [unclosed")
    with pytest.raises(ConfigError, match="YAML"):
        load_config(bad)


def test_section_must_be_mapping():
    with pytest.raises(ConfigError, match="mapping"):
        config_from_dict({"chirp": [4500, 8500]})


def test_resolved_config_is_machine_readable(tmp_path):
    path = tmp_path / "cfg.yaml"
    save_config(default_config(), path)
    raw = yaml.safe_load(path.read_text())
    assert raw["channel"]["c"] == 1480.0
    assert raw["codebook"]["commands"]["forward"]["f_start"] == 500.0


# ---------------------------------------------------------------- scenarios


def test_scenario_defaults_and_waypoints():
    sc = scenario_from_dict({"waypoints": [
        {"position": [1.0, 0.5, 1.2], "clock_bias": 0.1},
        {"position": [0.0, 0.0, 1.0]},
    ]})
    assert len(sc.waypoints) == 2
    assert sc.waypoints[0].clock_bias == 0.1
    assert sc.waypoints[1].clock_bias == 0.0
    assert sc.waypoints[1].recording_length == 2.5
    assert sc.trials == 1
    assert sc.pseudorange_noise_sigma == 0.0


def test_scenario_requires_waypoints():
    with pytest.raises(ConfigError, match="waypoints"):
        scenario_from_dict({})
    with pytest.raises(ConfigError, match="waypoints"):
        scenario_from_dict({"waypoints": []})


def test_scenario_waypoint_needs_position():
    with pytest.raises(ConfigError, match="position"):
        scenario_from_dict({"waypoints": [{"clock_bias": 0.1}]})


def test_scenario_rejects_negative_noise():
    with pytest.raises(ConfigError):
        scenario_from_dict({"waypoints": [{"position": [0, 0, 1]}],
                            "pseudorange_noise_sigma": -0.1})


def test_scenario_file_round_trip(tmp_path):
    path = tmp_path / "sc.yaml"
    path.write_text(yaml.safe_dump({
        "waypoints": [{"position": [1, 2, 0.5]}],
        "trials": 3,
        "seed": 9,
    }))
    sc = load_scenario(path)
    assert sc.trials == 3
    assert sc.seed == 9
    assert np.allclose(sc.waypoints[0].position, [1.0, 2.0, 0.5])
