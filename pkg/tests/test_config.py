"""Tests for strict configuration parsing."""

from __future__ import annotations

import json

import pytest

from sg4d.config import (
    PipelineConfig,
    apply_overrides,
    config_from_dict,
    config_to_dict,
    load_config,
)
from sg4d.errors import ConfigError


class TestDefaults:
    def test_empty_dict_gives_defaults(self):
        config = config_from_dict({})
        assert config == PipelineConfig()
        assert config.refine.iterations == 1
        assert config.refine.hops == 1
        assert config.refine.proposals_per_cluster == 4
        assert config.refine.gate_threshold == 0.8
        assert config.rules.max_extent_m == 30.0
        assert config.rules.max_aspect == 50.0
        assert config.rules.max_speed_mps == 60.0
        assert config.association.distance_weight == 0.5
        assert config.association.shape_weight == 0.3
        assert config.association.appearance_weight == 0.2
        assert config.association.gate_threshold == 1.0
        assert config.association.max_gap_frames == 3
        assert config.graph.near_threshold_m == 3.0
        assert config.graph.relation_radius_m == 15.0
        assert config.window_frames == 10
        assert config.anchor == "first-frame"

    def test_partial_override_keeps_rest(self):
        config = config_from_dict({"rules": {"max_extent_m": 12.0}})
        assert config.rules.max_extent_m == 12.0
        assert config.rules.max_aspect == 50.0
        assert config.refine == PipelineConfig().refine


class TestStrictness:
    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError, match="unknown config key 'refinment'"):
            config_from_dict({"refinment": {}})

    def test_unknown_nested_key_has_dotted_path(self):
        with pytest.raises(ConfigError, match="unknown config key 'rules.max_size'"):
            config_from_dict({"rules": {"max_size": 3}})

    def test_unknown_deep_key(self):
        with pytest.raises(
            ConfigError, match="unknown config key 'refine.cluster.k'"
        ):
            config_from_dict({"refine": {"cluster": {"k": 5}}})

    def test_wrong_scalar_type(self):
        with pytest.raises(ConfigError, match="refine.iterations"):
            config_from_dict({"refine": {"iterations": "two"}})

    def test_bool_is_not_an_int(self):
        with pytest.raises(ConfigError, match="refine.iterations"):
            config_from_dict({"refine": {"iterations": True}})

    def test_bool_is_not_a_float(self):
        with pytest.raises(ConfigError, match="rules.max_extent_m"):
            config_from_dict({"rules": {"max_extent_m": True}})

    def test_int_accepted_where_float_expected(self):
        config = config_from_dict({"rules": {"max_extent_m": 25}})
        assert config.rules.max_extent_m == 25.0
        assert isinstance(config.rules.max_extent_m, float)

    def test_table_expected(self):
        with pytest.raises(ConfigError, match="expected a table"):
            config_from_dict({"rules": 5})

    def test_non_dict_root(self):
        with pytest.raises(ConfigError, match="root must be a table"):
            config_from_dict([1, 2])

    def test_validation_error_becomes_config_error(self):
        with pytest.raises(ConfigError, match="association"):
            config_from_dict({"association": {"gate_threshold": -1.0}})

    def test_anchor_validated(self):
        with pytest.raises(ConfigError, match="anchor"):
            config_from_dict({"anchor": "center"})
        assert config_from_dict({"anchor": "world"}).anchor == "world"


class TestOptionalWindow:
    def test_null_window_means_unbounded(self):
        config = config_from_dict({"window_frames": None})
        assert config.window_frames is None

    def test_window_must_be_positive(self):
        with pytest.raises(ConfigError):
            config_from_dict({"window_frames": 0})

    def test_window_rejects_float(self):
        with pytest.raises(ConfigError, match="window_frames"):
            config_from_dict({"window_frames": 2.5})

    def test_null_rejected_elsewhere(self):
        with pytest.raises(ConfigError, match="rules.max_extent_m"):
            config_from_dict({"rules": {"max_extent_m": None}})


class TestRoundTrip:
    def test_dict_round_trip(self):
        config = config_from_dict(
            {
                "refine": {"seed": 9, "cluster": {"min_cluster_size": 12}},
                "association": {"max_gap_frames": 5},
                "window_frames": None,
                "anchor": "world",
            }
        )
        doc = config_to_dict(config)
        assert config_from_dict(doc) == config

    def test_to_dict_is_json_safe(self):
        doc = config_to_dict(PipelineConfig())
        text = json.dumps(doc)
        assert config_from_dict(json.loads(text)) == PipelineConfig()

    def test_background_rgb_tuple_round_trip(self):
        config = config_from_dict({"refine": {"background_rgb": [10, 20, 30]}})
        assert config.refine.background_rgb == (10, 20, 30)
        doc = config_to_dict(config)
        assert doc["refine"]["background_rgb"] == [10, 20, 30]

    def test_tuple_length_enforced(self):
        with pytest.raises(ConfigError, match="background_rgb"):
            config_from_dict({"refine": {"background_rgb": [1, 2]}})


class TestFiles:
    def test_json_file(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"rules": {"max_extent_m": 8.0}}))
        assert load_config(path).rules.max_extent_m == 8.0

    def test_toml_file(self, tmp_path):
        path = tmp_path / "config.toml"
        path.write_text('anchor = "world"\n[rules]\nmax_extent_m = 8.0\n')
        config = load_config(path)
        assert config.anchor == "world"
        assert config.rules.max_extent_m == 8.0

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.json")

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_malformed_toml(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("= nonsense =")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_file_with_overrides(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"rules": {"max_extent_m": 8.0}}))
        config = load_config(path, ["rules.max_extent_m=9.5", "anchor=world"])
        assert config.rules.max_extent_m == 9.5
        assert config.anchor == "world"


class TestOverrides:
    def test_values_parse_as_json(self):
        doc = apply_overrides({}, ["a.b=3", "a.c=true", "a.d=1.5", "a.e=null"])
        assert doc == {"a": {"b": 3, "c": True, "d": 1.5, "e": None}}

    def test_non_json_value_stays_string(self):
        doc = apply_overrides({}, ["anchor=world"])
        assert doc == {"anchor": "world"}

    def test_original_untouched(self):
        base = {"rules": {"max_extent_m": 8.0}}
        apply_overrides(base, ["rules.max_extent_m=2"])
        assert base == {"rules": {"max_extent_m": 8.0}}

    def test_missing_equals_rejected(self):
        with pytest.raises(ConfigError, match="key=value"):
            apply_overrides({}, ["rules.max_extent_m"])

    def test_descending_into_scalar_rejected(self):
        with pytest.raises(ConfigError, match="descends into a scalar"):
            apply_overrides({"anchor": "world"}, ["anchor.x=1"])

    def test_override_feeds_strict_parse(self):
        doc = apply_overrides({}, ["refine.bogus=1"])
        with pytest.raises(ConfigError, match="refine.bogus"):
            config_from_dict(doc)
