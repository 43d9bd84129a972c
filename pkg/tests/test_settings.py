import json
import os

import pytest

from config.settings import SettingsManager, TrainConfig
from core.errors import ConfigError


def write_config(tmp_path, values, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(values), encoding="utf-8")
    return str(path)


class TestSettingsManager:
    def test_defaults(self):
        settings = SettingsManager()
        assert settings.get("optimizer") == "adadelta"
        assert settings.get("global_beam") == 6
        assert settings.get("local_beam") == 6
        assert settings.get("adadelta_rho") == 0.95
        settings.validate_config()

    def test_file_overrides_defaults(self, tmp_path):
        settings = SettingsManager(write_config(tmp_path, {"hidden_dim": 16, "patience": 2}))
        settings.load_config()
        assert settings.get("hidden_dim") == 16
        assert settings.get("patience") == 2
        assert settings.get("embed_dim") == 32

    def test_relative_paths_follow_the_config_file(self, tmp_path):
        path = write_config(tmp_path, {"pairs_path": "data/pairs.tsv", "output_dir": "/abs/run"})
        settings = SettingsManager(path)
        settings.load_config()
        assert settings.get("pairs_path") == os.path.join(str(tmp_path), "data/pairs.tsv")
        assert settings.get("output_dir") == "/abs/run"

    def test_unknown_key_in_file(self, tmp_path):
        settings = SettingsManager(write_config(tmp_path, {"hiden_dim": 16}))
        with pytest.raises(ConfigError, match="hiden_dim"):
            settings.load_config()

    def test_unknown_key_on_set(self):
        with pytest.raises(ConfigError):
            SettingsManager().set("beam", 3)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            SettingsManager(str(tmp_path / "absent.json")).load_config()

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigError):
            SettingsManager(str(path)).load_config()

    def test_not_an_object(self, tmp_path):
        with pytest.raises(ConfigError):
            SettingsManager(write_config(tmp_path, [1, 2])).load_config()

    @pytest.mark.parametrize("key, value", [
        ("hidden_dim", 0),
        ("global_beam", -1),
        ("batch_size", True),
        ("optimizer", "adam"),
        ("adadelta_rho", 1.0),
        ("learning_rate", -0.1),
        ("length_normalize", "yes"),
        ("max_epochs", -1),
    ])
    def test_out_of_range_values(self, key, value):
        settings = SettingsManager()
        settings.set(key, value)
        with pytest.raises(ConfigError, match=key):
            settings.validate_config()

    def test_save_and_reload(self, tmp_path):
        path = str(tmp_path / "sub" / "saved.json")
        settings = SettingsManager(path)
        settings.set("seed", 7)
        settings.save_config()
        reloaded = SettingsManager(path)
        reloaded.load_config()
        assert reloaded.get("seed") == 7

    def test_failed_update_changes_nothing(self):
        settings = SettingsManager()
        with pytest.raises(ConfigError):
            settings.update({"hidden_dim": 8, "beam": 3})
        assert settings.get("hidden_dim") == 64


class TestTrainConfig:
    def test_defaults_match_settings_defaults(self):
        assert TrainConfig.from_settings(SettingsManager()) == TrainConfig()

    def test_from_settings(self, tmp_path):
        settings = SettingsManager(write_config(tmp_path, {"embed_dim": 8, "optimizer": "sgd"}))
        settings.load_config()
        config = TrainConfig.from_settings(settings)
        assert config.embed_dim == 8
        assert config.optimizer == "sgd"
        assert config.node_cap == 64

    def test_from_invalid_settings(self):
        settings = SettingsManager()
        settings.set("arity", 0)
        with pytest.raises(ConfigError):
            TrainConfig.from_settings(settings)
