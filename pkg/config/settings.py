"""
Configuration management for TreeReply
"""

import json
import logging
import os
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, Optional

from core.errors import ConfigError

log = logging.getLogger(__name__)

PATH_KEYS = ("pairs_path", "conllu_path", "validation_pairs_path", "validation_conllu_path", "output_dir")
OPTIMIZERS = ("adadelta", "sgd")


class SettingsManager:
    """Manages training and generation settings"""

    def __init__(self, config_file: str = None):
        self.config_file = config_file
        self.config = {}
        self._load_defaults()
        self.known_keys = frozenset(self.config)

    def _load_defaults(self):
        """Load default configuration"""
        self.config = asdict(TrainConfig())

    def load_config(self):
        """Merge the JSON config file over the defaults"""
        if not self.config_file:
            return
        try:
            with open(self.config_file, "r", encoding="utf-8") as f:
                saved_config = json.load(f)
        except OSError as e:
            raise ConfigError(f"cannot read config {self.config_file}: {e}")
        except ValueError as e:
            raise ConfigError(f"config {self.config_file} is not valid JSON: {e}")
        if not isinstance(saved_config, dict):
            raise ConfigError(f"config {self.config_file} must hold a JSON object")

        base = os.path.dirname(os.path.abspath(self.config_file))
        for key in PATH_KEYS:
            value = saved_config.get(key)
            if isinstance(value, str) and not os.path.isabs(value):
                saved_config[key] = os.path.join(base, value)
        self.update(saved_config)
        log.debug("Loaded config %s", self.config_file)

    def save_config(self):
        """Save configuration to file"""
        if not self.config_file:
            return
        directory = os.path.dirname(self.config_file)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(self.config_file, "w", encoding="utf-8") as f:
            json.dump(self.config, f, indent=2)

    def get(self, key: str, default=None):
        """Get configuration value"""
        return self.config.get(key, default)

    def set(self, key: str, value: Any):
        """Set configuration value"""
        self._check_key(key)
        self.config[key] = value

    def update(self, updates: Dict[str, Any]):
        """Update multiple configuration values"""
        for key in updates:
            self._check_key(key)
        for key, value in updates.items():
            self.set(key, value)

    def _check_key(self, key: str):
        if key not in self.known_keys:
            raise ConfigError(f"unknown config key {key!r}")

    def validate_config(self):
        """Raise ConfigError on any out-of-range value"""
        c = self.config
        for key in ("vocab_size", "embed_dim", "hidden_dim", "arity", "batch_size", "patience",
                    "workers", "global_beam", "local_beam", "node_cap", "max_post_length"):
            value = c.get(key)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"{key} must be an integer of at least 1, got {value!r}")
        if not isinstance(c["max_epochs"], int) or c["max_epochs"] < 0:
            raise ConfigError(f"max_epochs must be a non-negative integer, got {c['max_epochs']!r}")
        if not isinstance(c["seed"], int):
            raise ConfigError(f"seed must be an integer, got {c['seed']!r}")
        if c["optimizer"] not in OPTIMIZERS:
            raise ConfigError(f"optimizer must be one of {', '.join(OPTIMIZERS)}, got {c['optimizer']!r}")
        if not isinstance(c["learning_rate"], (int, float)) or c["learning_rate"] < 0:
            raise ConfigError(f"learning_rate must be non-negative, got {c['learning_rate']!r}")
        if not 0.0 < c["adadelta_rho"] < 1.0:
            raise ConfigError(f"adadelta_rho must lie in (0, 1), got {c['adadelta_rho']!r}")
        if c["adadelta_epsilon"] <= 0:
            raise ConfigError("adadelta_epsilon must be positive")
        if c["init_scale"] < 0:
            raise ConfigError("init_scale must be non-negative")
        if not isinstance(c["length_normalize"], bool):
            raise ConfigError("length_normalize must be true or false")


@dataclass
class TrainConfig:
    """Every config key with its default; SettingsManager starts from these"""

    pairs_path: Optional[str] = None
    conllu_path: Optional[str] = None
    validation_pairs_path: Optional[str] = None
    validation_conllu_path: Optional[str] = None
    output_dir: str = "run"
    vocab_size: int = 10000
    max_post_length: int = 50
    embed_dim: int = 32
    hidden_dim: int = 64
    arity: int = 3
    batch_size: int = 128
    max_epochs: int = 50
    patience: int = 4
    optimizer: str = "adadelta"
    learning_rate: float = 1.0
    # ADADELTA decay and conditioning constant
    adadelta_rho: float = 0.95
    adadelta_epsilon: float = 1e-6
    init_scale: float = 0.01
    seed: int = 1234
    workers: int = 1
    global_beam: int = 6
    local_beam: int = 6
    node_cap: int = 64
    length_normalize: bool = False

    @classmethod
    def from_settings(cls, settings: SettingsManager) -> "TrainConfig":
        settings.validate_config()
        return cls(**{f.name: settings.get(f.name) for f in fields(cls)})
