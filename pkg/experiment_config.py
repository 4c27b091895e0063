#!/usr/bin/env python3
"""
Experiment Configuration for the Margin-Mixup Speaker Verification Toolkit

Desk-scale defaults for every experiment, a flat `key = value` config file
format and a short hash that identifies a configuration in result files.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Dict, Tuple, get_origin

from exceptions import ConfigError


@dataclass(frozen=True)
class ExperimentConfig:
    """All knobs of the experiment suites (desk-scale defaults)"""

    # Synthetic speakers
    n_speakers: int = 50
    n_eval_speakers: int = 30
    n_components: int = 6
    fundamental_jitter: float = 0.01
    noise_floor: float = 0.05
    sample_rate: int = 8000
    utterances_per_speaker: int = 6
    eval_utterances_per_speaker: int = 10
    utterance_s: float = 4.0
    eval_utterance_s: float = 3.0

    # Features and model
    n_bins: int = 24
    frame_ms: float = 25.0
    hop_ms: float = 10.0
    hidden_dim: int = 64
    embedding_dim: int = 32
    batch_size: int = 32
    margin: float = 0.2
    scale: float = 30.0

    # Initial training
    initial_steps: int = 2000
    initial_crop_s: float = 2.0
    initial_lr_max: float = 1e-3
    initial_cycle_len: int = 1000

    # Large-margin fine-tuning
    finetune_steps: int = 250
    finetune_margin: float = 0.5
    finetune_crop_s: float = 4.0
    finetune_lr_max: float = 1e-5
    finetune_cycle_len: int = 250

    # Optimizer and augmentation
    lr_min: float = 1e-8
    weight_decay: float = 2e-4
    max_freq_mask: int = 3
    max_time_mask: int = 5
    beta_alpha: float = 0.4
    beta_beta: float = 0.4

    # Evaluation
    n_target_trials: int = 1000
    n_nontarget_trials: int = 1000
    snr_low: float = 0.0
    snr_high: float = 5.0
    snr_grid: Tuple[float, ...] = (0.0, 2.0, 5.0, 10.0, 20.0)
    beta_grid: Tuple[float, ...] = (0.1, 0.2, 0.4, 0.8, 1.0)
    cohort_top_k: int = 50

    # Run control
    max_concurrent: int = 2
    log_interval: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.n_speakers < 2:
            raise ConfigError(f"n_speakers must be at least 2, got {self.n_speakers}")
        if self.n_eval_speakers < 3:
            raise ConfigError(
                f"n_eval_speakers must be at least 3 for overlapped trials, "
                f"got {self.n_eval_speakers}"
            )
        if self.utterances_per_speaker < 2:
            raise ConfigError("utterances_per_speaker must be at least 2")
        if self.eval_utterances_per_speaker < 2:
            raise ConfigError("eval_utterances_per_speaker must be at least 2")
        if self.snr_low > self.snr_high:
            raise ConfigError(f"snr_low {self.snr_low} exceeds snr_high {self.snr_high}")
        if self.max_concurrent < 1:
            raise ConfigError("max_concurrent must be at least 1")

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        unknown = set(overrides) - {f.name for f in fields(self)}
        if unknown:
            raise ConfigError(f"Unknown config keys: {sorted(unknown)}")
        return replace(self, **overrides)

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _parse_value(name: str, field_type, text: str):
    text = text.strip()
    try:
        if field_type is bool:
            lowered = text.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if field_type is int:
            return int(text)
        if field_type is float:
            return float(text)
        if get_origin(field_type) is tuple:
            return tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"Cannot parse {name} = {text!r} as {field_type}")
    raise ConfigError(f"Unsupported config field type for {name}: {field_type}")


def _format_value(value) -> str:
    if isinstance(value, tuple):
        return ",".join(repr(float(v)) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


def parse_config(text: str, base: ExperimentConfig = None) -> ExperimentConfig:
    """Parse `key = value` lines (blank lines and # comments ignored)"""
    base = base or ExperimentConfig()
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    overrides = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"Line {line_no}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in types:
            raise ConfigError(f"Line {line_no}: unknown config key {key!r}")
        overrides[key] = _parse_value(key, types[key], value)
    return base.with_overrides(**overrides)


def load_config(path: str) -> ExperimentConfig:
    """Read a config file; missing keys keep their defaults"""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return parse_config(handle.read())
    except FileNotFoundError:
        raise FileNotFoundError(f"Config file not found: {path}")


def save_config(config: ExperimentConfig, path: str):
    """Write every field as `key = value`"""
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(f"# config_hash={config_hash(config)}\n")
        for key, value in config.as_dict().items():
            handle.write(f"{key} = {_format_value(value)}\n")


def config_hash(config: ExperimentConfig) -> str:
    """First 12 hex digits of SHA-256 over the canonical JSON of the config"""
    canonical = json.dumps(config.as_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]
