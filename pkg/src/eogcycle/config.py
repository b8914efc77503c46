"""
Flat key=value run configuration with dotted keys.

Unspecified keys take the published pipeline defaults (30-sample smoothing
window, 5th-order 0.2 Hz high-pass, 0.10 V / 0.13 V / 140-sample peak
rules, 280-sample cycles, SMOTE to 200/class, 80/20 stratified split,
5-fold CV). Unknown keys are rejected. Environment variables override
file values using the prefix ``EOGCYCLE_`` with ``__`` standing in for
the dot, e.g. ``EOGCYCLE_PEAKS__PROMINENCE_V=0.2``.
"""

from __future__ import annotations

import os
from typing import Any, Mapping

ENV_PREFIX = "EOGCYCLE_"

DEFAULTS: dict[str, Any] = {
    "gen.sampling_rate_hz": 125.0,
    "gen.trial_length_s": 20.0,
    "gen.trials_per_class": 15,
    "gen.pulse_amplitude_min_v": 0.3,
    "gen.pulse_amplitude_max_v": 0.8,
    "gen.pulse_width_min": 60,
    "gen.pulse_width_max": 120,
    "gen.noise_std_v": 0.02,
    "gen.drift_amplitude_v": 0.1,
    "gen.drift_freq_hz": 0.05,
    "gen.seed": 2026,
    "peaks.height_v": 0.10,
    "peaks.prominence_v": 0.13,
    "peaks.min_distance_samples": 140,
    "peaks.half_window_samples": 140,
    "filter.order": 5,
    "filter.cutoff_hz": 0.2,
    "smooth.window": 30,
    "wavelet.basis": "db4",
    "wavelet.levels": 4,
    "wavelet.threshold_rule": "universal",
    "wavelet.threshold_value": 0.0,
    "wavelet.mode": "soft",
    "smote.target_per_class": 200,
    "smote.k_neighbors": 5,
    "smote.seed": 7,
    "split.train_fraction": 0.8,
    "split.seed": 11,
    "train.epochs": 200,
    "train.batch_size": 32,
    "train.learning_rate": 1e-3,
    "train.optimizer": "adam",
    "train.early_stop_patience": 20,
    "train.val_fraction": 0.1,
    "train.seed": 5,
    "cv.folds": 5,
    "cv.seed": 13,
    "bench.repetitions": 50,
    "bench.warmup": 10,
}


class ConfigError(ValueError):
    pass


def _coerce(key: str, raw: str) -> Any:
    default = DEFAULTS[key]
    try:
        if isinstance(default, bool):
            if raw.lower() in ("1", "true", "yes"):
                return True
            if raw.lower() in ("0", "false", "no"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r} as "
                          f"{type(default).__name__}") from exc


def parse_config_text(text: str) -> dict[str, Any]:
    values: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        if key not in DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        values[key] = _coerce(key, raw.strip())
    return values


def _env_overrides() -> dict[str, Any]:
    values: dict[str, Any] = {}
    for name, raw in os.environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        key = name[len(ENV_PREFIX):].lower().replace("__", ".")
        if key not in DEFAULTS:
            raise ConfigError(f"environment variable {name}: unknown key {key!r}")
        values[key] = _coerce(key, raw)
    return values


def load_config(path: str | None = None,
                overrides: Mapping[str, Any] | None = None) -> dict[str, Any]:
    """Defaults <- config file <- environment <- explicit overrides."""
    resolved = dict(DEFAULTS)
    if path is not None:
        try:
            with open(path) as f:
                text = f.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        resolved.update(parse_config_text(text))
    resolved.update(_env_overrides())
    for key, value in (overrides or {}).items():
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        resolved[key] = value
    return resolved


def dump_config(cfg: Mapping[str, Any], path: str) -> None:
    """Write the fully resolved configuration, sorted, as key=value lines."""
    with open(path, "w") as f:
        for key in sorted(cfg):
            f.write(f"{key}={cfg[key]}\n")
