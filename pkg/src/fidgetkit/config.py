"""Run configuration: JSON file merged with CLI overrides, strictly validated."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields

from fidgetkit.errors import ConfigError
from fidgetkit.fusion import FusionConfig

VALID_GROUPS = ("fidget", "fidget_pure", "gaze", "aus", "mfccs")
VALID_CLASSIFIERS = ("lr", "mlp")
VALID_LABELS = ("depression", "anxiety")


@dataclass
class RunConfig:
    """Knobs for the training/evaluation commands.

    Ranges follow the documented defaults: window length l, quiet-run n, the
    gesture threshold mode, box widths, event min duration, GMM kernels K,
    RF-selected feature count, label smoothing, CV folds, and the RNG seed
    (mandatory for training commands).
    """

    groups: list[str] = None
    n_kernels: int = 32
    rf_num: int = 200
    smoothing: float = 0.4
    folds: int = 3
    seed: int = 0
    classifier: str = "lr"
    label: str = "depression"
    window_length: int = 10
    quiet_run: int = 3
    gesture_threshold: float | None = None
    arm_width_scale: float = 0.5
    leg_width_scale: float = 1.0
    min_duration: int | None = None
    ddae_sigma: float = 0.1
    ddae_max_epochs: int = 60
    max_gmm_frames: int = 50_000

    def __post_init__(self):
        if self.groups is None:
            self.groups = ["fidget", "gaze", "aus", "mfccs"]
        for g in self.groups:
            if g not in VALID_GROUPS:
                raise ConfigError(f"groups: unknown feature group {g!r} (valid: {VALID_GROUPS})")
        if self.classifier not in VALID_CLASSIFIERS:
            raise ConfigError(f"classifier: {self.classifier!r} not in {VALID_CLASSIFIERS}")
        if self.label not in VALID_LABELS:
            raise ConfigError(f"label: {self.label!r} not in {VALID_LABELS}")
        if self.n_kernels < 1:
            raise ConfigError(f"n_kernels: must be >= 1, got {self.n_kernels}")
        if self.rf_num < 1:
            raise ConfigError(f"rf_num: must be >= 1, got {self.rf_num}")
        if not 0 <= self.smoothing < 1:
            raise ConfigError(f"smoothing: must be in [0, 1), got {self.smoothing}")
        if self.folds < 2:
            raise ConfigError(f"folds: must be >= 2, got {self.folds}")
        if not isinstance(self.seed, int):
            raise ConfigError(f"seed: must be an integer, got {self.seed!r}")
        if self.window_length < 1:
            raise ConfigError(f"window_length: must be >= 1, got {self.window_length}")
        if self.quiet_run < 1:
            raise ConfigError(f"quiet_run: must be >= 1, got {self.quiet_run}")
        if self.gesture_threshold is not None and self.gesture_threshold <= 0:
            raise ConfigError("gesture_threshold: must be positive when given")
        if self.arm_width_scale <= 0 or self.leg_width_scale <= 0:
            raise ConfigError("box width scales must be positive")
        if self.min_duration is not None and self.min_duration < 1:
            raise ConfigError("min_duration: must be >= 1 when given")
        if self.ddae_sigma < 0:
            raise ConfigError("ddae_sigma: must be >= 0")
        if self.ddae_max_epochs < 1:
            raise ConfigError("ddae_max_epochs: must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    def fusion(self) -> FusionConfig:
        return FusionConfig(
            n_kernels=self.n_kernels,
            rf_num=self.rf_num,
            smoothing=self.smoothing,
            classifier=self.classifier,
            folds=self.folds,
            seed=self.seed,
            ddae_sigma=self.ddae_sigma,
            ddae_max_epochs=self.ddae_max_epochs,
            max_gmm_frames=self.max_gmm_frames,
        )


def load_run_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Build a RunConfig from an optional JSON file plus CLI overrides (flags win).

    A manifest file (from a previous run) is also accepted: its embedded
    config is used, which makes runs reproducible from their manifests.
    """
    raw: dict = {}
    if path is not None:
        try:
            with open(path) as f:
                raw = json.load(f)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {path}: invalid JSON at line {e.lineno}: {e.msg}") from e
        if not isinstance(raw, dict):
            raise ConfigError(f"config file {path}: expected a JSON object")
        if "config" in raw and "config_hash" in raw:
            raw = raw["config"]  # a manifest was passed
    if "K" in raw:  # documented short name for the GMM kernel count
        if "n_kernels" in raw and raw["n_kernels"] != raw["K"]:
            raise ConfigError("config sets both K and n_kernels with different values")
        raw = dict(raw)
        raw["n_kernels"] = raw.pop("K")
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    merged = dict(raw)
    for key, value in (overrides or {}).items():
        if value is not None:
            if key not in known:
                raise ConfigError(f"unknown config key: {key}")
            merged[key] = value
    try:
        return RunConfig(**merged)
    except TypeError as e:
        raise ConfigError(str(e)) from e
