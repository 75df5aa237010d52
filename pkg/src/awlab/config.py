"""Experiment configuration: flat key=value files with flag overrides.

Precedence is flag > file > default. Every value has a canonical string
form; the resolved config is serialized verbatim into every output
artifact so results can be traced to the exact run settings.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

from .model.streams import MODES
from .model.training import OBJECTIVES, VARIANTS, TrainConfig
from .textproc import SETTINGS

__all__ = [
    "ExperimentConfig",
    "load_config_file",
    "resolve_config",
    "config_to_flat",
    "config_json",
]


@dataclass(frozen=True)
class ExperimentConfig:
    corpus: str = "corpus.jsonl"
    out_dir: str = "out"
    split_seed: int = 0
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    setting: str = "top40"
    condition: str = "standard"
    classes: int = 40  # size of the base class map before setting views
    top_m: int = 40  # how many stems the stats report ranks
    variant: str = "attendgru"
    objective: str = "summary"
    epochs_max: int = 10
    wallclock_max: float | None = None
    batch_size: int = 16
    learning_rate: float = 1.0
    hidden: int = 64
    emb: int = 32
    max_code_len: int = 100
    max_ast_len: int = 150
    max_summary_len: int = 13
    seed: int = 0
    grad_clip: float | None = 5.0
    vocab_max_size: int = 10000

    def __post_init__(self):
        if self.setting not in SETTINGS:
            raise ValueError(f"unknown setting {self.setting!r}, expected one of {SETTINGS}")
        if self.condition not in MODES:
            raise ValueError(f"unknown condition {self.condition!r}, expected one of {MODES}")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}, expected one of {VARIANTS}")
        if self.objective not in OBJECTIVES:
            raise ValueError(f"unknown objective {self.objective!r}, expected one of {OBJECTIVES}")
        if len(self.ratios) != 3 or abs(sum(self.ratios) - 1.0) > 1e-9:
            raise ValueError("ratios must be three fractions summing to 1")
        if self.classes < 2:
            raise ValueError("classes must be >= 2")
        if self.top_m < 1:
            raise ValueError("top_m must be >= 1")
        # the remaining numeric fields are validated by TrainConfig
        self.train_config()

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs_max=self.epochs_max,
            wallclock_max=self.wallclock_max,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            hidden=self.hidden,
            emb=self.emb,
            max_code_len=self.max_code_len,
            max_ast_len=self.max_ast_len,
            max_summary_len=self.max_summary_len,
            seed=self.seed,
            mode=self.condition,
            variant=self.variant,
            objective=self.objective,
            grad_clip=self.grad_clip,
            vocab_max_size=self.vocab_max_size,
        )


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _parse_value(key: str, raw: str):
    """Coerce one canonical string to the field's Python value."""
    raw = raw.strip()
    if key in ("corpus", "out_dir", "setting", "condition", "variant", "objective"):
        return raw
    if key == "ratios":
        parts = raw.split(",")
        if len(parts) != 3:
            raise ValueError(f"ratios needs three comma-separated fractions, got {raw!r}")
        return tuple(float(p) for p in parts)
    if key in ("wallclock_max", "grad_clip"):
        if raw.lower() in ("none", ""):
            return None
        return float(raw)
    if key == "learning_rate":
        return float(raw)
    if key in _FIELDS:
        return int(raw)
    raise ValueError(f"unknown config key {key!r}")


def _canonical(key: str, value) -> str:
    if value is None:
        return "none"
    if key == "ratios":
        return ",".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def load_config_file(path) -> dict:
    """Flat key=value lines; '#' comments and blank lines are skipped."""
    out: dict = {}
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"config line {line_no}: expected key=value, got {line!r}")
            key, raw = line.split("=", 1)
            key = key.strip()
            if key not in _FIELDS:
                raise ValueError(f"config line {line_no}: unknown config key {key!r}")
            if key in out:
                raise ValueError(f"config line {line_no}: duplicate config key {key!r}")
            out[key] = _parse_value(key, raw)
    return out


def resolve_config(file_path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Merge defaults, an optional config file, and flag overrides.

    Override values may be canonical strings (from the command line) or
    already-typed Python values; None entries mean "not given".
    """
    merged: dict = {}
    if file_path is not None:
        merged.update(load_config_file(file_path))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _FIELDS:
            raise ValueError(f"unknown config key {key!r}")
        merged[key] = _parse_value(key, value) if isinstance(value, str) else value
    return ExperimentConfig(**merged)


def config_to_flat(config: ExperimentConfig) -> dict:
    """Canonical string form of every field, in declaration order."""
    return {
        f.name: _canonical(f.name, getattr(config, f.name))
        for f in dataclasses.fields(ExperimentConfig)
    }


def config_json(config: ExperimentConfig) -> str:
    return json.dumps(config_to_flat(config), separators=(",", ":"))
