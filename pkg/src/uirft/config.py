"""Run configuration: flat ``key = value`` files with environment overrides."""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace
from typing import Mapping

from .geometry import ResizePolicy
from .grpo import GrpoHyper
from .parsing import Mode
from .rewards import CoordinateVariant
from .toygym.train import SURROGATE_LR

ENV_PREFIX = "UIRFT_"
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass(frozen=True)
class RunConfig:
    # tuned for raw-logit tables; a transformer wants something near 1e-6
    learning_rate: float = SURROGATE_LR
    lr_schedule: str = "linear"
    max_pixels: int = 12845056
    num_generations: int = 8
    num_train_epochs: int = 8
    max_prompt_length: int = 1024
    per_device_train_batch_size: int = 1
    gradient_accumulation_steps: int = 2
    epsilon: float = 0.2
    beta: float = 0.04
    temperature: float = 1.0
    mode: str = "think"
    coordinate_variant: str = "point_in_box"
    iou_threshold: float = 0.5
    dast: bool = False
    seed: int = 0
    grid: int = 16

    def __post_init__(self):
        Mode(self.mode)
        CoordinateVariant(self.coordinate_variant)
        if self.per_device_train_batch_size != 1:
            raise ValueError("per_device_train_batch_size must be 1: each step trains on one task's group")
        for name in ("max_pixels", "num_generations", "max_prompt_length", "gradient_accumulation_steps", "grid"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.num_train_epochs < 0:
            raise ValueError("num_train_epochs must be >= 0")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if not 0 < self.iou_threshold <= 1:
            raise ValueError("iou_threshold must lie in (0, 1]")
        self.hyper()  # validates epsilon, beta, lr, schedule

    def hyper(self) -> GrpoHyper:
        return GrpoHyper(
            epsilon=self.epsilon,
            beta=self.beta,
            group_size=self.num_generations,
            learning_rate=self.learning_rate,
            lr_schedule=self.lr_schedule,
            grad_accumulation=self.gradient_accumulation_steps,
        )

    def resize(self) -> ResizePolicy:
        return ResizePolicy(max_pixels=self.max_pixels)

    def reward_overrides(self) -> dict:
        return {
            "coordinate_variant": CoordinateVariant(self.coordinate_variant),
            "iou_threshold": self.iou_threshold,
            "max_length": self.max_prompt_length,
            "resize": self.resize(),
        }

    def dumps(self) -> str:
        lines = [f"{f.name} = {_format(getattr(self, f.name))}" for f in fields(self)]
        return "\n".join(lines) + "\n"

    def with_overrides(self, values: Mapping[str, object]) -> "RunConfig":
        return replace(self, **coerce(values))


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(key: str, raw) -> object:
    kind = _TYPES[key]
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if kind == "bool":
            low = text.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
    except ValueError:
        raise ValueError(f"{key}: cannot read {text!r} as {kind}") from None
    return text


def coerce(values: Mapping[str, object]) -> dict:
    out = {}
    for k, v in values.items():
        if k not in _TYPES:
            raise ValueError(f"unknown config key {k!r}")
        out[k] = _convert(k, v)
    return out


def parse_config(text: str) -> dict:
    values = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"line {n}: expected 'key = value'")
        key = key.strip()
        if key in values:
            raise ValueError(f"line {n}: duplicate key {key!r}")
        values[key] = value.strip()
    return coerce(values)


def env_overrides(environ: Mapping[str, str] | None = None) -> dict:
    environ = os.environ if environ is None else environ
    values = {}
    for k, v in environ.items():
        if k.startswith(ENV_PREFIX):
            key = k[len(ENV_PREFIX):].lower()
            if key in _TYPES:
                values[key] = v
    return coerce(values)


def load_config(path=None, environ: Mapping[str, str] | None = None, **overrides) -> RunConfig:
    """Defaults, then the file, then ``UIRFT_*`` variables, then explicit overrides."""
    values: dict = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            values.update(parse_config(fh.read()))
    values.update(env_overrides(environ))
    values.update(coerce({k: v for k, v in overrides.items() if v is not None}))
    return RunConfig(**values)


__all__ = ["ENV_PREFIX", "RunConfig", "coerce", "env_overrides", "load_config", "parse_config"]
