"""Flat ``key = value`` run configuration.

Blank lines and lines starting with ``#`` or ``;`` are ignored. Relative
paths are resolved against the config file's directory; bare map names
(``two_room``) refer to the bundled maps.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from importlib.resources import files
from pathlib import Path

from ..ppo import PPOConfig
from ..sim.env import NoiseModel, PropagationConfig
from ..sim.propagation import PathLossModel


class ConfigError(ValueError):
    pass


def bundled_map(name: str) -> Path:
    return Path(str(files("piprl") / "data" / "maps" / f"{name}.map"))


def bundled_program(name: str = "meta") -> Path:
    return Path(str(files("piprl") / "data" / "programs" / f"{name}.pirl"))


def bundled_config(name: str) -> Path:
    return Path(str(files("piprl") / "data" / "configs" / f"{name}.cfg"))


@dataclass
class RunConfig:
    maps: tuple = ("two_room",)
    tasks: str = "header"  # header | generated
    categories: tuple = ()  # keep only these task categories (empty: all)
    program: str = "builtin"
    seed: int = 0
    output_dir: str = "runs/out"
    checkpoint: str = ""

    episodes_per_task: int = 1000
    early_stop_window: int = 10
    early_stop_successes: int = 7  # "more than 6 of the last 10"
    horizon: int = 500  # meta-steps per episode
    action_cap: int = 3000  # primitive actions per episode
    option_budget: int = 100
    rotation_tasks: int = 2
    rotation_episodes: int = 100
    eval_repeats: int = 20
    eval_reset: str = "continue"  # continue | backtrack

    # ppo
    gamma: float = 0.99
    clip: float = 0.2
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    lr: float = 3e-4
    batch_size: int = 64
    epsilon: float = 0.1
    gae_lambda: float = 0.95
    epochs: int = 4
    rollout: int = 128
    hidden: int = 64
    cost_scale: float = 0.05

    # propagation and sensing
    g0: float = 40.0
    ref_distance: float = 1.0
    reflection_loss: float = 6.0
    snr_floor: float = -10.0
    max_reflections: int = 3
    max_paths: int = 5
    sigma_xy: float = 0.05
    sigma_phi: float = 1.0
    sigma_angle: float = 2.0
    link_error: float = 0.05
    snr_source: str = "overall"  # overall | strongest

    base_dir: str = field(default=".", repr=False)

    def __post_init__(self):
        if self.tasks not in ("header", "generated"):
            raise ConfigError(f"tasks must be 'header' or 'generated', got {self.tasks!r}")
        if self.snr_source not in ("overall", "strongest"):
            raise ConfigError(f"snr_source must be 'overall' or 'strongest', got {self.snr_source!r}")
        if self.eval_reset not in ("backtrack", "continue"):
            raise ConfigError(f"eval_reset must be 'backtrack' or 'continue', got {self.eval_reset!r}")
        if self.episodes_per_task <= 0 or self.horizon <= 0 or self.option_budget <= 0:
            raise ConfigError("episode counts, horizon and option budget must be positive")

    # -- derived -------------------------------------------------------------

    def ppo(self) -> PPOConfig:
        names = {f.name for f in fields(PPOConfig)}
        kw = {k: getattr(self, k) for k in names if hasattr(self, k)}
        return PPOConfig(**kw)

    def model(self) -> PathLossModel:
        return PathLossModel(self.g0, self.ref_distance, self.reflection_loss, self.snr_floor)

    def propagation(self) -> PropagationConfig:
        return PropagationConfig(self.max_reflections, self.max_paths, self.model())

    def noise(self) -> NoiseModel:
        return NoiseModel(self.sigma_xy, self.sigma_phi, self.sigma_angle)

    def resolve(self, value: str) -> Path:
        p = Path(value)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def map_paths(self) -> list[Path]:
        out = []
        for m in self.maps:
            p = self.resolve(m)
            if not p.exists() and "/" not in m and not m.endswith(".map"):
                p = bundled_map(m)
            if not p.exists():
                raise ConfigError(f"map not found: {m}")
            out.append(p)
        return out

    def program_path(self) -> Path:
        if self.program == "builtin":
            return bundled_program("meta")
        p = self.resolve(self.program)
        if not p.exists():
            raise ConfigError(f"program not found: {self.program}")
        return p

    def with_overrides(self, **kw) -> "RunConfig":
        return replace(self, **kw)


def _convert(name: str, typ, raw: str):
    raw = raw.strip()
    try:
        if typ in ("int", int):
            return int(raw)
        if typ in ("float", float):
            return float(raw)
        if typ in ("tuple", tuple):
            return tuple(s.strip() for s in raw.split(",") if s.strip())
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None
    return raw


def parse_config(text: str, base_dir=".") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    known = {f.name: f.type for f in fields(RunConfig) if f.name != "base_dir"}
    kw = {}
    for key, raw in parser["run"].items():
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        kw[key] = _convert(key, known[key], raw)
    return RunConfig(base_dir=str(base_dir), **kw)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, path.parent)


def dump_config(cfg: RunConfig) -> str:
    lines = []
    for f in fields(RunConfig):
        if f.name == "base_dir":
            continue
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ", ".join(v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
