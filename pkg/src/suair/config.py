"""Experiment configuration: flat ``key = value`` files, namespaced keys.

Whole-line comments start with '#'. Unknown or duplicate keys are hard
errors so typos cannot silently fall back to defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .gridworld import PRESETS
from .strategies import STRATEGIES, AdvisingConfig


class ConfigError(ValueError):
    """Unparseable, unknown, or inconsistent configuration input."""


def _parse_bool(raw: str) -> bool:
    lowered = raw.lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise ConfigError(f"expected a boolean, got {raw!r}")


def _parse_int(raw: str) -> int:
    try:
        return int(raw.replace("_", ""))
    except ValueError:
        raise ConfigError(f"expected an integer, got {raw!r}") from None


def _parse_float(raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"expected a number, got {raw!r}") from None


def _parse_int_list(raw: str) -> tuple[int, ...]:
    parts = [p.strip() for p in raw.split(",") if p.strip()]
    if not parts:
        raise ConfigError(f"expected a comma-separated integer list, got {raw!r}")
    return tuple(_parse_int(p) for p in parts)


def _parse_strategy(raw: str) -> str:
    name = raw.strip().upper().replace("-", "_")
    if name not in STRATEGIES:
        raise ConfigError(f"unknown strategy {raw!r}; have {STRATEGIES}")
    return name


def _parse_str(raw: str) -> str:
    return raw


# key -> (parser, default); None default means "not set"
SCHEMA = {
    "run.name": (_parse_str, None),
    "run.total_steps": (_parse_int, 20_000),
    "run.eval_interval": (_parse_int, 1_000),
    "run.eval_trials": (_parse_int, 10),
    "run.seeds": (_parse_int_list, (1, 2, 3, 4, 5)),
    "run.out_dir": (_parse_str, "runs"),
    "run.workers": (_parse_int, 1),
    "env.preset": (_parse_str, "open5"),
    "env.map_file": (_parse_str, None),
    "env.max_steps": (_parse_int, None),
    "env.slip_prob": (_parse_float, None),
    "env.step_reward": (_parse_float, None),
    "env.goal_reward": (_parse_float, None),
    "env.xy_features": (_parse_bool, None),
    "teacher.mode": (_parse_str, "oracle"),
    "teacher.checkpoint": (_parse_str, None),
    "rl.gamma": (_parse_float, 0.99),
    "rl.learning_rate": (_parse_float, 1e-3),
    "rl.batch_size": (_parse_int, 32),
    "rl.replay_capacity": (_parse_int, 50_000),
    "rl.replay_min": (_parse_int, 1_000),
    "rl.target_sync": (_parse_int, 500),
    "rl.eps_init": (_parse_float, 1.0),
    "rl.eps_final": (_parse_float, 0.01),
    "rl.eps_decay_steps": (_parse_int, 20_000),
    "rl.hidden": (_parse_int_list, (64, 64)),
    "advising.strategy": (_parse_strategy, "NA"),
    "advising.budget": (_parse_int, 500),
    "advising.p1": (_parse_float, 70.0),
    "advising.p2": (_parse_float, 90.0),
    "advising.rho_init": (_parse_float, 0.5),
    "advising.rho_final": (_parse_float, 0.1),
    "advising.rho_decay_steps": (_parse_int, 30_000),
    "advising.rho_decay_start": (_parse_int, 5_000),
    "advising.n_min": (_parse_int, 50),
    "advising.t_min": (_parse_int, 1_000),
    "advising.k_init": (_parse_int, 2_000),
    "advising.k_periodic": (_parse_int, 1_000),
    "advising.n_passes": (_parse_int, 100),
    "advising.ra_probability": (_parse_float, 0.5),
    "advising.min_window": (_parse_int, 200),
    "advising.max_window": (_parse_int, 10_000),
    "advising.secondary_dropout": (_parse_float, 0.2),
    "advising.model_dropout": (_parse_float, 0.35),
    "advising.imitation_lr": (_parse_float, 1e-4),
    "advising.imitation_batch": (_parse_int, 32),
    "advising.lazy_um": (_parse_bool, False),
}

_ENV_OVERRIDE_KEYS = {
    "env.max_steps": "max_steps",
    "env.slip_prob": "slip_prob",
    "env.step_reward": "step_reward",
    "env.goal_reward": "goal_reward",
    "env.xy_features": "xy_features",
}


@dataclass
class ExperimentConfig:
    env_preset: str = "open5"
    map_file: str | None = None
    env_overrides: dict = field(default_factory=dict)
    teacher_mode: str = "oracle"
    teacher_checkpoint: str | None = None
    advising: AdvisingConfig = field(default_factory=AdvisingConfig)
    gamma: float = 0.99
    learning_rate: float = 1e-3
    batch_size: int = 32
    replay_capacity: int = 50_000
    replay_min: int = 1_000
    target_sync: int = 500
    eps_init: float = 1.0
    eps_final: float = 0.01
    eps_decay_steps: int = 20_000
    hidden: tuple[int, ...] = (64, 64)
    total_steps: int = 20_000
    eval_interval: int = 1_000
    eval_trials: int = 10
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    out_dir: str = "runs"
    workers: int = 1
    name: str | None = None

    def __post_init__(self):
        if self.map_file is None and self.env_preset not in PRESETS:
            raise ConfigError(
                f"unknown env preset {self.env_preset!r}; have {sorted(PRESETS)}")
        if self.teacher_mode not in ("oracle", "checkpoint"):
            raise ConfigError("teacher.mode must be oracle or checkpoint")
        if self.teacher_mode == "checkpoint" and not self.teacher_checkpoint:
            raise ConfigError("teacher.mode=checkpoint needs teacher.checkpoint")
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError("rl.gamma must be in [0, 1)")
        if self.total_steps < 1:
            raise ConfigError("run.total_steps must be positive")
        if not 1 <= self.eval_interval <= self.total_steps:
            raise ConfigError("run.eval_interval must be in [1, total_steps]")
        if self.eval_trials < 1:
            raise ConfigError("run.eval_trials must be positive")
        if not self.seeds:
            raise ConfigError("run.seeds must not be empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("run.seeds must be distinct")
        if self.workers < 1:
            raise ConfigError("run.workers must be positive")

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        base = self.env_preset if self.map_file is None else "custom"
        return f"{self.advising.strategy.lower()}_{base}"

    def grid_spec(self):
        from .gridworld import GridSpec, make_spec, parse_map

        if self.map_file is not None:
            with open(self.map_file) as fh:
                geometry = parse_map(fh.read())
            geometry.update(self.env_overrides)
            return GridSpec(**geometry)
        return make_spec(self.env_preset, **self.env_overrides)


def parse_config_text(text: str) -> dict:
    """Raw key -> value strings; rejects unknown and duplicate keys."""
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, raw = stripped.partition("=")
        key, raw = key.strip(), raw.strip()
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = raw
    return values


def config_from_values(values: dict) -> ExperimentConfig:
    parsed = {}
    for key, (parser, default) in SCHEMA.items():
        if key in values:
            try:
                parsed[key] = parser(values[key])
            except ConfigError as err:
                raise ConfigError(f"{key}: {err}") from None
        else:
            parsed[key] = default

    overrides = {name: parsed[key] for key, name in _ENV_OVERRIDE_KEYS.items()
                 if parsed[key] is not None}
    try:
        advising = AdvisingConfig(
            strategy=parsed["advising.strategy"],
            budget=parsed["advising.budget"],
            p1=parsed["advising.p1"],
            p2=parsed["advising.p2"],
            rho_init=parsed["advising.rho_init"],
            rho_final=parsed["advising.rho_final"],
            rho_decay_steps=parsed["advising.rho_decay_steps"],
            rho_decay_start=parsed["advising.rho_decay_start"],
            n_min=parsed["advising.n_min"],
            t_min=parsed["advising.t_min"],
            k_init=parsed["advising.k_init"],
            k_periodic=parsed["advising.k_periodic"],
            n_passes=parsed["advising.n_passes"],
            ra_probability=parsed["advising.ra_probability"],
            min_window=parsed["advising.min_window"],
            max_window=parsed["advising.max_window"],
            secondary_dropout=parsed["advising.secondary_dropout"],
            model_dropout=parsed["advising.model_dropout"],
            imitation_lr=parsed["advising.imitation_lr"],
            imitation_batch=parsed["advising.imitation_batch"],
            lazy_um=parsed["advising.lazy_um"],
        )
        cfg = ExperimentConfig(
            env_preset=parsed["env.preset"],
            map_file=parsed["env.map_file"],
            env_overrides=overrides,
            teacher_mode=parsed["teacher.mode"],
            teacher_checkpoint=parsed["teacher.checkpoint"],
            advising=advising,
            gamma=parsed["rl.gamma"],
            learning_rate=parsed["rl.learning_rate"],
            batch_size=parsed["rl.batch_size"],
            replay_capacity=parsed["rl.replay_capacity"],
            replay_min=parsed["rl.replay_min"],
            target_sync=parsed["rl.target_sync"],
            eps_init=parsed["rl.eps_init"],
            eps_final=parsed["rl.eps_final"],
            eps_decay_steps=parsed["rl.eps_decay_steps"],
            hidden=parsed["rl.hidden"],
            total_steps=parsed["run.total_steps"],
            eval_interval=parsed["run.eval_interval"],
            eval_trials=parsed["run.eval_trials"],
            seeds=parsed["run.seeds"],
            out_dir=parsed["run.out_dir"],
            workers=parsed["run.workers"],
            name=parsed["run.name"],
        )
    except ValueError as err:
        raise ConfigError(str(err)) from None
    return cfg


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read config {path!r}: {err}") from None
    return config_from_values(parse_config_text(text))
