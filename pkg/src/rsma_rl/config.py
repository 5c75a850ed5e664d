"""Run configuration: flat ``key=value`` text files plus CLI overrides.

Defaults reproduce the full-scale scenario (4x4 antennas/users, 40 dBm,
QoS 0.1 bps/Hz, 4,000 episodes of 200 steps).  The ``--desk`` profile
shrinks everything to a 2x2, 300-episode setup that trains in seconds
and is what CI exercises.

Config text is one ``section.key = value`` pair per line; ``#`` starts
a comment.  Lists (seeds, qos) are comma-separated.  The resolved
configuration is frozen next to every run's outputs and can be fed back
via ``--config`` to reproduce the run.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .env import ConfigError, EnvConfig
from .ppo import PpoConfig

ALGORITHMS = ("ppo", "qlearning", "greedy")


@dataclass
class QLearningConfig:
    n_actions: int = 9
    learning_rate: float = 0.1
    eps_start: float = 1.0
    eps_end: float = 0.05
    warmup_steps: int = 1000


@dataclass
class GreedyConfig:
    n_actions: int = 99
    exploration: float = 0.1


@dataclass
class RunConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    ppo: PpoConfig = field(default_factory=PpoConfig)
    qlearning: QLearningConfig = field(default_factory=QLearningConfig)
    greedy: GreedyConfig = field(default_factory=GreedyConfig)
    algorithm: str = "ppo"
    episodes: int = 4000
    seeds: tuple = (0,)
    eval_episodes: int = 100
    channel_seed: int | None = None  # overrides the derived channel stream

    def validate(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.episodes < 1:
            raise ConfigError(f"episodes must be >= 1, got {self.episodes}")
        if len(self.seeds) < 1:
            raise ConfigError("need at least one seed")
        self.env.validate()
        self.ppo.validate()
        if self.algorithm == "ppo":
            if self.ppo.rollout_steps % self.env.episode_len != 0:
                raise ConfigError(
                    f"ppo.rollout_steps ({self.ppo.rollout_steps}) must be a "
                    f"multiple of env.episode_len ({self.env.episode_len})"
                )
            per_update = self.ppo.rollout_steps // self.env.episode_len
            if self.episodes % per_update != 0:
                raise ConfigError(
                    f"episodes ({self.episodes}) must be a multiple of episodes "
                    f"per update ({per_update})"
                )


def desk_profile(config: RunConfig) -> RunConfig:
    """Small CI-scale variant: 2 users, 2 antennas, 300 x 100 steps."""
    env = replace(config.env, m=2, k=2, qos=np.full(2, 0.1), episode_len=100)
    ppo = replace(config.ppo, rollout_steps=500, learning_rate=1e-3)
    return replace(config, env=env, ppo=ppo, episodes=300)


# -- flat text serialization --------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (tuple, list, np.ndarray)):
        return ",".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return f"{value:.12g}"
    if value is None:
        return "none"
    return str(value)


def to_text(config: RunConfig) -> str:
    """Serialize to flat key=value lines (stable order)."""
    lines = []
    sections = {
        "env": asdict(config.env),
        "ppo": asdict(config.ppo),
        "qlearning": asdict(config.qlearning),
        "greedy": asdict(config.greedy),
    }
    run_keys = {
        "algorithm": config.algorithm,
        "episodes": config.episodes,
        "seeds": config.seeds,
        "eval_episodes": config.eval_episodes,
    }
    for key, value in run_keys.items():
        lines.append(f"run.{key} = {_fmt(value)}")
    if config.channel_seed is not None:
        lines.append(f"channel.seed = {_fmt(config.channel_seed)}")
    for section, mapping in sections.items():
        for key, value in mapping.items():
            lines.append(f"{section}.{key} = {_fmt(value)}")
    return "\n".join(lines) + "\n"


def save_config(path, config: RunConfig):
    with open(path, "w", encoding="utf-8") as f:
        f.write(to_text(config))


def _parse_scalar(text: str):
    text = text.strip()
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if low == "none":
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def parse_kv_text(text: str) -> dict:
    """Parse flat config text into a {dotted_key: raw_value} dict."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _parse_list(text: str):
    return [_parse_scalar(part) for part in text.split(",") if part.strip() != ""]


_ALIASES = {
    "channel.perfect_csit": "env.perfect_csit",
    "channel.gauss_markov_rho": "env.gauss_markov_rho",
}

_LIST_KEYS = {"env.qos", "run.seeds", "ppo.hidden"}


def apply_kv(config: RunConfig, kv: dict) -> RunConfig:
    """Apply dotted-key overrides onto a RunConfig, returning a new one."""
    kv = dict(kv)
    for alias, canonical in _ALIASES.items():
        if alias in kv:
            if canonical in kv and kv[canonical].strip() != kv[alias].strip():
                raise ConfigError(
                    f"{alias!r} and {canonical!r} are both set and disagree"
                )
            kv[canonical] = kv.pop(alias)

    env_kw, ppo_kw, ql_kw, gr_kw, run_kw = {}, {}, {}, {}, {}
    targets = {"env": env_kw, "ppo": ppo_kw, "qlearning": ql_kw, "greedy": gr_kw}
    for raw_key, raw_value in kv.items():
        key = raw_key
        if key == "channel.seed":
            run_kw["channel_seed"] = _parse_scalar(raw_value)
            continue
        if "." not in key:
            raise ConfigError(f"unknown config key {raw_key!r}")
        section, name = key.split(".", 1)
        value = (
            _parse_list(raw_value) if key in _LIST_KEYS else _parse_scalar(raw_value)
        )
        if section == "run":
            if name == "seeds":
                run_kw["seeds"] = tuple(value)
            elif name in ("algorithm", "episodes", "eval_episodes"):
                run_kw[name] = value
            else:
                raise ConfigError(f"unknown config key {raw_key!r}")
        elif section in targets:
            if name == "hidden":
                value = tuple(value)
            if name == "qos":
                value = np.asarray(value, dtype=float)
            if name not in asdict(getattr(config, section)):
                raise ConfigError(f"unknown config key {raw_key!r}")
            targets[section][name] = value
        else:
            raise ConfigError(f"unknown config key {raw_key!r}")

    env = replace(config.env, **env_kw) if env_kw else config.env
    ppo = replace(config.ppo, **ppo_kw) if ppo_kw else config.ppo
    ql = replace(config.qlearning, **ql_kw) if ql_kw else config.qlearning
    gr = replace(config.greedy, **gr_kw) if gr_kw else config.greedy
    return replace(config, env=env, ppo=ppo, qlearning=ql, greedy=gr, **run_kw)


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    base = base if base is not None else RunConfig()
    with open(path, "r", encoding="utf-8") as f:
        kv = parse_kv_text(f.read())
    config = apply_kv(base, kv)
    config.validate()
    return config
