"""Experiment configuration files.

The format is INI: ``[section]`` headers followed by ``key = value`` lines,
``#`` or ``;`` comments.  Every section and key is checked against a schema;
unknown names, bad values and missing required keys are reported with the file
name and line number.  Lists are comma separated.

Sections: ``[run]`` (seed, output_dir), ``[env]`` (kind plus model
parameters), and one section per command: ``[oracle]``, ``[mfq]``,
``[ddpg]``, ``[evaluate]``, ``[acceptance]``, ``[bound]``.
"""

from __future__ import annotations

import configparser
import dataclasses
import re
from pathlib import Path

from .envs import CyberParams, LogisticParams, SwarmParams

REQUIRED = object()


class ConfigError(ValueError):
    """Invalid configuration; the message carries file and line."""


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _int_list(s: str) -> tuple:
    return tuple(int(x) for x in s.split(",") if x.strip())


def _float_list(s: str) -> tuple:
    return tuple(float(x) for x in s.split(",") if x.strip())


def _opt_str(s: str):
    return s.strip() or None


SCHEMA = {
    "run": {"seed": (int, 0), "output_dir": (str, "out")},
    "oracle": {
        "resolution": (int, REQUIRED),
        "gamma": (float, REQUIRED),
        "tol": (float, 1e-8),
        "noise_nodes": (int, 7),
    },
    "mfq": {
        "resolution": (int, REQUIRED),
        "gamma": (float, REQUIRED),
        "kappa": (float, 0.7),
        "episodes": (int, REQUIRED),
        "sweep_order": (str, "lexicographic"),
        "in_place": (_bool, False),
        "oracle_file": (_opt_str, None),
    },
    "ddpg": {
        "n_episodes": (int, 3000),
        "episode_length": (int, 50),
        "minibatch": (int, 16),
        "tau": (float, 0.01),
        "gamma": (float, 0.99),
        "action_noise_std": (float, 0.02**0.5),
        "actor_lr": (float, 1e-4),
        "critic_lr": (float, 1e-4),
        "buffer_capacity": (int, 100_000),
        "buffer_reset_per_episode": (_bool, True),
        "hidden": (_int_list, (64, 64)),
        "reward_scale": (float, 1.0),
        "updates_per_step": (int, 1),
        "checkpoint_episodes": (_int_list, ()),
        "horizon_time": (float, 10.0),
        "profile_steps": (int, 500),
    },
    "evaluate": {
        "checkpoint": (_opt_str, None),
        "table": (_opt_str, None),
        "gamma": (float, 0.99),
        "horizon": (int, 500),
        "initial": (_float_list, ()),
    },
    "acceptance": {
        "criteria": (_int_list, tuple(range(1, 10))),
        "include_slow": (_bool, True),
    },
    "bound": {
        "eps": (float, REQUIRED),
        "gamma": (float, REQUIRED),
        "L_V": (float, REQUIRED),
        "L_Phi": (float, REQUIRED),
        "L_f": (float, REQUIRED),
        "eps_S": (float, REQUIRED),
        "T_cov": (float, REQUIRED),
        "kappa": (float, REQUIRED),
        "delta": (float, REQUIRED),
        "V_max": (float, REQUIRED),
        "K_A": (float, REQUIRED),
        "n_grid": (int, REQUIRED),
        "n_profiles": (int, REQUIRED),
        "tau": (float, None),
    },
}

ENV_PARAMS = {"cyber": CyberParams, "swarm": SwarmParams, "logistic": LogisticParams}


def _env_field_parser(field: dataclasses.Field):
    default = field.default if field.default is not dataclasses.MISSING else field.default_factory()
    if isinstance(default, bool):
        return _bool
    if isinstance(default, int):
        return int
    if isinstance(default, float):
        return float
    if default is None:  # optional integer settings such as a fixed substep count
        return lambda s: None if s.strip().lower() in ("", "none", "auto") else int(s)
    if isinstance(default, tuple) and all(isinstance(v, (int, float)) for v in default):
        return _float_list
    return None  # not settable from a config file


@dataclasses.dataclass
class ExperimentConfig:
    path: str
    text: str
    sections: dict

    def section(self, name: str) -> dict:
        if name not in self.sections:
            raise ConfigError(f"{self.path}: missing section [{name}]")
        return self.sections[name]

    @property
    def seed(self) -> int:
        return self.sections["run"]["seed"]

    @property
    def output_dir(self) -> Path:
        return Path(self.sections["run"]["output_dir"])

    def env_kind(self) -> str:
        return self.section("env")["kind"]

    def env_params(self):
        env = dict(self.section("env"))
        kind = env.pop("kind")
        return ENV_PARAMS[kind](**env)


def _line_numbers(text: str) -> dict:
    """Map ``(section, key)`` and ``(section, None)`` to 1-based line numbers."""
    where, section = {}, None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"^\[([^\]]+)\]$", line)
        if m:
            section = m.group(1).strip()
            where.setdefault((section, None), i)
        elif section and line and line[0] not in "#;":
            key = re.split(r"[=:]", line, maxsplit=1)[0].strip()
            where.setdefault((section, key), i)
    return where


def parse_config(text: str, path: str = "<config>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keys are case sensitive (L_V, K_A)
    try:
        parser.read_string(text, source=path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    lines = _line_numbers(text)

    def where(section, key=None):
        n = lines.get((section, key))
        return f"{path}:{n}" if n else path

    sections = {}
    for name in parser.sections():
        items = dict(parser.items(name))
        if name == "env":
            kind = items.pop("kind", None)
            if kind not in ENV_PARAMS:
                raise ConfigError(f"{where('env', 'kind')}: [env] kind must be one of {sorted(ENV_PARAMS)}, got {kind!r}")
            fields = {f.name: f for f in dataclasses.fields(ENV_PARAMS[kind])}
            out = {"kind": kind}
            for key, raw in items.items():
                conv = _env_field_parser(fields[key]) if key in fields else None
                if conv is None:
                    raise ConfigError(f"{where(name, key)}: unknown key {key!r} for {kind} environment")
                try:
                    out[key] = conv(raw)
                except ValueError as exc:
                    raise ConfigError(f"{where(name, key)}: bad value for {key}: {exc}") from exc
            try:
                ENV_PARAMS[kind](**{k: v for k, v in out.items() if k != "kind"})
            except (ValueError, ArithmeticError) as exc:
                raise ConfigError(f"{where(name)}: invalid {kind} parameters: {exc}") from exc
            sections[name] = out
            continue
        if name not in SCHEMA:
            raise ConfigError(f"{where(name)}: unknown section [{name}]")
        schema = SCHEMA[name]
        out = {}
        for key, raw in items.items():
            if key not in schema:
                raise ConfigError(f"{where(name, key)}: unknown key {key!r} in [{name}]")
            try:
                out[key] = schema[key][0](raw)
            except ValueError as exc:
                raise ConfigError(f"{where(name, key)}: bad value for {key}: {exc}") from exc
        for key, (_, default) in schema.items():
            if key not in out:
                if default is REQUIRED:
                    raise ConfigError(f"{where(name)}: [{name}] is missing required key {key!r}")
                out[key] = default
        sections[name] = out
    if "run" not in sections:
        sections["run"] = {k: d for k, (_, d) in SCHEMA["run"].items()}
    return ExperimentConfig(path, text, sections)


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc}") from exc
    return parse_config(text, str(path))
