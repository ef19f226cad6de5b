"""Flat INI-style run configuration.

Sections mirror the component configs (``graph``, ``net``, ``weights``,
``loop``, ``synth``, ``run``). Unknown sections or keys are rejected.
Precedence: CLI flags > config file > defaults.
"""

import configparser
import dataclasses
from dataclasses import dataclass, replace

from .data import SynthSpec
from .engine import LoopConfig
from .graph import GraphConfig
from .losses import LossWeights
from .nets import NetConfig, tiny_config


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    graph: GraphConfig
    net: NetConfig
    weights: LossWeights
    loop: LoopConfig
    synth: SynthSpec
    seed: int = 0
    jobs: int = 1
    tiny: bool = False


_SECTION_TYPES = {
    "graph": GraphConfig,
    "net": NetConfig,
    "weights": LossWeights,
    "loop": LoopConfig,
    "synth": SynthSpec,
}

_RUN_KEYS = {"seed": int, "jobs": int, "tiny": bool}


def _coerce(raw, typ, section, key):
    try:
        if typ is bool:
            lowered = raw.strip().lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return typ(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from exc


def _parse_section(parser, section, cls):
    fields = {f.name: f.type for f in dataclasses.fields(cls)}
    types = {"int": int, "float": float, "str": str, "bool": bool}
    values = {}
    for key, raw in parser.items(section):
        if key not in fields:
            raise ConfigError(f"unknown key '{key}' in section [{section}]")
        typ = fields[key]
        typ = types.get(typ, typ) if isinstance(typ, str) else typ
        values[key] = _coerce(raw, typ, section, key)
    try:
        return cls(**values)
    except ValueError as exc:
        raise ConfigError(f"invalid [{section}] values: {exc}") from exc


def load_config(path=None, *, seed=None, jobs=None, tiny=None):
    """Build a RunConfig from an optional file plus CLI overrides."""
    parser = configparser.ConfigParser()
    if path is not None:
        read = parser.read(path)
        if not read:
            raise ConfigError(f"cannot read config file: {path}")
    sections = {}
    run_values = {}
    for section in parser.sections():
        if section == "run":
            for key, raw in parser.items(section):
                if key not in _RUN_KEYS:
                    raise ConfigError(f"unknown key '{key}' in section [run]")
                run_values[key] = _coerce(raw, _RUN_KEYS[key], section, key)
        elif section in _SECTION_TYPES:
            sections[section] = _parse_section(parser, section,
                                               _SECTION_TYPES[section])
        else:
            raise ConfigError(f"unknown config section [{section}]")

    cfg = RunConfig(
        graph=sections.get("graph", GraphConfig()),
        net=sections.get("net", NetConfig()),
        weights=sections.get("weights", LossWeights()),
        loop=sections.get("loop", LoopConfig()),
        synth=sections.get("synth", SynthSpec()),
        **run_values,
    )
    if seed is not None:
        cfg.seed = seed
    if jobs is not None:
        cfg.jobs = jobs
    if tiny is not None:
        cfg.tiny = tiny
    if cfg.tiny:
        cfg.net = tiny_config(d_l=cfg.net.d_l, d_p=cfg.net.d_p,
                              tau=cfg.net.tau, eps=cfg.net.eps,
                              k_min=cfg.net.k_min)
    return cfg
