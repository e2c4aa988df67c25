"""Run configuration: INI files with [env]/[net]/[train]/[eval]/[output]
sections, strict key checking, and a deterministic echo format.

An empty file yields full defaults; file values override defaults; inline
"section.key=value" overrides win over the file. render_config() is the
canonical echo — parse_config_text(render_config(cfg)) reproduces cfg
exactly (floats round-trip through repr), which is what makes runs
replayable from their logged effective config alone.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
import os
from dataclasses import dataclass, field
from pathlib import Path

from .env import EnvConfig
from .errors import ParseError
from .net import NetConfig
from .train import TrainConfig


@dataclass
class EvalConfig:
    """Evaluation options shared by the eval/sweep/noise subcommands."""

    episodes: int = 100
    alpha: float = 0.0
    trials: int = 100
    noise_n: int = 400
    seed: int = 0

    def validate(self) -> None:
        pass


_SECTIONS = (("env", EnvConfig), ("net", NetConfig), ("train", TrainConfig),
             ("eval", EvalConfig))


@dataclass
class RunConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    net: NetConfig = field(default_factory=NetConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    out_dir: str = ""

    def validate(self) -> None:
        self.env.validate()
        self.net.validate()
        self.train.validate()
        self.eval.validate()

    def resolved_out_dir(self) -> Path:
        if self.out_dir:
            return Path(self.out_dir)
        return Path(os.environ.get("CROPRL_OUT", "runs"))


def _coerce(section: str, key: str, ftype, raw: str):
    raw = raw.strip()
    try:
        if ftype is bool:
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if ftype is int:
            return int(raw)
        if ftype is float:
            return float(raw)
        if ftype is str:
            return raw
    except ValueError as exc:
        raise ParseError(f"[{section}] {key}: {exc}") from None
    raise ParseError(f"[{section}] {key}: unsupported field type {ftype}")


def _field_types(cls) -> dict:
    return {f.name: f.type for f in dataclasses.fields(cls)}


_TYPE_NAMES = {"int": int, "float": float, "str": str, "bool": bool}


def _resolve_type(tp):
    # dataclass field types arrive as strings under `from __future__ import annotations`
    if isinstance(tp, str):
        return _TYPE_NAMES.get(tp, str)
    return tp


def parse_config_text(text: str, overrides: tuple[str, ...] = ()) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ParseError(f"malformed config: {exc}") from exc

    values: dict[str, dict] = {name: {} for name, _ in _SECTIONS}
    out_dir = ""
    known = dict(_SECTIONS)
    for section in parser.sections():
        if section == "output":
            for key, raw in parser.items(section):
                if key != "dir":
                    raise ParseError(f"unknown key '{key}' in section [output]")
                out_dir = raw.strip()
            continue
        if section not in known:
            raise ParseError(f"unknown config section [{section}]")
        types = _field_types(known[section])
        for key, raw in parser.items(section):
            if key not in types:
                raise ParseError(f"unknown key '{key}' in section [{section}]")
            values[section][key] = _coerce(section, key, _resolve_type(types[key]), raw)

    for item in overrides:
        if "=" not in item:
            raise ParseError(f"override '{item}' is not of the form section.key=value")
        dotted, raw = item.split("=", 1)
        if "." not in dotted:
            raise ParseError(f"override '{item}' is not of the form section.key=value")
        section, key = dotted.split(".", 1)
        if section == "output":
            if key != "dir":
                raise ParseError(f"unknown key '{key}' in section [output]")
            out_dir = raw.strip()
            continue
        if section not in known:
            raise ParseError(f"unknown config section [{section}]")
        types = _field_types(known[section])
        if key not in types:
            raise ParseError(f"unknown key '{key}' in section [{section}]")
        values[section][key] = _coerce(section, key, _resolve_type(types[key]), raw)

    cfg = RunConfig(
        env=EnvConfig(**values["env"]),
        net=NetConfig(**values["net"]),
        train=TrainConfig(**values["train"]),
        eval=EvalConfig(**values["eval"]),
        out_dir=out_dir,
    )
    cfg.validate()
    return cfg


def parse_config(path, overrides: tuple[str, ...] = ()) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ParseError(f"config file not found: {path}")
    return parse_config_text(path.read_text(), overrides)


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render_config(cfg: RunConfig) -> str:
    """Deterministic INI echo of the full effective configuration."""
    out = io.StringIO()
    for name, cls in _SECTIONS:
        obj = getattr(cfg, name)
        out.write(f"[{name}]\n")
        for f in dataclasses.fields(cls):
            out.write(f"{f.name} = {_format_value(getattr(obj, f.name))}\n")
        out.write("\n")
    out.write("[output]\n")
    out.write(f"dir = {cfg.out_dir}\n")
    return out.getvalue()
