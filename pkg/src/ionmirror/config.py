"""Run configuration: a sectioned ``key = value`` text file.

Every key has a default, so an empty file is a valid configuration. Lists
are comma separated and ``none`` stands for an unset optional value.
Floats are written with ``repr`` so a rendered file parses back exactly.
"""

import configparser
import typing
from dataclasses import dataclass, field, fields, replace

from .corrector import Layout
from .trap import TrapSystem


@dataclass(frozen=True)
class SynthesisConfig:
    n_grid: int = 513
    n_rays: int = 256
    tolerance_mm: float = None      # none = quarter wave
    max_iter: int = 50


@dataclass(frozen=True)
class EvaluationConfig:
    fan_size: int = 256
    focal_length_mm: float = 25.0
    offsets_um: typing.Tuple[float, ...] = (-50.0, -40.0, -30.0, -20.0, -10.0, 0.0,
                                            10.0, 20.0, 30.0, 40.0, 50.0)
    off_axis_um: float = None
    variants: typing.Tuple[str, ...] = ("quartic", "even", "odd", "full", "numeric", "none",
                                        "parabola")
    bases: typing.Tuple[str, ...] = ("even", "odd", "full")


@dataclass(frozen=True)
class TrapSweepConfig:
    distances_mm: typing.Tuple[float, ...] = (3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 12.0, 15.0)
    damping: float = 5e5
    duration_cycles: int = 600
    window_cycles: int = 100
    steps_per_cycle: int = 400


@dataclass(frozen=True)
class RunConfig:
    layout: Layout = field(default_factory=Layout)
    synthesis: SynthesisConfig = field(default_factory=SynthesisConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    trap: TrapSystem = field(default_factory=TrapSystem)
    sweep: TrapSweepConfig = field(default_factory=TrapSweepConfig)
    out_dir: str = "out"
    seed: int = 0   # reserved; every algorithm here is deterministic


SECTIONS = ("layout", "synthesis", "evaluation", "trap", "sweep")
TOP_LEVEL = ("out_dir", "seed")


class ConfigError(ValueError):
    pass


def _render_value(value):
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(float(value))
    if isinstance(value, (tuple, list)):
        return ", ".join(_render_value(v) for v in value)
    return str(value)


def _field_kind(cls, name):
    for f in fields(cls):
        if f.name == name:
            return f.type, f.default
    raise ConfigError(f"unknown key {name!r} for {cls.__name__}")


def _parse_value(text, ftype, default):
    text = text.strip()
    if typing.get_origin(ftype) is tuple or ftype is tuple:
        args = typing.get_args(ftype)
        elem = args[0] if args else float
        return tuple(_parse_value(t, elem, None) if elem is not str else t.strip()
                     for t in text.split(",") if t.strip())
    if text.lower() == "none":
        return None
    if ftype is bool or isinstance(default, bool):
        low = text.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ConfigError(f"not a boolean: {text!r}")
    if ftype is int:
        return int(text)
    if ftype is float:
        return float(text)
    return text


def render(cfg):
    lines = ["# ionmirror run configuration"]
    for key in TOP_LEVEL:
        lines.append(f"{key} = {_render_value(getattr(cfg, key))}")
    for section in SECTIONS:
        obj = getattr(cfg, section)
        lines.append("")
        lines.append(f"[{section}]")
        for f in fields(obj):
            lines.append(f"{f.name} = {_render_value(getattr(obj, f.name))}")
    return "\n".join(lines) + "\n"


def _apply(cfg, section, key, text):
    try:
        if section is None:
            if key not in TOP_LEVEL:
                raise ConfigError(f"unknown top-level key {key!r}")
            ftype, default = _field_kind(RunConfig, key)
            return replace(cfg, **{key: _parse_value(text, ftype, default)})
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        obj = getattr(cfg, section)
        ftype, default = _field_kind(type(obj), key)
        return replace(cfg, **{section: replace(obj, **{key: _parse_value(text, ftype, default)})})
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad value for {section or ''}.{key}: {exc}") from exc


def parse(text, cfg=None):
    cfg = RunConfig() if cfg is None else cfg
    parser = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
    parser.optionxform = str
    try:
        parser.read_string("[__top__]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    for section in parser.sections():
        for key, value in parser.items(section):
            cfg = _apply(cfg, None if section == "__top__" else section, key, value)
    return cfg


def load(path=None, overrides=()):
    """Defaults, then the file at ``path``, then ``section.key=value`` overrides."""
    cfg = RunConfig()
    if path is not None:
        try:
            with open(path) as fh:
                cfg = parse(fh.read(), cfg)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        key = key.strip()
        section, _, name = key.rpartition(".")
        cfg = _apply(cfg, section or None, name, value)
    return cfg
