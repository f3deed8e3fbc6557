"""Typed pipeline configuration with strict parsing.

Every stage's knobs live in one frozen tree of dataclasses.  Parsing is
strict: unknown keys, wrong types, and out-of-range values all raise
``ConfigError`` with a dotted path to the offender, so a typo in a config
file fails loudly instead of silently running defaults.

Files may be JSON or TOML; command lines can override single values with
``section.key=value`` strings.
"""

from __future__ import annotations

import dataclasses
import json
import sys
import types
from dataclasses import dataclass, field, is_dataclass
from pathlib import Path
from typing import Union, get_args, get_origin, get_type_hints

from .errors import ConfigError
from .graph import GraphParams
from .refinement import PlausibilityRules, RefineParams
from .tracking import AssociationParams

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "PipelineConfig",
    "config_from_dict",
    "config_to_dict",
    "load_config",
    "apply_overrides",
]

_ANCHORS = ("first-frame", "world")


@dataclass(frozen=True)
class PipelineConfig:
    """Everything the end-to-end pipeline needs besides the data."""

    refine: RefineParams = field(default_factory=RefineParams)
    rules: PlausibilityRules = field(default_factory=PlausibilityRules)
    association: AssociationParams = field(default_factory=AssociationParams)
    graph: GraphParams = field(default_factory=GraphParams)
    window_frames: int | None = 10
    anchor: str = "first-frame"

    def __post_init__(self) -> None:
        if self.anchor not in _ANCHORS:
            raise ValueError(f"anchor must be one of {_ANCHORS}")
        if self.window_frames is not None and self.window_frames < 1:
            raise ValueError("window_frames must be at least 1 (or null)")


def _coerce(value, hint, path: str):
    origin = get_origin(hint)
    if origin is Union or origin is types.UnionType:
        members = get_args(hint)
        if value is None:
            if type(None) in members:
                return None
            raise ConfigError(f"{path}: null is not allowed")
        for member in members:
            if member is type(None):
                continue
            return _coerce(value, member, path)
    if is_dataclass(hint):
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected a table, got {type(value).__name__}")
        return _dataclass_from_dict(hint, value, path)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{path}: expected a list")
        args = get_args(hint)
        if args and args[-1] is not Ellipsis and len(value) != len(args):
            raise ConfigError(
                f"{path}: expected {len(args)} entries, got {len(value)}"
            )
        if args:
            element_hints = (
                [args[0]] * len(value) if args[-1] is Ellipsis else list(args)
            )
        else:
            element_hints = [type(v) for v in value]
        return tuple(
            _coerce(v, h, f"{path}[{i}]")
            for i, (v, h) in enumerate(zip(value, element_hints))
        )
    if hint is bool:
        if isinstance(value, bool):
            return value
        raise ConfigError(f"{path}: expected true/false, got {value!r}")
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    raise ConfigError(f"{path}: unsupported config field type {hint!r}")


def _dataclass_from_dict(cls, doc: dict, path: str):
    hints = get_type_hints(cls)
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(doc) - known
    if unknown:
        where = f"{path}." if path else ""
        full = where + sorted(unknown)[0]
        raise ConfigError(f"unknown config key {full!r}")
    kwargs = {}
    for name, value in doc.items():
        child = f"{path}.{name}" if path else name
        kwargs[name] = _coerce(value, hints[name], child)
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{path or 'config'}: {exc}") from exc


def config_from_dict(doc: dict) -> PipelineConfig:
    """Build a config from plain data, rejecting anything unexpected."""
    if not isinstance(doc, dict):
        raise ConfigError(f"config root must be a table, got {type(doc).__name__}")
    return _dataclass_from_dict(PipelineConfig, doc, "")


def _to_plain(value):
    if is_dataclass(value) and not isinstance(value, type):
        return {
            f.name: _to_plain(getattr(value, f.name))
            for f in dataclasses.fields(value)
        }
    if isinstance(value, tuple):
        return [_to_plain(v) for v in value]
    return value


def config_to_dict(config: PipelineConfig) -> dict:
    """The inverse of :func:`config_from_dict`, fit for JSON or TOML."""
    return _to_plain(config)


def load_config(path: str | Path, overrides: "list[str] | None" = None) -> PipelineConfig:
    """Read a JSON or TOML config file, then apply dotted overrides."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        if path.suffix.lower() == ".toml":
            doc = tomllib.loads(path.read_text())
        else:
            doc = json.loads(path.read_text())
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if overrides:
        doc = apply_overrides(doc, overrides)
    return config_from_dict(doc)


def apply_overrides(doc: dict, overrides: list[str]) -> dict:
    """Apply ``a.b.c=value`` strings onto a config dict, returning a copy.

    Values parse as JSON when possible (numbers, booleans, lists) and
    fall back to plain strings.
    """
    result = json.loads(json.dumps(doc))
    for override in overrides:
        key, sep, raw = override.partition("=")
        if not sep or not key:
            raise ConfigError(
                f"override {override!r} is not of the form key=value"
            )
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = result
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a scalar")
        node[parts[-1]] = value
    return result
