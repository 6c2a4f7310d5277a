"""Line-oriented ``key = value`` experiment configuration files.

Blank lines and ``#`` comments are ignored.  Keys are the field names of
:class:`~salnet.harness.ExperimentSpec`; any other key is an error.
"""
from __future__ import annotations

import ast
import dataclasses
from pathlib import Path

from .harness import ExperimentSpec


class ConfigError(ValueError):
    def __init__(self, message: str, path=None, line: int | None = None):
        where = f"{path}:{line}: " if line is not None else (f"{path}: " if path else "")
        super().__init__(where + message)
        self.line = line


_OPTIONAL = ("runs", "steps", "dfnn_epochs", "nets", "spectral_radius", "radius_step", "eta_sal", "beta")


def _field_types() -> dict[str, object]:
    base = ExperimentSpec()
    return {f.name: getattr(base, f.name) for f in dataclasses.fields(ExperimentSpec)}


def _coerce(name: str, raw: str, default):
    text = raw.strip()
    if text.lower() in ("none", "") and name in _OPTIONAL:
        return None
    if isinstance(default, bool):
        low = text.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if isinstance(default, tuple):
        parts = [p for p in text.replace(",", " ").split() if p]
        return tuple(ast.literal_eval(p) for p in parts)
    if name == "kind" or name == "case":
        return text
    value = ast.literal_eval(text)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"expected a number, got {text!r}")
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, float) and not value.is_integer():
            raise ValueError(f"expected an integer, got {text!r}")
        return int(value)
    if default is None and name in ("runs", "steps", "dfnn_epochs", "nets"):
        if isinstance(value, float) and not value.is_integer():
            raise ValueError(f"expected an integer, got {text!r}")
        return int(value)
    return float(value)


def parse_config(text: str, path=None) -> dict:
    """Parse config text into a dict of typed overrides."""
    types = _field_types()
    out: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected 'key = value', got {body!r}", path, lineno)
        key, raw = (s.strip() for s in body.split("=", 1))
        if key not in types:
            raise ConfigError(f"unknown key {key!r}", path, lineno)
        if key in out:
            raise ConfigError(f"duplicate key {key!r}", path, lineno)
        try:
            out[key] = _coerce(key, raw, types[key])
        except (ValueError, SyntaxError) as exc:
            raise ConfigError(f"bad value for {key}: {exc}", path, lineno) from None
    return out


def load_config(path, **overrides) -> ExperimentSpec:
    """Read a config file; ``overrides`` (e.g. from the command line) win over file values."""
    path = Path(path)
    values = parse_config(path.read_text(), path)
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentSpec(**values)
    except ValueError as exc:
        raise ConfigError(str(exc), path) from None
