"""Flat ``key = value`` configuration files.

Grammar, one entry per line::

    # comment
    key = value

Blank lines and ``#`` comments are ignored; whitespace around ``=`` is
optional. Values are converted to the type of the matching dataclass field:
ints, floats, ``true``/``false``, strings, or comma-separated int tuples.
Unknown keys are errors.
"""

from __future__ import annotations

import dataclasses
import typing


class ConfigError(ValueError):
    pass


def _convert(raw: str, target, key):
    raw = raw.strip()
    try:
        if target is bool:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if target is int:
            return int(raw)
        if target is float:
            return float(raw)
        if typing.get_origin(target) is tuple:
            return tuple(int(v) for v in raw.split(",") if v.strip())
        return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot read {raw!r} as {getattr(target, '__name__', target)}") from None


def field_types(cls):
    hints = typing.get_type_hints(cls)
    return {f.name: hints[f.name] for f in dataclasses.fields(cls)}


def parse_config(text: str, cls, base=None, source="<config>"):
    """Parse ``text`` into ``cls``, starting from ``base`` (or the defaults)."""
    types = field_types(cls)
    values = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"{source}:{line_no}: expected 'key = value'")
        if key not in types:
            raise ConfigError(f"{source}:{line_no}: unknown key {key!r}")
        values[key] = _convert(raw, types[key], f"{source}:{line_no}: {key}")
    base = base if base is not None else cls()
    return dataclasses.replace(base, **values)


def read_config(path, cls, base=None):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), cls, base, source=str(path))


def apply_overrides(obj, overrides: dict):
    """Replace fields from a ``{name: value}`` dict, skipping ``None`` values."""
    types = field_types(type(obj))
    clean = {}
    for k, v in overrides.items():
        if v is None:
            continue
        if k not in types:
            raise ConfigError(f"unknown setting {k!r}")
        clean[k] = _convert(v, types[k], k) if isinstance(v, str) else v
    return dataclasses.replace(obj, **clean)


def format_config(obj):
    def fmt(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, tuple):
            return ",".join(str(x) for x in v)
        return str(v)
    return "".join(f"{k} = {fmt(v)}\n" for k, v in dataclasses.asdict(obj).items())
