"""Unit-suffixed quantities and TOML documents that report errors by line.

Quantities are written as ``"2.02 MHz"`` or, for vectors,
``"[0, -285, 0] um"``; parsing returns SI floats (hertz, not rad/s, for
the ``frequency`` dimension).
"""
from __future__ import annotations

import math
import re
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

UNITS = {
    "frequency": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9},
    "angular_frequency": {"rad/s": 1.0, "krad/s": 1e3, "Mrad/s": 1e6},
    "length": {"m": 1.0, "mm": 1e-3, "um": 1e-6, "μm": 1e-6, "nm": 1e-9},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "μs": 1e-6, "ns": 1e-9},
    "field": {"T": 1.0, "mT": 1e-3, "uT": 1e-6, "μT": 1e-6, "G": 1e-4},
    "gradient": {"T/m": 1.0, "mT/m": 1e-3, "G/cm": 1e-2},
    "current": {"A": 1.0, "mA": 1e-3},
}

_NUMBER = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|[-+]?inf"
_SCALAR = re.compile(rf"^\s*({_NUMBER})\s*(\S+)\s*$")
_VECTOR = re.compile(r"^\s*\[([^\]]*)\]\s*(\S+)\s*$")


class ConfigError(ValueError):
    """Bad configuration content; ``str()`` is ``path:line: message``."""

    def __init__(self, message, path=None, line=None):
        super().__init__(message)
        self.message, self.path, self.line = message, path, line

    def __str__(self):
        where = str(self.path or "<config>")
        if self.line:
            where += f":{self.line}"
        return f"{where}: {self.message}"


def _scale(unit, dimension):
    table = UNITS[dimension]
    if unit not in table:
        raise ValueError(f"unit {unit!r} is not a {dimension} unit; use one of {', '.join(table)}")
    return table[unit]


def parse_quantity(value, dimension) -> float:
    """``"16.3 T/m"`` -> 16.3 for dimension ``gradient``. A bare number is rejected."""
    if not isinstance(value, str):
        raise ValueError(f"expected a quoted {dimension} with a unit, e.g. \"1 {next(iter(UNITS[dimension]))}\"")
    m = _SCALAR.match(value)
    if not m:
        raise ValueError(f"cannot read {value!r} as a {dimension}")
    return float(m.group(1)) * _scale(m.group(2), dimension)


def parse_vector(value, dimension, size=3) -> list:
    """``"[0, 0.35, 0] mT"`` -> [0.0, 3.5e-4, 0.0]."""
    if not isinstance(value, str):
        raise ValueError(f"expected a quoted vector with a unit, e.g. \"[0, 0, 1] {next(iter(UNITS[dimension]))}\"")
    m = _VECTOR.match(value)
    if not m:
        raise ValueError(f"cannot read {value!r} as a {dimension} vector")
    try:
        parts = [float(p) for p in m.group(1).split(",")]
    except ValueError:
        raise ValueError(f"non-numeric component in {value!r}")
    if len(parts) != size:
        raise ValueError(f"expected {size} components, got {len(parts)}")
    scale = _scale(m.group(2), dimension)
    return [p * scale for p in parts]


def format_quantity(value, unit, dimension) -> str:
    v = value / _scale(unit, dimension)
    return f"{'inf' if math.isinf(v) else repr(float(v))} {unit}"


def format_vector(values, unit, dimension) -> str:
    s = _scale(unit, dimension)
    return "[" + ", ".join(repr(float(v) / s) for v in values) + f"] {unit}"


class TomlSource:
    """Parsed TOML plus a key -> line index for error messages."""

    def __init__(self, text: str, path=None):
        self.text, self.path = text, path
        try:
            self.data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            line = getattr(exc, "lineno", None)
            if line is None:
                m = re.search(r"line (\d+)", str(exc))
                line = int(m.group(1)) if m else None
            raise ConfigError(f"TOML syntax error: {exc}", path, line) from None
        self._lines = self._index(text)

    @classmethod
    def from_file(cls, path):
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read file: {exc.strerror}", path) from None
        return cls(text, path)

    @staticmethod
    def _index(text):
        index, table, seen = {}, ("", None), {}
        for no, raw in enumerate(text.splitlines(), start=1):
            s = raw.split("#", 1)[0].strip()
            m = re.match(r"^\[\[\s*([^\]]+?)\s*\]\]$", s)
            if m:
                name = m.group(1)
                seen[name] = seen.get(name, -1) + 1
                table = (name, seen[name])
                index.setdefault((table, None), no)
                continue
            m = re.match(r"^\[\s*([^\]]+?)\s*\]$", s)
            if m:
                table = (m.group(1), None)
                index.setdefault((table, None), no)
                continue
            m = re.match(r"^\s*\"?([A-Za-z0-9_\-]+)\"?\s*=", s)
            if m:
                index.setdefault((table, m.group(1)), no)
        return index

    def line(self, table="", key=None, item=None):
        t = (table, item)
        found = self._lines.get((t, key))
        if found is None and key is not None:
            # a key may itself open a table, as in [name] or [[name]]
            sub = f"{table}.{key}" if table else key
            found = self._lines.get(((sub, None), None)) or self._lines.get(((sub, 0), None))
        return found or self._lines.get((t, None))

    def error(self, message, table="", key=None, item=None):
        return ConfigError(message, self.path, self.line(table, key, item))

    def check_keys(self, mapping, allowed, table="", item=None):
        for key in mapping:
            if key not in allowed:
                where = f"[{table}]" if table else "top level"
                raise self.error(f"unknown key {key!r} in {where}", table, key, item)
