"""Experiment configuration files (TOML, schema ``zigzag-config/1``).

Physical values are strings with unit suffixes and are normalised to SI on
load. Frequencies are written as ordinary frequencies (``"1.05 MHz"``) and
stored as angular frequencies in rad/s. See ``configs/`` for examples.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import SPECIES
from .crystal import TrapPotential
from .field import FieldModel, WireSegment, layout_from_source
from .units import ConfigError, TomlSource, parse_quantity, parse_vector

SCHEMA = "zigzag-config/1"
REQUIRED = object()

# kind of each key and its default (REQUIRED, None for "absent", or a value)
SECTIONS = {
    "trap": {
        "species": ("str", "40Ca+"),
        "omega_x": ("frequency", REQUIRED),
        "omega_y": ("frequency", None),
        "omega_z": ("frequency", None),
        "alpha": ("float", None),
    },
    "crystal": {
        "n": ("int", REQUIRED),
        "seed": ("int", 0),
        "roi": ("int_list", None),
    },
    "field": {
        "gradient": ("gradient", None),
        "direction": ("float_vector", [1.0, 0.0, 0.0]),
        "bias": ("field_vector", [0.0, 3.5e-4, 0.0]),
        "layout": ("str", None),
        "ion_position": ("length_vector", [0.0, 0.0, 0.0]),
    },
    "spectrum": {
        "start": ("frequency", REQUIRED),
        "stop": ("frequency", REQUIRED),
        "points": ("int", REQUIRED),
        "rabi_frequency": ("frequency", REQUIRED),
        "pulse_time": ("time", REQUIRED),
        "phonons": ("str", "thermal"),
        "nbar": ("float", 0.0),
    },
    "rabi": {
        "transition": ("str", "rsb"),
        "mode": ("int", 0),
        "ion": ("int", 0),
        "eta": ("float", None),
        "rabi_frequency": ("frequency", REQUIRED),
        "detuning": ("frequency", 0.0),
        "decay_time": ("time", math.inf),
        "stop": ("time", REQUIRED),
        "points": ("int", REQUIRED),
        "phonons": ("str", "thermal"),
        "nbar": ("float", 0.0),
        "readout_noise": ("float", 0.0),
        "fit": ("bool", False),
    },
    "coherence": {
        "pulses": ("int_list", [0, 1, 3, 5, 7, 9]),
        "stop": ("time", REQUIRED),
        "points": ("int", 301),
        "trajectories": ("int", 1000),
        "steps": ("int", 2000),
    },
    "noise": {
        "kind": ("str", "ou"),
        "sigma": ("angular_frequency", 0.0),
        "tau_c": ("time", math.inf),
    },
    "field_map": {
        "start": ("length_vector", REQUIRED),
        "stop": ("length_vector", REQUIRED),
        "points": ("int", REQUIRED),
    },
    "alpha_scan": {
        "start": ("float", REQUIRED),
        "stop": ("float", REQUIRED),
        "points": ("int", REQUIRED),
    },
}
CHOICES = {
    ("spectrum", "phonons"): ("fock", "thermal", "coherent"),
    ("rabi", "phonons"): ("fock", "thermal", "coherent"),
    ("rabi", "transition"): ("carrier", "rsb", "bsb"),
    ("noise", "kind"): ("none", "ou", "static"),
}


def _convert(kind, value):
    if kind == "str":
        if not isinstance(value, str):
            raise ValueError("expected a string")
        return value
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValueError("expected an integer")
        return value
    if kind == "bool":
        if not isinstance(value, bool):
            raise ValueError("expected true or false")
        return value
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError("expected a number")
        return float(value)
    if kind == "int_list":
        if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool)
                                                  for v in value):
            raise ValueError("expected a list of integers")
        return list(value)
    if kind == "float_vector":
        if not isinstance(value, list) or len(value) != 3:
            raise ValueError("expected a list of three numbers")
        return [float(v) for v in value]
    if kind.endswith("_vector"):
        return parse_vector(value, kind[: -len("_vector")])
    value = parse_quantity(value, kind)
    return 2 * math.pi * value if kind == "frequency" else value


@dataclass
class ExperimentConfig:
    path: Path | None
    sha256: str
    sections: dict
    source: TomlSource

    def section(self, name) -> dict:
        if name not in self.sections:
            raise ConfigError(f"this command needs a [{name}] section", self.path)
        return self.sections[name]

    def error(self, message, table="", key=None):
        return self.source.error(message, table, key)

    def trap(self, need_axial=True) -> TrapPotential:
        """Trap from [trap]; with ``need_axial=False`` a missing axial setting defaults to alpha = 0.5."""
        t = self.section("trap")
        species = SPECIES.get(t["species"])
        if species is None:
            raise self.error(f"unknown species {t['species']!r}; known: {', '.join(SPECIES)}",
                             "trap", "species")
        if t["omega_z"] is not None and t["alpha"] is not None:
            raise self.error("give only one of omega_z and alpha", "trap")
        if t["omega_z"] is None and t["alpha"] is None:
            if need_axial:
                raise self.error("give one of omega_z and alpha", "trap")
            t = dict(t, alpha=0.5)
        wx = t["omega_x"]
        wy = t["omega_y"] if t["omega_y"] is not None else 2 * wx
        try:
            if t["alpha"] is not None:
                return TrapPotential.from_alpha(wx, t["alpha"], wy, species)
            return TrapPotential(wx, wy, t["omega_z"], species)
        except ValueError as exc:
            raise self.error(str(exc), "trap") from None

    def field_model(self) -> FieldModel:
        f = self.section("field")
        if (f["gradient"] is None) == (f["layout"] is None):
            raise self.error("give exactly one of gradient and layout", "field")
        if f["gradient"] is not None:
            try:
                return FieldModel.linear_gradient(f["gradient"], f["direction"], f["bias"])
            except ValueError as exc:
                raise self.error(str(exc), "field") from None
        layout = Path(f["layout"])
        if not layout.is_absolute() and self.path is not None:
            layout = self.path.parent / layout
        model = layout_from_source(TomlSource.from_file(layout))
        shift = np.asarray(f["ion_position"])
        wires = [WireSegment(tuple(np.asarray(w.anchor) - shift), w.direction, w.current, w.length)
                 for w in model.wires]
        return FieldModel(bias=model.bias, wires=wires)

    def gradient_direction(self) -> np.ndarray:
        d = np.asarray(self.section("field")["direction"], dtype=float)
        return d / np.linalg.norm(d)

    def roi(self, n) -> list:
        roi = self.section("crystal")["roi"]
        roi = list(range(n)) if roi is None else roi
        if not roi:
            raise self.error("roi is empty", "crystal", "roi")
        bad = [i for i in roi if not 0 <= i < n]
        if bad:
            raise self.error(f"roi ions {bad} outside 0..{n - 1}", "crystal", "roi")
        return roi


def parse_config(text: str, path=None) -> ExperimentConfig:
    src = TomlSource(text, path)
    data = src.data
    if data.get("schema") != SCHEMA:
        raise src.error(f'first line must declare schema = "{SCHEMA}"', "", "schema")
    src.check_keys(data, {"schema", *SECTIONS})
    sections = {}
    for name, body in data.items():
        if name == "schema":
            continue
        if not isinstance(body, dict):
            raise src.error(f"{name} must be a [{name}] table", "", name)
        spec = SECTIONS[name]
        src.check_keys(body, spec, name)
        out = {}
        for key, (kind, default) in spec.items():
            if key not in body:
                if default is REQUIRED:
                    raise src.error(f"[{name}] is missing required key {key!r}", name)
                out[key] = default
                continue
            try:
                out[key] = _convert(kind, body[key])
            except ValueError as exc:
                raise src.error(f"{name}.{key}: {exc}", name, key) from None
            choices = CHOICES.get((name, key))
            if choices and out[key] not in choices:
                raise src.error(f"{name}.{key} must be one of {', '.join(choices)}", name, key)
        for key in ("points", "n", "trajectories", "steps"):
            if key in out and out[key] is not None and out[key] < 1:
                raise src.error(f"{name}.{key} must be at least 1", name, key)
        sections[name] = out
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return ExperimentConfig(Path(path) if path else None, digest, sections, src)


def load_config(path) -> ExperimentConfig:
    src = TomlSource.from_file(path)
    return parse_config(src.text, Path(path))
