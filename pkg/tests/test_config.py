import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from zigzag.config import SCHEMA, load_config, parse_config
from zigzag.field import magnitude_gradient
from zigzag.units import (UNITS, ConfigError, TomlSource, format_quantity, format_vector,
                          parse_quantity, parse_vector)

HEAD = f'schema = "{SCHEMA}"\n'
TRAP = '[trap]\nomega_x = "1.75 MHz"\nomega_y = "2.9 MHz"\nalpha = 0.42\n'


def test_quantities_convert_to_si():
    assert parse_quantity("16.3 T/m", "gradient") == 16.3
    assert parse_quantity("2.02 MHz", "frequency") == 2.02e6
    assert parse_quantity("25 us", "time") == pytest.approx(25e-6, rel=1e-15)
    assert parse_quantity("25 μs", "time") == parse_quantity("25us", "time")
    assert parse_quantity("3.5 G", "field") == pytest.approx(3.5e-4)
    assert parse_quantity("inf s", "time") == math.inf
    assert parse_vector("[0, 0.35, 0] mT", "field") == pytest.approx([0, 3.5e-4, 0])


@pytest.mark.parametrize("value,dimension", [
    (16.3, "gradient"), ("16.3", "gradient"), ("16.3 T", "gradient"), ("fast MHz", "frequency"),
])
def test_bad_quantities(value, dimension):
    with pytest.raises(ValueError):
        parse_quantity(value, dimension)


def test_bad_vectors():
    with pytest.raises(ValueError, match="components"):
        parse_vector("[1, 2] um", "length")
    with pytest.raises(ValueError):
        parse_vector([1, 2, 3], "length")
    with pytest.raises(ValueError):
        parse_vector("[1, a, 3] um", "length")


@given(st.sampled_from(sorted(UNITS)), st.floats(-1e12, 1e12, allow_nan=False, allow_infinity=False))
def test_format_round_trip(dimension, value):
    for unit in UNITS[dimension]:
        text = format_quantity(value, unit, dimension)
        assert parse_quantity(text, dimension) == pytest.approx(value, rel=1e-15, abs=1e-300)


@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=3, max_size=3))
def test_vector_round_trip(values):
    text = format_vector(values, "um", "length")
    assert parse_vector(text, "length") == pytest.approx(values, rel=1e-15, abs=1e-300)


def test_toml_syntax_error_line():
    with pytest.raises(ConfigError) as info:
        TomlSource('a = 1\nb = = 2\n', "x.toml")
    assert info.value.line == 2
    assert str(info.value).startswith("x.toml:2:")


def test_config_round_trip_values():
    cfg = parse_config(HEAD + TRAP + '[crystal]\nn = 3\nseed = 7\n[field]\ngradient = "16.3 T/m"\n')
    trap = cfg.trap()
    assert trap.omega_x == pytest.approx(2 * math.pi * 1.75e6)
    assert trap.alpha == pytest.approx(0.42)
    assert cfg.section("crystal")["seed"] == 7
    grad = magnitude_gradient(cfg.field_model(), [0.0, 0.0, 0.0])
    assert grad == pytest.approx([16.3, 0, 0], abs=1e-12)
    assert len(cfg.sha256) == 64


def test_hash_tracks_content():
    a = parse_config(HEAD + TRAP + '[crystal]\nn = 3\n')
    b = parse_config(HEAD + TRAP + '[crystal]\nn = 4\n')
    assert a.sha256 != b.sha256
    assert a.sha256 == parse_config(HEAD + TRAP + '[crystal]\nn = 3\n').sha256


@pytest.mark.parametrize("text,line,fragment", [
    ('schema = "zigzag-config/0"\n', 1, "schema"),
    (HEAD + TRAP + 'colour = "blue"\n', 6, "unknown key 'colour'"),
    (HEAD + '[trapp]\n', 2, "unknown key 'trapp'"),
    (HEAD + '[trap]\nomega_x = 1.75e6\n', 3, "unit"),
    (HEAD + '[trap]\nomega_x = "1.75 MHz"\nomega_y = "2.9 T"\n', 4, "frequency"),
    (HEAD + '[trap]\nomega_y = "2.9 MHz"\n', 2, "omega_x"),
    (HEAD + TRAP + '[crystal]\nn = 0\n', 7, "at least 1"),
    (HEAD + TRAP + '[crystal]\nn = 3\n[rabi]\ntransition = "green"\n', 9, "one of"),
    (HEAD + TRAP + '[crystal]\nn = "three"\n', 7, "integer"),
])
def test_config_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config(text, "exp.toml")
    assert info.value.line == line
    assert fragment in str(info.value)
    assert str(info.value).startswith(f"exp.toml:{line}:")


def test_trap_requires_one_axial_setting():
    cfg = parse_config(HEAD + '[trap]\nomega_x = "1 MHz"\nalpha = 0.4\nomega_z = "0.5 MHz"\n')
    with pytest.raises(ConfigError, match="only one"):
        cfg.trap()
    cfg = parse_config(HEAD + '[trap]\nomega_x = "1 MHz"\n')
    with pytest.raises(ConfigError, match="one of"):
        cfg.trap()
    assert cfg.trap(need_axial=False).alpha == pytest.approx(0.5)


def test_missing_section_and_roi_checks():
    cfg = parse_config(HEAD + TRAP + '[crystal]\nn = 3\nroi = [0, 5]\n')
    with pytest.raises(ConfigError, match="field"):
        cfg.section("field")
    with pytest.raises(ConfigError) as info:
        cfg.roi(3)
    assert info.value.line == 8
    empty = parse_config(HEAD + TRAP + '[crystal]\nn = 3\nroi = []\n')
    with pytest.raises(ConfigError, match="empty"):
        empty.roi(3)


def test_field_needs_exactly_one_source():
    cfg = parse_config(HEAD + '[field]\ndirection = [1, 0, 0]\n')
    with pytest.raises(ConfigError, match="exactly one"):
        cfg.field_model()


def test_shipped_configs_load():
    from pathlib import Path
    for path in sorted((Path(__file__).resolve().parents[1] / "configs").glob("*.toml")):
        text = path.read_text()
        if "zigzag-config/1" in text:
            load_config(path)
        else:
            TomlSource.from_file(path)


def test_layout_is_resolved_next_to_config(tmp_path):
    (tmp_path / "w.toml").write_text('schema = "zigzag-wires/1"\n[[wire]]\nanchor = "[0, -100, 0] um"\n'
                                     'direction = [0, 0, 1]\ncurrent = "1 A"\n')
    cfg_path = tmp_path / "exp.toml"
    cfg_path.write_text(HEAD + '[field]\nlayout = "w.toml"\nion_position = "[0, 0, 0] um"\nbias = "[0, 0, 0] T"\n')
    model = load_config(cfg_path).field_model()
    assert model.wires[0].anchor == pytest.approx((0, -1e-4, 0))


def test_missing_file():
    with pytest.raises(ConfigError, match="cannot read"):
        load_config("/nonexistent/exp.toml")
