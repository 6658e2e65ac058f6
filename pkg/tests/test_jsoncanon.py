import json
import math
import subprocess

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from autoran import jsoncanon


@pytest.mark.parametrize(
    "value,expected",
    [
        (0.0, "0"),
        (-0.0, "0"),
        (62.0, "62"),
        (100.0, "100"),
        (0.3, "0.3"),
        (49.873123, "49.873123"),
        (1234.5, "1234.5"),
        (0.00001, "0.00001"),
        (0.000001, "0.000001"),
        (1.5e-7, "1.5e-7"),
        (1e20, "100000000000000000000"),
        (1e21, "1e+21"),
        (-2.5, "-2.5"),
        (5e-324, "5e-324"),
        (7, "7"),
        (-12, "-12"),
    ],
)
def test_number_formatting(value, expected):
    assert jsoncanon.format_number(value) == expected


def test_rejects_non_finite():
    with pytest.raises(ValueError):
        jsoncanon.format_number(math.nan)
    with pytest.raises(ValueError):
        jsoncanon.format_number(math.inf)


def test_sorted_keys_and_compact():
    text = jsoncanon.dumps({"b": 1, "a": {"z": True, "y": None}, "c": [1.5, "x"]})
    assert text == '{"a":{"y":null,"z":true},"b":1,"c":[1.5,"x"]}'


def test_digest_stable():
    a = jsoncanon.digest({"x": 1, "y": [1, 2]})
    b = jsoncanon.digest({"y": [1, 2], "x": 1})
    assert a == b


@given(st.floats(allow_nan=False, allow_infinity=False))
@settings(max_examples=300, deadline=None)
def test_number_round_trips(value):
    text = jsoncanon.format_number(value)
    assert float(json.loads(text)) == value


def _node_echo(values):
    script = "const v = JSON.parse(process.argv[1]); process.stdout.write(v.map(String).join('\\n'));"
    out = subprocess.run(
        ["node", "-e", script, json.dumps(values)], capture_output=True, text=True, check=True
    )
    return out.stdout.split("\n")


def test_number_formatting_matches_node():
    values = [
        0.0, 62.0, 0.3, 49.873123, 1234.5, 0.00001, 0.000001, 1.5e-7, 1e20, 1e21,
        -2.5, 123456.789, 0.010511, 3.141592653589793, 2.2250738585072014e-308,
    ]
    node_forms = _node_echo(values)
    py_forms = [jsoncanon.format_number(v) for v in values]
    assert py_forms == node_forms
