import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nearcol.io import csv_text, dumps, format_float, read_csv, write_csv, write_json


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_format_round_trips(x):
    assert float(format_float(x)) == x


def test_csv_layout(tmp_path):
    text = csv_text(["a", "b"], np.array([[1.0, 0.1]]))
    assert text == "# schema_version=1\na,b\n1,0.10000000000000001\n"
    p = tmp_path / "x.csv"
    write_csv(p, ["a", "b"], [[1.0, 2.0], [3.0, 4.0]])
    header, rows = read_csv(p)
    assert header == ["a", "b"] and np.array_equal(rows, [[1.0, 2.0], [3.0, 4.0]])


def test_csv_text_cells():
    text = csv_text(["tag", "x"], [["Bounded", 1.5]])
    assert text.splitlines()[-1] == "Bounded,1.5"
    with pytest.raises(ValueError):
        csv_text(["tag"], [["a,b"]])


def test_json_schema_and_nan(tmp_path):
    out = json.loads(dumps({"x": np.float64(1.5), "y": math.nan, "z": np.arange(2)}))
    assert out["schema_version"] == "1"
    assert out["x"] == 1.5 and out["z"] == [0, 1]
    assert out["y"]["error"] == "non-finite"
    p = tmp_path / "a.json"
    write_json(p, {"k": 1})
    assert p.read_text().endswith("}\n")
