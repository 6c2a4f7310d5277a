import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from salnet import io


@given(st.lists(st.tuples(st.integers(-10**6, 10**6), st.floats(allow_nan=False, allow_infinity=True)), max_size=30))
@settings(max_examples=60, deadline=None)
def test_csv_round_trip(tmp_path_factory, rows):
    path = tmp_path_factory.mktemp("csv") / "r.csv"
    io.write_csv(path, ["i", "x"], rows)
    header, back = io.read_csv(path)
    assert header == ["i", "x"]
    assert [tuple(r) for r in back] == [(i, float(x)) for i, x in rows]


def test_csv_nan_and_flags(tmp_path):
    path = io.write_csv(tmp_path / "a.csv", ["a", "b", "c"], [[math.nan, True, "x"]])
    assert path.read_text() == "a,b,c\nnan,1,x\n"
    _, rows = io.read_csv(path)
    assert math.isnan(rows[0][0]) and rows[0][1:] == [1, "x"]


def test_csv_header_only_and_width_check(tmp_path):
    path = io.write_csv(tmp_path / "e.csv", ["a", "b"], [])
    assert path.read_text() == "a,b\n"
    with pytest.raises(ValueError):
        io.write_csv(tmp_path / "bad.csv", ["a", "b"], [[1]])


def test_float_format_is_shortest_repr():
    assert io.format_value(0.1) == "0.1"
    assert io.format_value(1e-300) == "1e-300"
    assert float(io.format_value(2 / 3)) == 2 / 3


def test_svg_is_deterministic(tmp_path):
    series = {"a": ([0, 1, 2], [0.0, 1.0, 0.5]), "b": ([0, 1, 2], [1.0, 0.0, 0.2])}
    a = io.write_svg(tmp_path / "a.svg", series, "t", "x", "y").read_bytes()
    b = io.write_svg(tmp_path / "b.svg", series, "t", "x", "y").read_bytes()
    assert a == b
    assert b"<svg" in a


def test_svg_kinds(tmp_path):
    io.write_svg(tmp_path / "h.svg", {"h": ([-1, 0, 1], [3, 4])}, kind="bar")
    io.write_svg(tmp_path / "s.svg", {"s": ([0, 1], [1, 0])}, kind="scatter")


def test_git_style_hash(tmp_path):
    p = tmp_path / "hello.txt"
    p.write_bytes(b"hello\n")
    assert io.file_hash(p) == "ce013625030ba8dba906f756967f9e9ca394464a"


def test_manifest_written_first_then_finished(tmp_path):
    m = io.Manifest(tmp_path, "rnn-parity", {"seed": 3}, 3, [[3, 0]])
    m.write()
    data = json.loads((tmp_path / "manifest.json").read_text())
    assert data["status"] == "running" and data["outputs"] == {}
    out = io.write_csv(tmp_path / "r.csv", ["a"], [[1]])
    m.finish([out])
    data = json.loads((tmp_path / "manifest.json").read_text())
    assert data["status"] == "ok"
    assert data["outputs"] == {"r.csv": io.file_hash(out)}
    assert data["run_seeds"] == [[3, 0]] and data["params"] == {"seed": 3}


def test_default_out_dir(monkeypatch, tmp_path):
    monkeypatch.setenv(io.OUT_ENV, str(tmp_path / "x"))
    assert io.default_out_dir() == tmp_path / "x"
    monkeypatch.delenv(io.OUT_ENV)
    assert io.default_out_dir().name == "salnet-out"
