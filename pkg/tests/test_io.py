import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wsladder.geometry import PlateSpec, layout_single
from wsladder.io import (DEFAULTS, ConfigError, ResultTable, config_hash, load_config, material_from_config,
                         read_csv, svg_heatmap, svg_matrix, verify_provenance)
from wsladder.mesh import mesh

UM = 1e-6


def write(tmp_path, text):
    p = tmp_path / "run.toml"
    p.write_text(text)
    return p


def test_defaults_load():
    cfg = load_config()
    assert cfg == DEFAULTS
    assert material_from_config(cfg).youngs_modulus == 1050e9


def test_file_and_overrides(tmp_path):
    p = write(tmp_path, "seed = 3\n[geometry]\nlength_um = 5.0\n")
    cfg = load_config(p, {"geometry": {"width_um": 1.2}})
    assert cfg["seed"] == 3 and cfg["geometry"]["length_um"] == 5.0 and cfg["geometry"]["width_um"] == 1.2
    assert cfg["geometry"]["scheme"] == "nn"


@pytest.mark.parametrize("text,match", [
    ("[geometry]\nlenght_um = 5.0\n", "lenght_um"),
    ("[geomtry]\nlength_um = 5.0\n", "geomtry"),
    ("[geometry]\nlength_um = 'five'\n", "length_um"),
    ("[material]\npoisson = 0.5\n", "poisson"),
    ("[geometry]\nwidth_um = -1.0\n", "width_um"),
    ("[geometry]\nscheme = 'xy'\n", "scheme"),
    ("[disorder]\nsigma_nm = [-1.0]\n", "sigma_nm"),
    ("[geometry\n", "malformed"),
])
def test_strict_validation(tmp_path, text, match):
    with pytest.raises(ConfigError, match=match):
        load_config(write(tmp_path, text))


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/run.toml")


def test_hash_is_order_independent():
    a = {"x": 1, "y": [1.0, 2.0]}
    b = {"y": [1.0, 2.0], "x": 1}
    assert config_hash(a) == config_hash(b)
    assert len(config_hash(a)) == 64


finite = st.floats(allow_nan=False, allow_infinity=False)


@given(st.lists(st.tuples(st.integers(-10**6, 10**6), finite, st.booleans()), max_size=20))
@settings(max_examples=50, deadline=None)
def test_csv_roundtrip(rows):
    t = ResultTable([("k", "1"), ("f", "Hz"), ("ok", "1")], config=load_config(), notes=["demo"])
    for r in rows:
        t.add(*r)
    text = t.to_csv()
    back = read_csv(text)
    assert back.columns == t.columns
    assert back.rows == [tuple(r) for r in rows]
    assert back.config == t.config and back.notes == ["demo"]
    assert verify_provenance(text)


def test_provenance_detects_tampering():
    t = ResultTable([("f", "Hz")], config=load_config())
    t.add(1.0)
    text = t.to_csv()
    assert "timestamp" not in text
    assert not verify_provenance(text.replace('"seed":0', '"seed":1'))
    assert not verify_provenance("f [Hz]\n1.0\n")


def test_float_format_is_shortest_roundtrip():
    t = ResultTable([("x", "1")])
    t.add(0.8)
    t.add(np.float64(1 / 3))
    lines = t.to_csv().splitlines()
    assert lines[-2] == "0.8" and float(lines[-1]) == 1 / 3


def test_table_contract():
    with pytest.raises(Exception):
        ResultTable([("x", "")])
    t = ResultTable([("x", "m"), ("y", "m")])
    with pytest.raises(Exception):
        t.add(1.0)


def test_svg_headers():
    m = mesh(layout_single(PlateSpec(2 * UM, UM)), 0.5 * UM)
    vals = np.linspace(-1, 2, m.n_elements)
    svg = svg_heatmap(m, vals)
    assert svg.startswith("<!-- dV/V min=-1 max=2 colormap=diverging -->")
    assert svg.count("<rect") == m.n_elements
    svg2 = svg_heatmap(m, vals, signed=False)
    assert "min=0" in svg2.splitlines()[0] and "sequential" in svg2
    mat = svg_matrix(np.array([[0.0, 0.5], [1.0, 0.25]]))
    assert "max=1 " in mat.splitlines()[0] and mat.count("<rect") == 4
    with pytest.raises(Exception):
        svg_heatmap(m, vals[:-1])
