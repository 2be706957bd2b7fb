import math

import numpy as np
import pytest

from wsladder.bloch import band_structure, bloch_bands, gxmg_path
from wsladder.errors import InvalidArgument
from wsladder.geometry import BridgeSpec, PlateSpec, layout_phononic_cell, layout_single

UM = 1e-6
H = 0.0625 * UM


@pytest.fixture(scope="module")
def cell():
    return layout_phononic_cell(1.7 * UM, BridgeSpec("AA", 0.7 * UM, 0.125 * UM))


@pytest.fixture(scope="module")
def bands(cell):
    return band_structure(cell, H, n_points=13, n_bands=6)


def test_path_is_uniform():
    a = 2.4 * UM
    s, k, labels = gxmg_path(a, 31)
    assert labels["X"] == pytest.approx(math.pi / a)
    assert labels["G'"] == pytest.approx(math.pi / a * (2 + math.sqrt(2)))
    assert np.allclose(np.diff(s), s[1] - s[0], rtol=1e-12)
    step = np.linalg.norm(np.diff(k, axis=0), axis=1)
    ds = s[1] - s[0]
    # chords that cut a corner are shorter than the arc; all others match it
    assert np.all(step <= ds * (1 + 1e-9))
    assert np.sum(np.isclose(step, ds, rtol=1e-9)) >= step.size - 2
    assert np.allclose(k[0], 0) and np.allclose(k[-1], 0)


def test_gamma_acoustic(bands):
    f0 = bands.frequencies[0]
    assert np.all(np.abs(f0[:2]) < 1e-6 * bands.scale)
    assert f0[2] > 1e-2 * bands.scale
    assert np.allclose(bands.frequencies[0], bands.frequencies[-1], rtol=1e-6, atol=1e-6 * bands.scale)


def test_continuity(bands):
    jump = np.abs(np.diff(bands.frequencies, axis=0)).max()
    # 13 points: each step spans about four of the 1/50 path steps
    assert jump < 4 * 0.05 * bands.scale


def test_ascending_and_rows(bands):
    assert np.all(np.diff(bands.frequencies, axis=1) >= -1e-6 * bands.scale)
    rows = list(bands.rows())
    assert len(rows) == 13 * 6


def test_stop_band_reporting(bands):
    for b, top, bottom in bands.stop_bands():
        assert bottom > top
        assert bands.frequencies[:, b].max() == top and bands.frequencies[:, b + 1].min() == bottom


def test_rejects(cell):
    a = cell.cell.dx
    with pytest.raises(InvalidArgument, match="zone"):
        bloch_bands(cell, H, [[1.5 * math.pi / a, 0.0]], n_bands=2)
    with pytest.raises(InvalidArgument, match="cell"):
        bloch_bands(layout_single(PlateSpec(2 * UM, UM)), H, [[0.0, 0.0]])
