import numpy as np
import pytest

from wsladder.errors import InvalidArgument, InvalidMesh
from wsladder.geometry import BridgeSpec, PlateSpec, layout_chain, layout_pair, layout_single
from wsladder.mesh import mesh

UM = 1e-6
P = PlateSpec(4.25 * UM, 1.5 * UM)
H = 0.05 * UM


def test_single_plate_counts():
    m = mesh(layout_single(P), H)
    assert m.n_elements == 85 * 30
    assert m.n_nodes == 86 * 31 == 2666


@pytest.mark.parametrize("scheme", ["NN", "AA", "AN"])
def test_pair_area_and_tags(scheme):
    B = P.at(0, 0, orientation="vertical") if scheme == "AN" else P
    br = BridgeSpec(scheme, 0.8 * UM, 0.2 * UM, 0.15 if scheme == "NN" else None)
    lay = layout_pair(scheme, P, B, br)
    m = mesh(lay, H)
    assert abs(m.area - lay.area) <= 1e-12 * lay.area
    assert set(m.region_names) == set(lay.region_names)
    for name in lay.region_names:
        assert m.region_elements(name).size > 0
    assert m.is_connected()


def test_mesh_invariants():
    lay = layout_chain(3, "AN", [P.length] * 3, [P.width] * 3, BridgeSpec("AN", 0.8 * UM, 0.2 * UM))
    m = mesh(lay, H)
    assert m.max_aspect_ratio() <= 4
    # unique nodes
    q = np.round(m.nodes / (1e-12 * H)).astype(np.int64)
    assert len({tuple(r) for r in q}) == m.n_nodes
    # counter-clockwise with positive area
    xy = m.nodes[m.elements]
    assert np.all(xy[:, 1, 0] > xy[:, 0, 0]) and np.all(xy[:, 3, 1] > xy[:, 0, 1])
    # conforming: every interior edge shared by exactly two elements
    from collections import Counter
    edges = Counter()
    for e in m.elements:
        for a, b in zip(e, np.roll(e, -1)):
            edges[(min(a, b), max(a, b))] += 1
    assert max(edges.values()) <= 2
    # (y, x) lexicographic node order
    key = m.nodes[:, 1] * 1e9 + m.nodes[:, 0]
    assert np.all(np.diff(np.lexsort((m.nodes[:, 0], m.nodes[:, 1]))) == 1)
    assert key.size == m.n_nodes


def test_refinement_quadruples_elements():
    a = mesh(layout_single(P), 0.25 * UM)
    b = mesh(layout_single(P), 0.125 * UM)
    assert b.n_elements == 4 * a.n_elements


def test_deterministic():
    lay = layout_pair("NN", P, P, BridgeSpec("NN", UM, 0.1 * UM, 0.25))
    a, b = mesh(lay, H), mesh(lay, H)
    assert np.array_equal(a.nodes, b.nodes) and np.array_equal(a.elements, b.elements)


def test_too_coarse_names_feature():
    lay = layout_pair("NN", P, P, BridgeSpec("NN", UM, 0.1 * UM, 0.25))
    with pytest.raises(InvalidArgument, match="bridge"):
        mesh(lay, 0.06 * UM)


def test_bad_h():
    with pytest.raises(InvalidArgument):
        mesh(layout_single(P), -1.0)


def test_aspect_limit_enforced():
    lay = layout_chain(2, "NN", [4.25 * UM, 4.26 * UM], [1.5 * UM] * 2, BridgeSpec("NN", UM, 0.1 * UM, 0.25))
    with pytest.raises(InvalidMesh):
        mesh(lay, H)
    assert mesh(lay, H, max_aspect=None).n_elements > 0


def test_csv_exports():
    m = mesh(layout_single(P), 0.5 * UM)
    nodes = m.nodes_csv().splitlines()
    els = m.elements_csv().splitlines()
    assert nodes[0] == "node,x_m,y_m" and len(nodes) == m.n_nodes + 1
    assert els[0].startswith("element,") and len(els) == m.n_elements + 1
    assert float(nodes[-1].split(",")[1]) == m.nodes[-1, 0]
