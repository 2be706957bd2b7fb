import pytest

from wsladder.fem import assemble, find_fundamental_compression, modal
from wsladder.geometry import DIAMOND, PlateSpec, layout_single
from wsladder.mesh import mesh

UM = 1e-6


@pytest.fixture(scope="session")
def plate_case():
    """Production-resolution single plate: (layout, system, candidate modes, fundamental)."""
    lay = layout_single(PlateSpec(4.25 * UM, 1.5 * UM))
    sys = assemble(mesh(lay, 0.05 * UM), DIAMOND)
    modes = modal(sys, 2e9, 6)
    fund = find_fundamental_compression(modes, lay.plates[0])
    return lay, sys, modes, fund
