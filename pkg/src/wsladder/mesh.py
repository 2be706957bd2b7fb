"""Conforming structured quadrilateral meshes of rectangle-union layouts."""
from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, InvalidMesh
from .geometry import NetworkLayout


@dataclass(frozen=True, eq=False)
class Mesh:
    nodes: np.ndarray          # (N, 2) coordinates, ordered by (y, x)
    elements: np.ndarray       # (E, 4) node ids, counter-clockwise from lower-left
    region: np.ndarray         # (E,) index into region_names
    region_names: tuple[str, ...]
    h: float
    layout: NetworkLayout | None = None

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    def element_sizes(self) -> tuple[np.ndarray, np.ndarray]:
        xy = self.nodes[self.elements]
        return xy[:, 2, 0] - xy[:, 0, 0], xy[:, 2, 1] - xy[:, 0, 1]

    def element_centers(self) -> np.ndarray:
        return self.nodes[self.elements].mean(axis=1)

    def element_areas(self) -> np.ndarray:
        dx, dy = self.element_sizes()
        return dx * dy

    @property
    def area(self) -> float:
        return math.fsum(self.element_areas())

    def max_aspect_ratio(self) -> float:
        dx, dy = self.element_sizes()
        return float(np.max(np.maximum(dx / dy, dy / dx)))

    def region_elements(self, name: str) -> np.ndarray:
        return np.flatnonzero(self.region == self.region_names.index(name))

    def plate_elements(self, i: int) -> np.ndarray:
        return self.region_elements(f"plate{i}")

    def plate_nodes(self, i: int) -> np.ndarray:
        return np.unique(self.elements[self.plate_elements(i)])

    def is_connected(self) -> bool:
        import scipy.sparse as sp
        from scipy.sparse.csgraph import connected_components

        e = self.elements
        rows = np.repeat(e[:, 0], 3)
        cols = e[:, 1:].ravel()
        g = sp.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(self.n_nodes,) * 2)
        n, _ = connected_components(g, directed=False)
        return n == 1

    def nodes_csv(self) -> str:
        buf = io.StringIO()
        buf.write("node,x_m,y_m\n")
        for i, (x, y) in enumerate(self.nodes):
            buf.write(f"{i},{x:.17g},{y:.17g}\n")
        return buf.getvalue()

    def elements_csv(self) -> str:
        buf = io.StringIO()
        buf.write("element,n0,n1,n2,n3,region\n")
        for k, (e, r) in enumerate(zip(self.elements, self.region)):
            buf.write(f"{k},{e[0]},{e[1]},{e[2]},{e[3]},{self.region_names[r]}\n")
        return buf.getvalue()


def _cuts(edges, h, span):
    tol = 1e-12 * span
    vals = np.unique(np.asarray(edges, dtype=float))
    merged = [vals[0]]
    for v in vals[1:]:
        if v - merged[-1] > tol:
            merged.append(v)
    pts = [merged[0]]
    for a, b in zip(merged[:-1], merged[1:]):
        k = max(1, math.ceil((b - a) / h * (1 - 1e-9)))
        pts.extend(a + (b - a) * np.arange(1, k) / k)
        pts.append(b)
    return np.asarray(pts)


def mesh(layout: NetworkLayout, h: float, max_aspect: float | None = 4.0) -> Mesh:
    """Mesh the layout on the rectilinear grid induced by all rectangle edges.

    Every interval between consecutive edge coordinates is split into equal
    cells no larger than ``h``.  Cells whose centers fall outside the layout
    are dropped.  ``max_aspect=None`` skips the aspect-ratio check, which is
    needed for length-tuned chains whose plate ends produce thin slivers.
    """
    if not (h > 0 and math.isfinite(h)):
        raise InvalidArgument(f"mesh size must be positive, got {h}")
    feat, name = layout.min_feature()
    if h > 0.5 * feat * (1 + 1e-9):
        raise InvalidArgument(
            f"mesh size {h:.4g} m too coarse for {name} (smallest side {feat:.4g} m, need h <= {feat / 2:.4g} m)")
    rects = layout.rects
    span = layout.scale
    xs = _cuts([v for r in rects for v in (r.x0, r.x1)], h, span)
    ys = _cuts([v for r in rects for v in (r.y0, r.y1)], h, span)
    nx, ny = xs.size, ys.size
    cx = 0.5 * (xs[:-1] + xs[1:])
    cy = 0.5 * (ys[:-1] + ys[1:])
    tag = np.full((ny - 1, nx - 1), -1, dtype=np.int64)
    for k, r in enumerate(rects):
        ix = (cx > r.x0) & (cx < r.x1)
        iy = (cy > r.y0) & (cy < r.y1)
        sub = tag[np.ix_(iy, ix)]
        if np.any(sub >= 0):
            raise InvalidMesh(f"{layout.region_names[k]} overlaps another region")
        tag[np.ix_(iy, ix)] = k
    jy, jx = np.nonzero(tag >= 0)   # row-major: sorted by (y, x)
    region = tag[jy, jx]
    ll = jy * nx + jx
    conn = np.stack([ll, ll + 1, ll + nx + 1, ll + nx], axis=1)
    used = np.unique(conn)
    renum = np.full(nx * ny, -1, dtype=np.int64)
    renum[used] = np.arange(used.size)
    gx, gy = np.meshgrid(xs, ys)
    nodes = np.column_stack([gx.ravel()[used], gy.ravel()[used]])
    m = Mesh(nodes, renum[conn], region, tuple(layout.region_names), float(h), layout)
    for k, name in enumerate(layout.region_names):
        if not np.any(region == k):
            raise InvalidMesh(f"{name} received no elements")
    if max_aspect is not None:
        ar = m.max_aspect_ratio()
        if ar > max_aspect * (1 + 1e-9):
            raise InvalidMesh(f"element aspect ratio {ar:.3g} exceeds {max_aspect}; "
                              "edge coordinates are too close for this mesh size")
    return m
