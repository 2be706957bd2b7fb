"""In-plane Bloch band structure of a square-lattice phononic cell."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .eigen import shift_invert_lanczos
from .errors import InvalidArgument, NumericalFailure
from .fem import TWO_PI, assemble
from .geometry import NetworkLayout
from .mesh import mesh as build_mesh


@dataclass
class BandTable:
    path_coord: np.ndarray      # (n_k,) arc length along the k path, 1/m
    k_points: np.ndarray        # (n_k, 2)
    frequencies: np.ndarray     # (n_k, n_bands) Hz, ascending per k
    labels: dict                # high-symmetry point name -> path coordinate

    @property
    def scale(self) -> float:
        return float(np.abs(self.frequencies).max())

    def stop_bands(self) -> list[tuple[int, float, float]]:
        """Complete in-plane gaps ``(lower band, top of lower band, bottom of upper band)``."""
        out = []
        f = self.frequencies
        for b in range(f.shape[1] - 1):
            top, bottom = f[:, b].max(), f[:, b + 1].min()
            if bottom > top:
                out.append((b, float(top), float(bottom)))
        return out

    def rows(self):
        for i, s in enumerate(self.path_coord):
            for b in range(self.frequencies.shape[1]):
                yield (float(s), float(self.k_points[i, 0]), float(self.k_points[i, 1]), b,
                       float(self.frequencies[i, b]))


def gxmg_path(period: float, n_points: int = 50):
    """Points along Gamma-X-M-Gamma, spaced uniformly in arc length."""
    g = math.pi / period
    corners = np.array([[0.0, 0.0], [g, 0.0], [g, g], [0.0, 0.0]])
    seg = np.linalg.norm(np.diff(corners, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    s = np.linspace(0.0, cum[-1], n_points)
    k = np.empty((n_points, 2))
    for i, si in enumerate(s):
        j = min(np.searchsorted(cum, si, side="right") - 1, 2)
        t = (si - cum[j]) / seg[j]
        k[i] = corners[j] + t * (corners[j + 1] - corners[j])
    labels = {"G": 0.0, "X": cum[1], "M": cum[2], "G'": cum[3]}
    return s, k, labels


def _periodic_map(nodes, cell, tol):
    """Index of the master node for each node and its lattice offset (0/1 in x and y)."""
    x0, y0, x1, y1 = cell.x0, cell.y0, cell.x1, cell.y1
    key = {}
    for i, (x, y) in enumerate(nodes):
        key[(round((x - x0) / tol), round((y - y0) / tol))] = i
    n = nodes.shape[0]
    master = np.arange(n)
    shift = np.zeros((n, 2), dtype=np.int64)
    ax, ay = x1 - x0, y1 - y0
    for i, (x, y) in enumerate(nodes):
        sx = 1 if abs(x - x1) <= tol else 0
        sy = 1 if abs(y - y1) <= tol else 0
        if sx or sy:
            kx = round((x - sx * ax - x0) / tol)
            ky = round((y - sy * ay - y0) / tol)
            j = key.get((kx, ky))
            if j is None:
                raise InvalidArgument(f"boundary node {i} has no periodic partner")
            master[i] = j
            shift[i] = (sx, sy)
    return master, shift


def bloch_bands(cell: NetworkLayout, h: float, k_path, n_bands: int = 8,
                path_coord=None, labels=None, sigma_freq: float | None = None) -> BandTable:
    """Lowest ``n_bands`` in-plane frequencies at each wave vector.

    Bloch conditions ``u(x + a) = exp(i k.a) u(x)`` are imposed by
    eliminating the nodes on the upper-x and upper-y cell faces.  The reduced
    Hermitian pencil is solved in its real-doubled form, in which every
    eigenvalue appears twice; the pairs are collapsed back to single bands.
    """
    if cell.cell is None:
        raise InvalidArgument("layout has no periodic cell")
    c = cell.cell
    a = c.dx
    if abs(c.dy - a) > 1e-9 * a:
        raise InvalidArgument("square-lattice cell expected")
    k_path = np.atleast_2d(np.asarray(k_path, dtype=float))
    lim = math.pi / a * (1 + 1e-9)
    if np.any(np.abs(k_path) > lim):
        raise InvalidArgument("wave vector outside the first Brillouin zone")
    m = build_mesh(cell, h)
    sysm = assemble(m, cell.material)
    tol = 1e-9 * a
    master, shift = _periodic_map(m.nodes, c, tol)
    keep = np.flatnonzero(master == np.arange(m.n_nodes))
    red_of = np.full(m.n_nodes, -1)
    red_of[keep] = np.arange(keep.size)
    nr = 2 * keep.size
    nf = 2 * m.n_nodes
    rows = np.arange(nf)
    node = rows // 2
    cols = 2 * red_of[master[node]] + rows % 2
    K, M = sysm.stiffness, sysm.mass
    if sigma_freq is None:
        sigma_freq = 1e-3 * cell.material.rod_frequency(a)
    sigma = -(TWO_PI * sigma_freq) ** 2

    freqs = np.empty((k_path.shape[0], n_bands))
    for ik, (kx, ky) in enumerate(k_path):
        phase = np.exp(1j * (kx * a * shift[node, 0] + ky * a * shift[node, 1]))
        T = sp.csr_matrix((phase, (rows, cols)), shape=(nf, nr))
        Kc = (T.conj().T @ K @ T).tocsr()
        Mc = (T.conj().T @ M @ T).tocsr()
        Kd = sp.bmat([[Kc.real, -Kc.imag], [Kc.imag, Kc.real]], format="csr")
        Md = sp.bmat([[Mc.real, -Mc.imag], [Mc.imag, Mc.real]], format="csr")
        Kd = 0.5 * (Kd + Kd.T)
        Md = 0.5 * (Md + Md.T)
        res = shift_invert_lanczos(Kd, Md, sigma, 2 * n_bands)
        lam = np.sort(res.eigenvalues)
        pairs = lam.reshape(n_bands, 2)
        spread = np.abs(pairs[:, 1] - pairs[:, 0])
        scale = max(abs(lam).max(), abs(sigma))
        if np.any(spread > 1e-6 * scale):
            raise NumericalFailure("doubled eigenvalues did not pair up",
                                   {"k": (kx, ky), "spread": spread.tolist()})
        lam1 = pairs.mean(axis=1)
        freqs[ik] = np.sign(lam1) * np.sqrt(np.abs(lam1)) / TWO_PI
    if path_coord is None:
        path_coord = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(k_path, axis=0), axis=1))])
    return BandTable(np.asarray(path_coord), k_path, freqs, labels or {})


def band_structure(cell: NetworkLayout, h: float, n_points: int = 50, n_bands: int = 8) -> BandTable:
    a = cell.cell.dx
    s, k, labels = gxmg_path(a, n_points)
    return bloch_bands(cell, h, k, n_bands, path_coord=s, labels=labels)
