"""Tight-binding normal modes of coupled resonators and the analytic Wannier-Stark ladder.

The model is linear in frequency: with site frequencies w_n and couplings
k_ij the normal modes solve ``k (u_{n-1} + u_{n+1}) + w_n u_n = e u_n`` on a
chain, or the obvious generalization on any coupling graph.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bessel import bessel_j
from .eigen import dense_sym_eig, tridiag_eig
from .errors import InvalidArgument

DEGENERACY_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class ChainModel:
    site_freqs: tuple[float, ...]
    couplings: tuple[tuple[int, int, float], ...]

    def __post_init__(self):
        w = tuple(float(v) for v in self.site_freqs)
        if not w:
            raise InvalidArgument("model needs at least one site")
        for i, v in enumerate(w):
            if not (math.isfinite(v) and v > 0):
                raise InvalidArgument(f"site {i}: frequency must be finite and positive, got {v}")
        n = len(w)
        seen = set()
        edges = []
        for e in self.couplings:
            if len(e) != 3:
                raise InvalidArgument(f"edge {e!r} must be (i, j, kappa)")
            i, j, k = int(e[0]), int(e[1]), float(e[2])
            if i == j:
                raise InvalidArgument(f"self-loop at site {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise InvalidArgument(f"edge ({i}, {j}) outside 0..{n - 1}")
            if not math.isfinite(k):
                raise InvalidArgument(f"edge ({i}, {j}): coupling must be finite")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise InvalidArgument(f"duplicate edge {key}")
            seen.add(key)
            edges.append((i, j, k))
        object.__setattr__(self, "site_freqs", w)
        object.__setattr__(self, "couplings", tuple(edges))

    @property
    def n_sites(self) -> int:
        return len(self.site_freqs)

    def matrix(self, offset: float = 0.0) -> np.ndarray:
        H = np.diag(np.asarray(self.site_freqs) - offset)
        for i, j, k in self.couplings:
            H[i, j] = H[j, i] = k
        return H

    def path_offdiag(self) -> np.ndarray | None:
        """Couplings ``k_{i,i+1}`` if the graph is the path 0-1-...-(n-1), else None."""
        n = self.n_sites
        if len(self.couplings) != n - 1:
            return None
        off = np.full(n - 1, np.nan)
        for i, j, k in self.couplings:
            a, b = min(i, j), max(i, j)
            if b != a + 1:
                return None
            off[a] = k
        return None if np.isnan(off).any() else off


@dataclass(frozen=True)
class WannierStarkParams:
    omega0: float
    step_F: float
    kappa: float

    def __post_init__(self):
        if not (math.isfinite(self.omega0) and self.omega0 > 0):
            raise InvalidArgument(f"omega0 must be positive, got {self.omega0}")
        if not (math.isfinite(self.step_F) and self.step_F > 0):
            raise InvalidArgument(f"step_F must be positive, got {self.step_F}")
        if not math.isfinite(self.kappa):
            raise InvalidArgument("kappa must be finite")

    @property
    def eta(self) -> float:
        return self.kappa / self.step_F

    @classmethod
    def from_eta(cls, omega0: float, step_F: float, eta: float) -> "WannierStarkParams":
        return cls(omega0, step_F, eta * step_F)


@dataclass(frozen=True, eq=False)
class Spectrum:
    eigenvalues: np.ndarray      # ascending, Hz
    eigenvectors: np.ndarray     # columns, unit norm, largest component positive
    residuals: np.ndarray
    degenerate: bool
    sign_convention: str = "largest-component-positive"
    method: str = "dense"
    info: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.eigenvalues.size


def _fix_signs(V: np.ndarray) -> np.ndarray:
    V = V.copy()
    for a in range(V.shape[1]):
        col = V[:, a]
        mag = np.abs(col)
        # Ladder states are mirror-symmetric in magnitude, so exact ties are common.
        idx = int(np.flatnonzero(mag >= mag.max() * (1 - 1e-8))[0])
        if col[idx] < 0:
            V[:, a] = -col
    return V


def build_graph_model(site_freqs, edges) -> ChainModel:
    return ChainModel(tuple(site_freqs), tuple(tuple(e) for e in edges))


def build_ws_chain(n_sites: int, params: WannierStarkParams) -> ChainModel:
    """Odd chain centred on site 0 with ``w_n = omega0 + n F`` and uniform nearest-neighbour kappa."""
    if n_sites < 3 or n_sites % 2 == 0:
        raise InvalidArgument(f"n_sites must be odd and >= 3, got {n_sites}")
    c = (n_sites - 1) // 2
    freqs = [params.omega0 + (i - c) * params.step_F for i in range(n_sites)]
    edges = [(i, i + 1, params.kappa) for i in range(n_sites - 1)]
    return ChainModel(tuple(freqs), tuple(edges))


def solve_modes(model: ChainModel, method: str = "auto") -> Spectrum:
    """Full spectrum; path graphs use the tridiagonal solver unless ``method='dense'``.

    The mean site frequency is subtracted before solving so that GHz-scale
    diagonals do not swamp MHz-scale couplings in the rounding.
    """
    if method not in ("auto", "dense", "tridiagonal"):
        raise InvalidArgument(f"unknown method {method!r}")
    w = np.asarray(model.site_freqs)
    shift = float(np.mean(w))
    off = model.path_offdiag() if model.n_sites > 1 else np.empty(0)
    if method == "tridiagonal" and off is None:
        raise InvalidArgument("tridiagonal method requires a path graph")
    use_tri = off is not None and method != "dense"
    if use_tri:
        res = tridiag_eig(w - shift, off)
    else:
        res = dense_sym_eig(model.matrix(shift))
    vals = res.eigenvalues + shift
    V = _fix_signs(res.eigenvectors)
    H = model.matrix(shift)
    R = np.linalg.norm(H @ V - V * res.eigenvalues, axis=0)
    gaps = np.diff(vals)
    scale = max(np.abs(vals).max(), 1.0)
    degenerate = bool(gaps.size and gaps.min() <= DEGENERACY_RTOL * scale)
    return Spectrum(vals, V, R, degenerate, method="tridiagonal" if use_tri else "dense",
                    info={"shift": shift})


def ws_ladder_frequencies(params: WannierStarkParams, alpha_range) -> list[float]:
    return [params.omega0 + a * params.step_F for a in alpha_range]


def ws_analytic_state(alpha: int, params: WannierStarkParams, site_range) -> np.ndarray:
    """Infinite-chain amplitudes ``(-1)^(n-a) J_(n-a)(2 eta)`` on the requested sites."""
    x = 2.0 * params.eta
    out = []
    for n in site_range:
        m = n - alpha
        if abs(m) > 200:
            out.append(0.0)     # far below double precision for any x in range
            continue
        out.append((-1.0) ** (m % 2) * bessel_j(m, x))
    return np.asarray(out)


@dataclass
class DeviationReport:
    per_mode: dict          # ladder index -> max |u_numeric - u_analytic|
    max_deviation: float
    margin: int


def ladder_index(n_sites: int) -> np.ndarray:
    return np.arange(n_sites) - (n_sites - 1) // 2


def compare_to_analytic(spec: Spectrum, params: WannierStarkParams,
                        interior_margin: int) -> DeviationReport:
    """Deviation of finite-chain eigenvectors from the infinite-chain ladder states.

    Ascending eigenvalue position ``a`` corresponds to ladder index ``a - c``
    with ``c`` the centre site.  Modes within ``interior_margin`` of either end
    are skipped; analytic states are sign-aligned by their inner product with
    the numerical vector.
    """
    n = spec.n
    c = (n - 1) // 2
    sites = ladder_index(n)
    alphas = [a for a in sites if abs(a) <= c - interior_margin]
    if not alphas:
        raise InvalidArgument(f"no interior modes remain for N={n}, margin={interior_margin}")
    scale = max(np.abs(spec.eigenvalues).max(), 1.0)
    per = {}
    for a in alphas:
        k = a + c
        lo = spec.eigenvalues[k - 1] if k > 0 else -np.inf
        hi = spec.eigenvalues[k + 1] if k < n - 1 else np.inf
        e = spec.eigenvalues[k]
        if min(e - lo, hi - e) <= DEGENERACY_RTOL * scale:
            raise InvalidArgument(f"mode {a} lies in a degenerate subspace; no unique basis to compare")
        u = spec.eigenvectors[:, k]
        ref = ws_analytic_state(int(a), params, sites)
        if float(u @ ref) < 0:
            ref = -ref
        per[int(a)] = float(np.max(np.abs(u - ref)))
    return DeviationReport(per, max(per.values()), interior_margin)


def translation_deviation(spec: Spectrum, interior_margin: int) -> float:
    """Max deviation between interior mode a+1 and mode a shifted by one site."""
    n = spec.n
    c = (n - 1) // 2
    worst = 0.0
    for a in range(-(c - interior_margin), c - interior_margin):
        u = spec.eigenvectors[:, a + c]
        v = spec.eigenvectors[:, a + c + 1]
        shifted = np.zeros(n)
        shifted[1:] = u[:-1]
        if float(shifted @ v) < 0:
            shifted = -shifted
        worst = max(worst, float(np.max(np.abs(v - shifted))))
    return worst
