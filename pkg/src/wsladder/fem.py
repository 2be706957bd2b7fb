"""Plane-stress finite-element modal analysis on Q4 meshes.

Two degrees of freedom per node, ordered ``(ux, uy)``; node ``i`` owns dofs
``2i`` and ``2i + 1``.  Thickness multiplies both stiffness and mass, so it
drops out of every frequency.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .eigen import shift_invert_lanczos, sparse_factor
from .errors import FactorizationFailure, InvalidArgument, InvalidMesh, ModeNotFound, NumericalFailure
from .geometry import DIAMOND, Material, NetworkLayout, PlateSpec
from .localization import SiteProfile
from .mesh import Mesh, mesh as build_mesh

TWO_PI = 2.0 * math.pi
_G = 1.0 / math.sqrt(3.0)
_GAUSS = np.array([[-_G, -_G], [_G, -_G], [_G, _G], [-_G, _G]])
_CORNERS = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])


def _shape(xi, eta):
    return 0.25 * np.array([(1 - xi) * (1 - eta), (1 + xi) * (1 - eta),
                            (1 + xi) * (1 + eta), (1 - xi) * (1 + eta)])


def _dshape(xi, eta):
    """Derivatives of the four shape functions, rows d/dxi and d/deta."""
    return 0.25 * np.array([[-(1 - eta), (1 - eta), (1 + eta), -(1 + eta)],
                            [-(1 - xi), -(1 + xi), (1 + xi), (1 - xi)]])


def plane_stress_matrix(mat: Material) -> np.ndarray:
    E, nu = mat.youngs_modulus, mat.poisson
    c = E / (1.0 - nu * nu)
    return c * np.array([[1.0, nu, 0.0], [nu, 1.0, 0.0], [0.0, 0.0, 0.5 * (1.0 - nu)]])


def _grad(xy, xi, eta):
    """Physical shape-function gradients (E, 2, 4) and Jacobian determinants at one point."""
    dN = _dshape(xi, eta)
    J = np.einsum("ak,ekb->eab", dN, xy)
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    inv = np.empty_like(J)
    inv[:, 0, 0] = J[:, 1, 1] / det
    inv[:, 1, 1] = J[:, 0, 0] / det
    inv[:, 0, 1] = -J[:, 0, 1] / det
    inv[:, 1, 0] = -J[:, 1, 0] / det
    return np.einsum("eab,bk->eak", inv, dN), det


def _bmatrix(G):
    E = G.shape[0]
    B = np.zeros((E, 3, 8))
    B[:, 0, 0::2] = G[:, 0]
    B[:, 1, 1::2] = G[:, 1]
    B[:, 2, 0::2] = G[:, 1]
    B[:, 2, 1::2] = G[:, 0]
    return B


@dataclass(frozen=True, eq=False)
class FemSystem:
    stiffness: sp.csr_matrix
    mass: sp.csr_matrix
    mesh: Mesh
    material: Material

    @property
    def n_dof(self) -> int:
        return self.stiffness.shape[0]

    @staticmethod
    def dofs(node: int) -> tuple[int, int]:
        return 2 * node, 2 * node + 1

    def total_mass(self) -> float:
        """Mass seen by a rigid x-translation, ``1^T M 1`` over the ux dofs."""
        ex = np.zeros(self.n_dof)
        ex[0::2] = 1.0
        return float(ex @ (self.mass @ ex))


def element_matrices(xy: np.ndarray, mat: Material):
    """Stiffness and consistent mass (E, 8, 8) for quads with corner coordinates ``xy`` (E, 4, 2)."""
    D = plane_stress_matrix(mat)
    t, rho = mat.thickness, mat.density
    E = xy.shape[0]
    Ke = np.zeros((E, 8, 8))
    Me = np.zeros((E, 8, 8))
    for xi, eta in _GAUSS:
        G, det = _grad(xy, xi, eta)
        B = _bmatrix(G)
        Ke += np.einsum("eia,ij,ejb->eab", B, D, B) * (t * det)[:, None, None]
        N = _shape(xi, eta)
        NN = np.outer(N, N)
        Me[:, 0::2, 0::2] += NN[None] * (rho * t * det)[:, None, None]
        Me[:, 1::2, 1::2] += NN[None] * (rho * t * det)[:, None, None]
    return Ke, Me


def assemble(mesh: Mesh, mat: Material = DIAMOND) -> FemSystem:
    xy = mesh.nodes[mesh.elements]
    for xi, eta in _CORNERS:
        _, det = _grad(xy, xi, eta)
        bad = np.flatnonzero(~(det > 0))
        if bad.size:
            raise InvalidMesh(f"element {int(bad[0])} has a non-positive Jacobian")
    Ke, Me = element_matrices(xy, mat)
    dof = np.empty((mesh.n_elements, 8), dtype=np.int64)
    dof[:, 0::2] = 2 * mesh.elements
    dof[:, 1::2] = 2 * mesh.elements + 1
    rows = np.repeat(dof, 8, axis=1).ravel()
    cols = np.tile(dof, (1, 8)).ravel()
    n = 2 * mesh.n_nodes
    K = sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    M = sp.coo_matrix((Me.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    K = 0.5 * (K + K.T)
    M = 0.5 * (M + M.T)
    return FemSystem(K.tocsr(), M.tocsr(), mesh, mat)


@dataclass(eq=False)
class ModeShape:
    frequency: float
    displacement: np.ndarray     # (n_nodes, 2)
    eigenvalue: float            # omega^2
    residual: float
    mesh: Mesh | None = None
    mass_normalized: bool = True

    @property
    def vector(self) -> np.ndarray:
        return self.displacement.ravel()


def _freq(lam: float) -> float:
    return math.copysign(math.sqrt(abs(lam)), lam) / TWO_PI


def modal(sys: FemSystem, target_freq: float, n_modes: int = 6, keep_rigid: bool = False,
          tol: float = 1e-8, max_iter: int = 300, retries: int = 3) -> list[ModeShape]:
    """The ``n_modes`` eigenpairs nearest ``target_freq`` (Hz), sorted by distance to it.

    Modes below ``1e-6 * target_freq`` are treated as rigid-body modes and
    dropped unless ``keep_rigid`` is set.
    """
    if not (target_freq > 0):
        raise InvalidArgument(f"target frequency must be positive, got {target_freq}")
    sigma = (TWO_PI * target_freq) ** 2
    extra = 0 if keep_rigid else 3
    want = min(n_modes + extra, sys.n_dof)
    fac = None
    for attempt in range(retries + 1):
        try:
            fac = sparse_factor(sys.stiffness, sigma, sys.mass)
            break
        except FactorizationFailure:
            sigma *= 1.0 + 1e-3
    if fac is None:
        raise NumericalFailure(f"could not factor the pencil near {target_freq:.6g} Hz",
                               {"sigma": sigma, "retries": retries})
    res = shift_invert_lanczos(sys.stiffness, sys.mass, sigma, want, tol=tol,
                               max_iter=max_iter, factorization=fac)
    modes = []
    for lam, u, r in zip(res.eigenvalues, res.eigenvectors.T, res.residuals):
        f = _freq(lam)
        if not keep_rigid and abs(f) < 1e-6 * target_freq:
            continue
        modes.append(ModeShape(f, u.reshape(-1, 2).copy(), float(lam), float(r), sys.mesh))
    modes.sort(key=lambda m: abs(m.frequency - target_freq))
    return modes[:n_modes]


# --- compression-mode template ---------------------------------------------

def _nodal_weights(mesh: Mesh, elems: np.ndarray) -> np.ndarray:
    w = np.zeros(mesh.n_nodes)
    np.add.at(w, mesh.elements[elems].ravel(), np.repeat(mesh.element_areas()[elems] / 4, 4))
    return w


@dataclass(frozen=True, eq=False)
class _Template:
    nodes: np.ndarray
    weights: np.ndarray
    axis: int
    shape: np.ndarray     # unit-weighted-norm template values along the long axis


def plate_template(mesh: Mesh, plate_index: int, plate: PlateSpec) -> _Template:
    """Half-wave extension pattern of one plate: axial displacement ``sin(pi (s - s_mid) / L)``."""
    elems = mesh.plate_elements(plate_index)
    w_all = _nodal_weights(mesh, elems)
    nodes = np.flatnonzero(w_all > 0)
    w = w_all[nodes]
    ax = plate.axis
    s = mesh.nodes[nodes, ax]
    s_mid = plate.center[ax]
    T = np.sin(math.pi * (s - s_mid) / plate.length)
    T /= math.sqrt(float(np.sum(w * T * T)))
    return _Template(nodes, w, ax, T)


def template_coefficient(u: np.ndarray, tpl: _Template) -> tuple[float, float]:
    """Signed overlap with the template and the weighted norm of ``u`` on the plate."""
    uu = u[tpl.nodes]
    c = float(np.sum(tpl.weights * uu[:, tpl.axis] * tpl.shape))
    nrm = math.sqrt(float(np.sum(tpl.weights * (uu * uu).sum(axis=1))))
    return c, nrm


def compression_score(mode: ModeShape, plate: PlateSpec, plate_index: int = 0) -> float:
    c, nrm = template_coefficient(mode.displacement, plate_template(mode.mesh, plate_index, plate))
    return abs(c) / nrm if nrm > 0 else 0.0


def find_fundamental_compression(modes: list[ModeShape], plate: PlateSpec,
                                 plate_index: int = 0, threshold: float = 0.5) -> ModeShape:
    if not modes:
        raise ModeNotFound("no candidate modes")
    scores = [compression_score(m, plate, plate_index) for m in modes]
    k = int(np.argmax(scores))
    if scores[k] <= threshold:
        raise ModeNotFound(f"best compression-template score {scores[k]:.3f} <= {threshold}")
    return modes[k]


# --- strain ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StrainField:
    values: np.ndarray     # per element volumetric strain at the element center
    mesh: Mesh

    @property
    def peak(self) -> float:
        return float(np.abs(self.values).max(initial=0.0))


def strain_field(sys: FemSystem, mode: ModeShape) -> StrainField:
    """Volumetric strain ``(exx + eyy) (1 - 2 nu) / (1 - nu)`` at each element center."""
    m = sys.mesh
    xy = m.nodes[m.elements]
    G, _ = _grad(xy, 0.0, 0.0)
    u = mode.displacement[m.elements]       # (E, 4, 2)
    exx = np.einsum("ek,ek->e", G[:, 0], u[:, :, 0])
    eyy = np.einsum("ek,ek->e", G[:, 1], u[:, :, 1])
    nu = sys.material.poisson
    return StrainField((exx + eyy) * (1.0 - 2.0 * nu) / (1.0 - nu), m)


def node_window_profile(strain: StrainField, layout: NetworkLayout, window: float = 0.2,
                        mode_freq: float = float("nan"), measure: str = "max") -> SiteProfile:
    """Per-plate node-region strain over the central ``window`` of each plate's length.

    ``measure="max"`` takes the largest element ``|dV/V|``.  ``"section"``
    first averages ``dV/V`` across the plate width in each axial slice and
    then takes the largest slice magnitude; it stays finite under refinement
    where a bridge meets a plate edge inside the window.
    """
    if measure not in ("max", "section"):
        raise InvalidArgument(f"unknown strain measure {measure!r}")
    m = strain.mesh
    centers = m.element_centers()
    areas = m.element_areas()
    vals = np.zeros(len(layout.plates))
    for i, p in enumerate(layout.plates):
        el = m.plate_elements(i)
        ax = p.axis
        s = centers[el, ax] - p.center[ax]
        inside = np.abs(s) <= 0.5 * window * p.length + 1e-12 * p.length
        sel = el[inside]
        if sel.size == 0:
            sel = el[np.argsort(np.abs(s))[:1]]
        if measure == "max":
            vals[i] = np.abs(strain.values[sel]).max()
            continue
        key = np.round(centers[sel, ax] / (1e-6 * p.width)).astype(np.int64)
        best = 0.0
        for k in np.unique(key):
            e = sel[key == k]
            avg = float(np.sum(strain.values[e] * areas[e]) / np.sum(areas[e]))
            best = max(best, abs(avg))
        vals[i] = best
    if not np.any(vals > 0):
        vals[:] = np.finfo(float).tiny
    return SiteProfile(vals, mode_freq)


# --- coupled structures --------------------------------------------------------

@dataclass
class ChainModes:
    modes: list[ModeShape]
    profiles: list[SiteProfile]
    scores: np.ndarray             # compression score of each mode over all plates
    coefficients: np.ndarray       # (n_modes, n_plates) signed template overlaps
    system: FemSystem
    layout: NetworkLayout
    strains: list[StrainField] = field(default_factory=list)

    def compression_modes(self, threshold: float = 0.5) -> list[int]:
        return [k for k, s in enumerate(self.scores) if s > threshold]


def _chain_analysis(sys: FemSystem, layout: NetworkLayout, modes: list[ModeShape], window: float,
                    measure: str = "max"):
    tpls = [plate_template(sys.mesh, i, p) for i, p in enumerate(layout.plates)]
    plate_nodes = np.unique(np.concatenate([t.nodes for t in tpls]))
    w_all = np.zeros(sys.mesh.n_nodes)
    for t in tpls:
        w_all[t.nodes] += t.weights
    coeffs = np.zeros((len(modes), len(tpls)))
    scores = np.zeros(len(modes))
    profiles, strains = [], []
    for k, m in enumerate(modes):
        u = m.displacement
        for i, t in enumerate(tpls):
            coeffs[k, i] = template_coefficient(u, t)[0]
        nrm = math.sqrt(float(np.sum(w_all[plate_nodes] * (u[plate_nodes] ** 2).sum(axis=1))))
        scores[k] = math.sqrt(float(np.sum(coeffs[k] ** 2))) / nrm if nrm > 0 else 0.0
        sf = strain_field(sys, m)
        strains.append(sf)
        profiles.append(node_window_profile(sf, layout, window, m.frequency, measure))
    return coeffs, scores, profiles, strains


def chain_modes(layout: NetworkLayout, h: float, target: float, n_modes: int,
                window: float = 0.2, max_aspect: float | None = None,
                system: FemSystem | None = None, measure: str = "max") -> ChainModes:
    sys = system if system is not None else assemble(build_mesh(layout, h, max_aspect=max_aspect),
                                                     layout.material)
    modes = modal(sys, target, n_modes)
    modes.sort(key=lambda m: m.frequency)
    coeffs, scores, profiles, strains = _chain_analysis(sys, layout, modes, window, measure)
    return ChainModes(modes, profiles, scores, coeffs, sys, layout, strains)


@dataclass
class Splitting:
    f_sym: float
    f_anti: float
    kappa: float
    parity: tuple[str, str]            # labels of the lower and upper mode
    modes: tuple[ModeShape, ModeShape]
    scores: tuple[float, float]


def splitting(layout: NetworkLayout, h: float, target: float, n_candidates: int = 8,
              threshold: float = 0.5, max_aspect: float | None = 4.0) -> Splitting:
    """Normal-mode splitting of a two-plate layout; coupling rate is half the splitting.

    Parity comes from the signs of the two plates' extension-template
    overlaps: equal signs (both plates stretching together) is symmetric.
    """
    if len(layout.plates) != 2:
        raise InvalidArgument("splitting needs a two-plate layout")
    cm = chain_modes(layout, h, target, n_candidates, max_aspect=max_aspect)
    cand = cm.compression_modes(threshold)
    if len(cand) < 2:
        raise ModeNotFound(f"found {len(cand)} compression-like modes near {target:.6g} Hz, need 2")
    best = sorted(cand, key=lambda k: (-cm.scores[k], abs(cm.modes[k].frequency - target)))[:2]
    best.sort(key=lambda k: cm.modes[k].frequency)
    labels = []
    for k in best:
        cA, cB = cm.coefficients[k]
        labels.append("symmetric" if cA * cB > 0 else "antisymmetric")
    f_lo, f_hi = (cm.modes[k].frequency for k in best)
    if labels[0] == labels[1]:
        # both overlaps agree in sign pattern: fall back to the relative weight ordering
        f_sym, f_anti = f_lo, f_hi
    elif labels[0] == "symmetric":
        f_sym, f_anti = f_lo, f_hi
    else:
        f_sym, f_anti = f_hi, f_lo
    return Splitting(f_sym, f_anti, abs(f_anti - f_sym) / 2, tuple(labels),
                     tuple(cm.modes[k] for k in best), tuple(float(cm.scores[k]) for k in best))


def fundamental_frequency(plate: PlateSpec, h: float, material: Material = DIAMOND,
                          n_modes: int = 4) -> ModeShape:
    """Fundamental compression mode of a single free plate."""
    from .geometry import layout_single

    lay = layout_single(plate.at(0.0, 0.0), material)
    sys = assemble(build_mesh(lay, h), material)
    guess = material.rod_frequency(plate.length)
    modes = modal(sys, guess, n_modes)
    return find_fundamental_compression(modes, lay.plates[0])
