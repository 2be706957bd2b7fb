"""Bridging the finite-element and tight-binding descriptions of a resonator chain."""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq, linear_sum_assignment

from .bessel import bessel_j
from .errors import InvalidArgument, NumericalFailure, WsLadderError
from .fem import chain_modes, fundamental_frequency, splitting
from .geometry import (DIAMOND, BridgeSpec, Material, NetworkLayout, PlateSpec,
                       layout_chain_from_plates, layout_pair)
from .localization import interior_slice
from .tb_model import build_graph_model, solve_modes

DEFAULT_H = 0.05e-6
DEFAULT_TOL = 0.1e6


def plate_frequency(length: float, width: float, h: float = DEFAULT_H,
                    material: Material = DIAMOND) -> float:
    return fundamental_frequency(PlateSpec(length, width), h, material).frequency


@dataclass
class CalibrationCurve:
    parameter: str                 # "length" or "width"
    values: np.ndarray             # m, ascending
    frequencies: np.ndarray        # Hz

    def __post_init__(self):
        d = np.diff(self.frequencies)
        if not (np.all(d < 0) or np.all(d > 0)):
            raise InvalidArgument(f"frequency is not strictly monotone in {self.parameter} over "
                                  f"[{self.values[0]:.4g}, {self.values[-1]:.4g}] m")

    @property
    def f_range(self) -> tuple[float, float]:
        return float(self.frequencies.min()), float(self.frequencies.max())

    def contains(self, f: float) -> bool:
        lo, hi = self.f_range
        return lo <= f <= hi

    def invert(self, f: float) -> float:
        """Dimension giving frequency ``f`` by monotone cubic interpolation."""
        if not self.contains(f):
            lo, hi = self.f_range
            raise InvalidArgument(f"{f:.6g} Hz outside the sampled range [{lo:.6g}, {hi:.6g}] Hz")
        order = np.argsort(self.frequencies)
        return float(PchipInterpolator(self.frequencies[order], self.values[order])(f))


def calibration_curve(parameter: str, values, fixed: float, h: float = DEFAULT_H,
                      material: Material = DIAMOND) -> CalibrationCurve:
    vals = np.sort(np.asarray(values, dtype=float))
    if parameter == "length":
        f = [plate_frequency(v, fixed, h, material) for v in vals]
    elif parameter == "width":
        f = [plate_frequency(fixed, v, h, material) for v in vals]
    else:
        raise InvalidArgument(f"parameter must be 'length' or 'width', got {parameter!r}")
    return CalibrationCurve(parameter, vals, np.asarray(f))


def _secant(fun, x0, x1, target, tol, max_iter, what):
    """Secant on ``1/f(x) - 1/target``, which is nearly linear in plate length."""
    f0, f1 = fun(x0), fun(x1)
    hist = [(x0, f0), (x1, f1)]
    for _ in range(max_iter):
        if abs(f1 - target) <= tol:
            return x1
        r0, r1 = 1 / f0 - 1 / target, 1 / f1 - 1 / target
        if r1 == r0:
            break
        x2 = x1 - r1 * (x1 - x0) / (r1 - r0)
        x0, f0 = x1, f1
        x1, f1 = x2, fun(x2)
        hist.append((x1, f1))
    if abs(f1 - target) <= tol:
        return x1
    raise NumericalFailure(f"{what} calibration did not converge",
                           {"target": target, "history": hist[-4:]})


def calibrate_length(target_f: float, width: float, h: float = DEFAULT_H, tol: float = DEFAULT_TOL,
                     material: Material = DIAMOND, initial: float | None = None,
                     max_iter: int = 30) -> float:
    """Plate length whose fundamental compression mode sits at ``target_f``.

    Starts from the rod estimate ``sqrt(E/rho) / (2 f)`` unless ``initial`` is given.
    """
    if not (target_f > 0 and math.isfinite(target_f)):
        raise InvalidArgument(f"target frequency must be positive, got {target_f}")
    L0 = initial if initial is not None else material.bar_velocity / (2 * target_f)
    if L0 <= width:
        raise InvalidArgument(f"target {target_f:.6g} Hz needs a plate shorter than its width {width:.4g} m")

    def f(L):
        if L <= width:
            raise InvalidArgument(f"calibration left the valid range (L={L:.4g} m <= W)")
        return plate_frequency(L, width, h, material)

    f0 = f(L0)
    L1 = L0 * f0 / target_f
    return _secant(f, L0, L1, target_f, tol, max_iter, "length")


def calibrate_width(target_f: float, length: float, h: float = DEFAULT_H, tol: float = DEFAULT_TOL,
                    material: Material = DIAMOND, width: float = 1.5e-6,
                    width_range: tuple[float, float] = (1.0e-6, 2.0e-6), max_iter: int = 30) -> float:
    """Plate width whose fundamental frequency is ``target_f``, inside a probed monotone range.

    A five-point probe over ``width_range`` must be strictly monotone and must
    bracket the target; the root is then refined by regula falsi (Illinois).
    """
    lo, hi = width_range
    if not (0 < lo < hi < length):
        raise InvalidArgument(f"width range must satisfy 0 < lo < hi < length, got {width_range}")
    curve = calibration_curve("width", np.linspace(lo, hi, 5), length, h, material)
    f_w = plate_frequency(length, width, h, material) if lo <= width <= hi else None
    if f_w is not None and abs(f_w - target_f) <= tol:
        return width
    if not curve.contains(target_f):
        a, b = curve.f_range
        raise InvalidArgument(f"target {target_f:.6g} Hz outside the width-tunable range "
                              f"[{a:.6g}, {b:.6g}] Hz for L={length:.4g} m")
    idx = np.searchsorted(np.sort(curve.frequencies), target_f)
    order = np.argsort(curve.frequencies)
    fa = curve.frequencies[order][max(idx - 1, 0)]
    fb = curve.frequencies[order][min(idx, 4)]
    a = curve.values[order][max(idx - 1, 0)]
    b = curve.values[order][min(idx, 4)]
    ga, gb = fa - target_f, fb - target_f
    if abs(ga) <= tol:
        return float(a)
    if abs(gb) <= tol:
        return float(b)
    side = 0
    for _ in range(max_iter):
        c = (a * gb - b * ga) / (gb - ga)
        gc = plate_frequency(length, c, h, material) - target_f
        if abs(gc) <= tol:
            return float(c)
        if gc * gb < 0:
            a, ga = b, gb
            if side == -1:
                gb *= 0.5
            side = -1
        else:
            if side == 1:
                ga *= 0.5
            side = 1
        b, gb = c, gc
    raise NumericalFailure("width calibration did not converge",
                           {"target": target_f, "bracket": (a, b), "residuals": (ga, gb)})


def extract_kappa(scheme: str, plate: PlateSpec, bridge: BridgeSpec, h: float = DEFAULT_H,
                  material: Material = DIAMOND, origin: tuple[float, float] = (0.0, 0.0),
                  target: float | None = None) -> float:
    """Coupling rate of two identical plates: half their normal-mode splitting."""
    a = plate.at(*origin, orientation="horizontal")
    b = plate.at(0.0, 0.0, orientation="vertical" if scheme.upper() == "AN" else "horizontal")
    lay = layout_pair(scheme, a, b, bridge, material)
    if target is None:
        target = material.rod_frequency(plate.length)
    return splitting(lay, h, target).kappa


def synthesize_ladder_layout(n: int, center_f: float, F: float, bridge: BridgeSpec,
                             tuning: str = "length", width: float = 1.5e-6, length: float = 4.25e-6,
                             h: float = DEFAULT_H, tol: float = DEFAULT_TOL,
                             material: Material = DIAMOND, n_jobs: int = 1) -> NetworkLayout:
    """Chain whose plate ``k`` targets ``center_f + (k - c) F`` with ``c`` the centre index.

    Length tuning keeps ``width`` fixed; width tuning keeps ``length`` fixed.
    Only NN and AA chains are supported here (identical orientations).
    """
    if n < 1:
        raise InvalidArgument(f"n must be >= 1, got {n}")
    if tuning not in ("length", "width"):
        raise InvalidArgument(f"tuning must be 'length' or 'width', got {tuning!r}")
    if bridge.scheme == "AN":
        raise InvalidArgument("ladder synthesis supports NN and AA chains")
    c = (n - 1) / 2
    targets = [center_f + (k - c) * F for k in range(n)]
    if tuning == "length":
        L_c = calibrate_length(center_f, width, h, tol, material)

        def one(k):
            if targets[k] == center_f:
                return L_c
            return calibrate_length(targets[k], width, h, tol, material,
                                    initial=L_c * center_f / targets[k])
    else:
        def one(k):
            return calibrate_width(targets[k], length, h, tol, material, width=width)

    def guarded(k):
        try:
            return one(k)
        except WsLadderError as exc:
            raise type(exc)(f"plate {k}: {exc}") from exc

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            dims = list(pool.map(guarded, range(n)))
    else:
        dims = [guarded(k) for k in range(n)]
    if tuning == "length":
        plates = [PlateSpec(L, width, tag=k) for k, L in enumerate(dims)]
    else:
        plates = [PlateSpec(length, W, tag=k) for k, W in enumerate(dims)]
    return layout_chain_from_plates(plates, bridge, material)


# --- reconciliation ------------------------------------------------------------

def ws_second_moment(eta: float) -> float:
    """``sum_m m^2 J_m(2 eta)^2`` evaluated term by term."""
    x = 2.0 * eta
    mmax = min(200, int(abs(x)) + 40)
    return math.fsum(2.0 * m * m * bessel_j(m, x) ** 2 for m in range(1, mmax + 1))


def eta_from_second_moment(var: float, eta_max: float = 20.0) -> float:
    if var <= 0:
        return 0.0
    if ws_second_moment(eta_max) < var:
        raise NumericalFailure("profile too wide for the fitted range", {"variance": var})
    return float(brentq(lambda e: ws_second_moment(e) - var, 0.0, eta_max, xtol=1e-12))


def profile_variance(s: np.ndarray) -> float:
    p = np.asarray(s, dtype=float) ** 2
    p = p / p.sum()
    n = np.arange(p.size)
    mu = float(np.sum(p * n))
    return float(np.sum(p * (n - mu) ** 2))


@dataclass
class ModeMatch:
    fem_freq: float
    tb_freq: float
    freq_error: float
    overlap: float
    profile: list[float]


@dataclass
class ReconciliationReport:
    modes: list[ModeMatch]
    F_eff: float
    kappa_eff: float
    eta_eff: float
    n_plates: int
    partial: bool
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("F_eff", "kappa_eff", "eta_eff"):
            if not math.isfinite(d[k]):
                d[k] = None
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def reconcile(layout: NetworkLayout, h: float, params=None, target: float | None = None,
              n_modes: int | None = None, window: float = 0.2, threshold: float = 0.5,
              chain=None) -> ReconciliationReport:
    """Match a finite-element chain spectrum to its tight-binding counterpart.

    ``params`` (a WannierStarkParams) sets the tight-binding reference; when
    omitted the reference is built from the fitted ``F_eff`` and ``kappa_eff``.
    The effective coupling comes from matching the mean second moment of the
    interior strain profiles to ``sum_m m^2 J_m(2 eta)^2``.
    """
    P = len(layout.plates)
    if target is None:
        target = params.omega0 if params is not None else float(np.mean(
            [layout.material.rod_frequency(p.length) for p in layout.plates]))
    if chain is None:
        chain = chain_modes(layout, h, target, n_modes or (2 * P + 4), window=window)
    cand = chain.compression_modes(threshold)
    warnings = []
    if len(cand) > P:
        cand = sorted(sorted(cand, key=lambda k: abs(chain.modes[k].frequency - target))[:P])
    partial = len(cand) < P
    if partial:
        warnings.append(f"found {len(cand)} compression modes for {P} plates")
    freqs = np.array([chain.modes[k].frequency for k in cand])
    profs = [chain.profiles[k].values for k in cand]

    F_eff = kappa_eff = eta_eff = float("nan")
    if len(cand) >= 3:
        inner = interior_slice(len(cand))
        idx = np.arange(len(cand))[inner]
        if idx.size >= 2:
            F_eff = float(np.mean(np.diff(freqs[idx])))
        else:
            F_eff = float(np.mean(np.diff(freqs)))
        var = float(np.mean([profile_variance(profs[i]) for i in idx]))
        eta_eff = eta_from_second_moment(var)
        kappa_eff = eta_eff * F_eff
    elif len(cand) == 2:
        F_eff = float(freqs[1] - freqs[0])

    if params is not None:
        F_ref, k_ref, w0 = params.step_F, params.kappa, params.omega0
    else:
        F_ref = F_eff if math.isfinite(F_eff) else 0.0
        k_ref = kappa_eff if math.isfinite(kappa_eff) else 0.0
        w0 = float(np.median(freqs)) if freqs.size else target
    c = (P - 1) / 2
    site_f = [w0 + (n - c) * F_ref for n in range(P)]
    if min(site_f) <= 0:
        raise InvalidArgument("reference ladder has non-positive site frequencies")
    edges = [(i, i + 1, k_ref) for i in range(P - 1)]
    tb = solve_modes(build_graph_model(site_f, edges))

    matches = []
    if freqs.size:
        cost = np.abs(freqs[:, None] - tb.eigenvalues[None, :])
        rows, cols = linear_sum_assignment(cost)
        for r, col in zip(rows, cols):
            s = np.asarray(profs[r])
            u = np.abs(tb.eigenvectors[:, col])
            ov = float(s @ u / (np.linalg.norm(s) * np.linalg.norm(u)))
            matches.append(ModeMatch(float(freqs[r]), float(tb.eigenvalues[col]),
                                     float(freqs[r] - tb.eigenvalues[col]), ov, s.tolist()))
    return ReconciliationReport(matches, F_eff, kappa_eff, eta_eff, P, partial, warnings)
