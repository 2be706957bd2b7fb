"""Localization measures: inverse participation ratio and disorder ensembles."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument, NumericalFailure


@dataclass(frozen=True, eq=False)
class SiteProfile:
    """Non-negative per-site weights of one normal mode (strain or |amplitude|)."""

    values: np.ndarray
    mode_freq: float = float("nan")

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size == 0 or not np.all(np.isfinite(v)) or np.any(v < 0):
            raise InvalidArgument("profile values must be finite and non-negative")
        if not np.any(v > 0):
            raise InvalidArgument("profile is identically zero")
        object.__setattr__(self, "values", v)


def _as_profile(p) -> SiteProfile:
    return p if isinstance(p, SiteProfile) else SiteProfile(np.abs(np.asarray(p, dtype=float)))


def ipr(profile) -> float:
    """Sum of fourth powers over the squared sum of squares; 1/L for flat, 1 for a single site."""
    s = _as_profile(profile).values
    s = s / s.max()
    s2 = s * s
    return float(math.fsum(s2 * s2) / math.fsum(s2) ** 2)


def participation_number(profile) -> float:
    return 1.0 / ipr(profile)


def ipr_spectrum(spec) -> list[tuple[float, float]]:
    """(eigenvalue, IPR of |eigenvector|) for every mode of a tight-binding spectrum."""
    V = np.abs(spec.eigenvectors)
    return [(float(spec.eigenvalues[a]), ipr(V[:, a])) for a in range(V.shape[1])]


@dataclass(frozen=True)
class DisorderConfig:
    sigma_length: float
    n_runs: int = 50
    seed: int = 0
    kappa_rel_sigma: float = 0.0

    def __post_init__(self):
        if not (self.sigma_length >= 0 and math.isfinite(self.sigma_length)):
            raise InvalidArgument(f"sigma_length must be >= 0, got {self.sigma_length}")
        if self.n_runs < 1:
            raise InvalidArgument(f"n_runs must be >= 1, got {self.n_runs}")
        if self.kappa_rel_sigma < 0:
            raise InvalidArgument("kappa_rel_sigma must be >= 0")


@dataclass
class EnsembleResult:
    ladder_index: np.ndarray        # alpha for each mode, ascending eigenvalue order
    mean_ipr: np.ndarray            # per ladder mode
    stderr_ipr: np.ndarray
    center_mean: float              # alpha = 0
    center_stderr: float
    interior_mean: float            # average over interior modes
    interior_stderr: float
    runs_ipr: np.ndarray            # (n_runs, n_sites)
    n_resamples: int = 0
    n_close_spacing_runs: int = 0   # runs with an adjacent gap below 10% of the step
    info: dict = field(default_factory=dict)


def _stderr(x: np.ndarray) -> np.ndarray:
    n = x.shape[0]
    if n < 2:
        return np.zeros(x.shape[1:])
    return x.std(axis=0, ddof=1) / math.sqrt(n)


def _run_rng(seed: int, run: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(run,)))


def interior_slice(n_sites: int, frac: float = 0.2) -> slice:
    cut = int(math.floor(frac * n_sites))
    if n_sites - 2 * cut < 1:
        cut = (n_sites - 1) // 2
    return slice(cut, n_sites - cut)


def disorder_ensemble(base, n_sites: int, base_length: float, cfg: DisorderConfig,
                      n_jobs: int = 1) -> EnsembleResult:
    """IPR statistics of Wannier-Stark chains with Gaussian resonator-length disorder.

    Nominal lengths follow the inverse-length law, ``L_n = base_length * w0 / w_n``;
    each run draws ``dL_n ~ N(0, sigma^2)`` and rescales ``w_n`` by
    ``L_n / (L_n + dL_n)``.  Modes are matched to ladder indices by eigenvalue
    order.  Runs are independent (per-run substreams of ``cfg.seed``) and are
    reduced in run order, so the result does not depend on ``n_jobs``.
    """
    from .tb_model import build_graph_model, build_ws_chain, solve_modes

    if not (base_length > 0):
        raise InvalidArgument(f"base_length must be positive, got {base_length}")
    clean = build_ws_chain(n_sites, base)
    w_nom = np.asarray(clean.site_freqs)
    L_nom = base_length * base.omega0 / w_nom
    edges0 = clean.couplings

    def one_run(r: int):
        rng = _run_rng(cfg.seed, r)
        resamples = 0
        dL = np.empty(n_sites)
        for i in range(n_sites):
            streak = 0
            while True:
                d = rng.normal(0.0, cfg.sigma_length) if cfg.sigma_length > 0 else 0.0
                if L_nom[i] + d > 0:
                    break
                resamples += 1
                streak += 1
                if streak >= 100:
                    raise NumericalFailure(f"site {i}: 100 consecutive non-positive length draws",
                                           {"site": i, "run": r})
            dL[i] = d
        freqs = w_nom * L_nom / (L_nom + dL)
        if cfg.kappa_rel_sigma > 0:
            kfac = 1.0 + rng.normal(0.0, cfg.kappa_rel_sigma, size=len(edges0))
            edges = [(i, j, k * f) for (i, j, k), f in zip(edges0, kfac)]
        else:
            edges = edges0
        spec = solve_modes(build_graph_model(freqs, edges))
        vals = np.array([v for _, v in ipr_spectrum(spec)])
        gaps = np.diff(spec.eigenvalues)
        close = bool(gaps.size and gaps.min() < 0.1 * base.step_F)
        return vals, resamples, close

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(one_run, range(cfg.n_runs)))
    else:
        results = [one_run(r) for r in range(cfg.n_runs)]

    runs = np.stack([res[0] for res in results])
    alpha = np.arange(n_sites) - (n_sites - 1) // 2
    inner = interior_slice(n_sites)
    per_run_interior = runs[:, inner].mean(axis=1)
    c = (n_sites - 1) // 2
    return EnsembleResult(
        ladder_index=alpha,
        mean_ipr=runs.mean(axis=0),
        stderr_ipr=_stderr(runs),
        center_mean=float(runs[:, c].mean()),
        center_stderr=float(_stderr(runs[:, c:c + 1])[0]),
        interior_mean=float(per_run_interior.mean()),
        interior_stderr=float(_stderr(per_run_interior[:, None])[0]),
        runs_ipr=runs,
        n_resamples=sum(res[1] for res in results),
        n_close_spacing_runs=sum(res[2] for res in results),
        info={"sigma_length": cfg.sigma_length, "n_runs": cfg.n_runs, "seed": cfg.seed},
    )


def _is_unimodal(p: np.ndarray, floor: float = 1e-8) -> bool:
    # Tails below the floor are rounding noise and carry no shape information.
    p = np.where(p >= floor * p.max(), p, 0.0)
    k = int(np.argmax(p))
    return bool(np.all(np.diff(p[:k + 1]) >= 0) and np.all(np.diff(p[k:]) <= 0))


def oscillation_onset(omega0: float = 2e9, step_F: float = 1e7, n_sites: int = 61,
                      eta_lo: float = 0.05, eta_hi: float = 3.0, tol: float = 1e-6):
    """Smallest eta at which the centre ladder mode stops being single-peaked.

    Below the onset ``|u_n|`` falls off monotonically from the centre site;
    above it the centre becomes a local minimum and the profile oscillates.
    Returns ``(eta, participation number at eta)`` from bisection on the
    tight-binding chain.
    """
    from .tb_model import WannierStarkParams, build_ws_chain, solve_modes

    c = (n_sites - 1) // 2

    def centre_profile(eta):
        spec = solve_modes(build_ws_chain(n_sites, WannierStarkParams.from_eta(omega0, step_F, eta)))
        return np.abs(spec.eigenvectors[:, c])

    if not _is_unimodal(centre_profile(eta_lo)) or _is_unimodal(centre_profile(eta_hi)):
        raise InvalidArgument("onset not bracketed by [eta_lo, eta_hi]")
    lo, hi = eta_lo, eta_hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _is_unimodal(centre_profile(mid)):
            lo = mid
        else:
            hi = mid
    eta = 0.5 * (lo + hi)
    return eta, participation_number(centre_profile(eta))
