"""Eigen-solvers: dense symmetric, symmetric tridiagonal, sparse shift-invert.

The dense path delegates to LAPACK (``dsyev``: Householder reduction plus
implicit QL/QR) and is used as the reference.  The tridiagonal path is a
Sturm-sequence bisection with inverse iteration for the vectors.  The sparse
path is a shift-invert Lanczos iteration in the M inner product, with full
reorthogonalization and deflated restarts so that repeated eigenvalues are
recovered with their multiplicity.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import FactorizationFailure, InvalidArgument, NumericalFailure

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class SparseSym:
    """Symmetric sparse matrix stored as the CSR lower triangle."""

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray

    @classmethod
    def from_matrix(cls, A) -> "SparseSym":
        A = sp.csr_matrix(A)
        if A.shape[0] != A.shape[1]:
            raise InvalidArgument(f"matrix must be square, got {A.shape}")
        low = sp.tril(A, format="csr")
        low.sum_duplicates()
        low.eliminate_zeros()
        low.sort_indices()
        return cls(A.shape[0], low.indptr.copy(), low.indices.copy(), low.data.copy())

    def lower(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.data, self.indices, self.indptr), shape=(self.n, self.n))

    def to_scipy(self) -> sp.csr_matrix:
        low = self.lower()
        diag = sp.diags(low.diagonal())
        return (low + low.T - diag).tocsr()

    @property
    def nnz(self) -> int:
        return int(self.data.size)


@dataclass
class EigenResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    iterations: int = 0
    info: dict = field(default_factory=dict)


def _as_sparse(A) -> sp.csr_matrix:
    if isinstance(A, SparseSym):
        return A.to_scipy()
    return sp.csr_matrix(A)


def dense_sym_eig(matrix) -> EigenResult:
    A = np.asarray(matrix.toarray() if sp.issparse(matrix) else matrix, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidArgument(f"expected a square matrix, got shape {A.shape}")
    n = A.shape[0]
    if n > 4000:
        raise InvalidArgument(f"dense path limited to n <= 4000, got {n}")
    scale = max(np.abs(A).max(initial=0.0), np.finfo(float).tiny)
    asym = np.abs(A - A.T).max(initial=0.0)
    if asym > 1e-10 * scale:
        raise InvalidArgument(f"matrix is not symmetric (max |A - A^T| = {asym:.3e})")
    A = 0.5 * (A + A.T)
    if n == 0:
        return EigenResult(np.empty(0), np.empty((0, 0)), np.empty(0))
    w, V = sla.eigh(A, driver="ev")
    res = np.linalg.norm(A @ V - V * w, axis=0)
    return EigenResult(w, V, res)


def _sturm_count(d, e2, x, pivmin):
    """Number of eigenvalues strictly below each entry of ``x``."""
    q = d[0] - x
    q = np.where(np.abs(q) < pivmin, -pivmin, q)
    count = (q < 0).astype(np.int64)
    for i in range(1, d.size):
        q = d[i] - x - e2[i - 1] / q
        q = np.where(np.abs(q) < pivmin, -pivmin, q)
        count += q < 0
    return count


def _bisect_all(d, e):
    n = d.size
    e2 = e * e
    absd = np.abs(d)
    rad = np.zeros(n)
    if n > 1:
        rad[:-1] += np.abs(e)
        rad[1:] += np.abs(e)
    lo0 = float(np.min(d - rad))
    hi0 = float(np.max(d + rad))
    tnorm = max(float(np.max(absd + rad)), np.finfo(float).tiny)
    pivmin = np.finfo(float).tiny * max(1.0, float(e2.max(initial=0.0)))
    pad = 2 * _EPS * tnorm + pivmin
    lo = np.full(n, lo0 - pad)
    hi = np.full(n, hi0 + pad)
    k = np.arange(n)
    atol = 2 * _EPS * tnorm
    for _ in range(200):
        width = hi - lo
        active = width > np.maximum(atol, 2 * _EPS * np.maximum(np.abs(lo), np.abs(hi)))
        if not active.any():
            break
        mid = 0.5 * (lo + hi)
        cnt = _sturm_count(d, e2, mid[active], pivmin)
        above = cnt > k[active]
        idx = np.flatnonzero(active)
        hi[idx[above]] = mid[active][above]
        lo[idx[~above]] = mid[active][~above]
    return 0.5 * (lo + hi), tnorm


def tridiag_eig(diag, offdiag) -> EigenResult:
    """Full eigen-decomposition of a symmetric tridiagonal matrix.

    Eigenvalues by bisection on the Sturm count, eigenvectors by inverse
    iteration with banded LU; exact zero couplings split the problem into
    independent blocks.  Vectors whose eigenvalues lie within
    ``1e-3 * ||T||`` of each other are Gram-Schmidt orthogonalized against the
    rest of their cluster.
    """
    d = np.asarray(diag, dtype=float).ravel()
    e = np.asarray(offdiag, dtype=float).ravel()
    n = d.size
    if e.size != max(n - 1, 0):
        raise InvalidArgument(f"offdiag must have length {max(n - 1, 0)}, got {e.size}")
    if n == 0:
        return EigenResult(np.empty(0), np.empty((0, 0)), np.empty(0))
    if n == 1:
        return EigenResult(d.copy(), np.ones((1, 1)), np.zeros(1))
    cuts = np.flatnonzero(e == 0.0)
    if cuts.size:
        # Exact zeros decouple the matrix; solve the blocks independently so
        # the vectors vanish identically outside their block.
        bounds = np.concatenate([[0], cuts + 1, [n]])
        vals, cols, res = [], [], []
        for a, b in zip(bounds[:-1], bounds[1:]):
            sub = tridiag_eig(d[a:b], e[a:b - 1])
            block = np.zeros((n, b - a))
            block[a:b] = sub.eigenvectors
            vals.append(sub.eigenvalues)
            cols.append(block)
            res.append(sub.residuals)
        w = np.concatenate(vals)
        order = np.argsort(w, kind="stable")
        return EigenResult(w[order], np.hstack(cols)[:, order], np.concatenate(res)[order])

    shift = float(np.median(d))
    dc = d - shift
    w, tnorm = _bisect_all(dc, e)

    ab = np.zeros((3, n))
    ab[0, 1:] = e
    ab[2, :-1] = e
    rng = np.random.default_rng(12345)
    start = rng.uniform(-1.0, 1.0, size=n)
    V = np.empty((n, n))
    ortol = 1e-3 * tnorm
    cluster_start = 0
    for j in range(n):
        if j > 0 and w[j] - w[j - 1] > ortol:
            cluster_start = j
        lam = w[j]
        x = start.copy()
        bump = 0
        for _ in range(4):
            ab[1] = dc - lam
            try:
                y = sla.solve_banded((1, 1), ab, x, check_finite=False)
            except np.linalg.LinAlgError:
                bump += 1
                lam = w[j] + bump * 4 * _EPS * tnorm
                continue
            if cluster_start < j:
                C = V[:, cluster_start:j]
                y -= C @ (C.T @ y)
                y -= C @ (C.T @ y)
            nrm = np.linalg.norm(y)
            if not np.isfinite(nrm) or nrm == 0.0:
                bump += 1
                lam = w[j] + bump * 4 * _EPS * tnorm
                continue
            x = y / nrm
        V[:, j] = x

    res = np.empty(n)
    Tv = dc[:, None] * V
    Tv[:-1] += e[:, None] * V[1:]
    Tv[1:] += e[:, None] * V[:-1]
    res[:] = np.linalg.norm(Tv - V * w, axis=0)
    return EigenResult(w + shift, V, res)


class Factorization:
    """Handle applying ``(A - sigma M)^{-1}``; immutable after construction."""

    def __init__(self, lu, sigma: float, n: int):
        self._lu = lu
        self.sigma = sigma
        self.n = n

    def solve(self, b):
        return self._lu.solve(np.asarray(b, dtype=float))


def sparse_factor(A, sigma: float = 0.0, M=None) -> Factorization:
    """Sparse LU of ``A - sigma*M`` with a minimum-degree column ordering."""
    As = _as_sparse(A)
    n = As.shape[0]
    if M is None:
        Ms = sp.identity(n, format="csr")
    else:
        Ms = _as_sparse(M)
    S = (As - sigma * Ms).tocsc() if sigma != 0.0 else As.tocsc()
    try:
        lu = spla.splu(S, permc_spec="MMD_AT_PLUS_A")
    except RuntimeError as exc:
        raise FactorizationFailure(f"factorization failed at shift {sigma!r}: {exc}",
                                   {"sigma": sigma}) from exc
    piv = np.abs(lu.U.diagonal())
    if not np.all(np.isfinite(piv)) or piv.min(initial=np.inf) <= _EPS * piv.max(initial=0.0):
        raise FactorizationFailure(f"singular pivot at shift {sigma!r}",
                                   {"sigma": sigma, "min_pivot": float(piv.min(initial=0.0))})
    return Factorization(lu, sigma, n)


def _lanczos_run(K, M, fac, sigma, start, L, ML, k_want, tol, max_steps, scale_floor):
    n = K.shape[0]
    m_cap = min(max_steps, n - (0 if L is None else L.shape[1]))
    Q = np.zeros((n, m_cap + 1))
    MQ = np.zeros((n, m_cap + 1))
    alpha = np.zeros(m_cap)
    beta = np.zeros(m_cap)

    def deflate(v):
        if L is not None:
            v = v - L @ (ML.T @ v)
        return v

    # start inside the range of the operator so that high-frequency content is damped
    q = deflate(fac.solve(M @ deflate(start)))
    Mq = M @ q
    nrm = np.sqrt(q @ Mq)
    if nrm == 0.0 or not np.isfinite(nrm):
        return [], 0
    Q[:, 0] = q / nrm
    MQ[:, 0] = Mq / nrm

    found = []
    steps = 0
    next_check = max(k_want + 2, 6)
    for j in range(m_cap):
        w = fac.solve(MQ[:, j])
        alpha[j] = MQ[:, j] @ w
        w -= alpha[j] * Q[:, j]
        if j > 0:
            w -= beta[j - 1] * Q[:, j - 1]
        for _ in range(2):
            w -= Q[:, :j + 1] @ (MQ[:, :j + 1].T @ w)
            w = deflate(w)
        Mw = M @ w
        with np.errstate(over="ignore", invalid="ignore"):
            b = np.sqrt(max(w @ Mw, 0.0))
        beta[j] = b
        steps = j + 1
        opnorm = max(np.abs(alpha[:j + 1]).max(), beta[:j].max(initial=0.0))
        exhausted = not np.isfinite(b) or b <= 1e-12 * opnorm
        if exhausted or steps == m_cap or steps >= next_check:
            next_check = steps + max(5, steps // 5)
            theta, S = sla.eigh_tridiagonal(alpha[:steps], beta[:steps - 1])
            order = np.argsort(-np.abs(theta), kind="stable")[:k_want]
            found = []
            all_ok = True
            for i in order:
                est = abs(b * S[-1, i])
                if not exhausted and est > 10 * tol * abs(theta[i]):
                    all_ok = False
                    continue
                u = Q[:, :steps] @ S[:, i]
                # extra operator applications purify the Ritz vector; near a
                # singular pencil this is what keeps later deflated runs stable
                for _ in range(2):
                    u = deflate(fac.solve(M @ u))
                    u /= np.sqrt(u @ (M @ u))
                Mu = M @ u
                u /= np.sqrt(u @ Mu)
                Mu = M @ u
                lam = sigma + 1.0 / theta[i]
                r = K @ u - lam * Mu
                denom = max(abs(lam), abs(sigma), scale_floor) * np.linalg.norm(Mu)
                rel = np.linalg.norm(r) / denom
                if rel <= tol:
                    found.append((lam, u, rel))
                else:
                    all_ok = False
            if all_ok and len(found) == len(order):
                return found, steps
            if exhausted:
                return found, steps
        if exhausted:
            break
        Q[:, j + 1] = w / b
        MQ[:, j + 1] = Mw / b
    return found, steps


def shift_invert_lanczos(K, M, sigma: float, n_modes: int, tol: float = 1e-8,
                         max_iter: int = 300, seed: int = 0,
                         factorization: Factorization | None = None) -> EigenResult:
    """Eigenpairs of ``K u = lam M u`` with ``lam`` nearest ``sigma``.

    Runs Lanczos on ``(K - sigma M)^{-1} M``.  After the first run, further
    runs start M-orthogonal to every accepted vector; they continue until a
    run produces nothing closer to ``sigma`` than the current ``n_modes``-th
    pair, which is how repeated eigenvalues are picked up.
    """
    if n_modes < 1:
        raise InvalidArgument("n_modes must be >= 1")
    Ks = _as_sparse(K)
    Ms = _as_sparse(M)
    n = Ks.shape[0]
    if n_modes > n:
        raise InvalidArgument(f"n_modes={n_modes} exceeds problem size {n}")
    fac = factorization if factorization is not None else sparse_factor(Ks, sigma, Ms)
    kd = Ks.diagonal()
    md = Ms.diagonal()
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(md > 0, np.abs(kd) / np.where(md > 0, md, 1.0), 0.0)
    # residuals at the roundoff level of the largest eigenvalue count as converged
    scale_floor = 1e-6 * float(ratio.max(initial=0.0))

    rng = np.random.default_rng(seed)
    vals: list[float] = []
    vecs: list[np.ndarray] = []
    resid: list[float] = []
    total = 0
    empty_runs = 0
    max_runs = 2 * n_modes + 4
    run = 0
    for run in range(max_runs):
        if len(vecs) >= n:
            break
        L = np.column_stack(vecs) if vecs else None
        ML = (Ms @ L) if L is not None else None
        k_want = n_modes - len(vecs) if len(vecs) < n_modes else 1
        start = rng.standard_normal(n)
        found, steps = _lanczos_run(Ks, Ms, fac, sigma, start, L, ML, k_want, tol,
                                    max_iter, scale_floor)
        total += steps
        if not found:
            if len(vecs) >= n_modes:
                break
            empty_runs += 1
            if empty_runs > 2:
                break
            continue
        dist_cut = np.inf
        if len(vals) >= n_modes:
            dist_cut = np.sort(np.abs(np.asarray(vals) - sigma))[n_modes - 1]
        new_near = [f for f in found if abs(f[0] - sigma) < dist_cut * (1 - 1e-12)]
        for lam, u, rel in found:
            u = u.copy()
            for _ in range(2):
                for v in vecs:
                    u -= v * (v @ (Ms @ u))
            nrm = np.sqrt(u @ (Ms @ u))
            if not np.isfinite(nrm) or nrm < 0.5:
                continue
            u /= nrm
            Mu = Ms @ u
            Ku = Ks @ u
            lam = float(u @ Ku)
            rel = np.linalg.norm(Ku - lam * Mu) / (
                max(abs(lam), abs(sigma), scale_floor) * np.linalg.norm(Mu))
            vals.append(lam)
            vecs.append(u)
            resid.append(rel)
        if len(vals) >= n_modes and dist_cut < np.inf and not new_near:
            break
    if len(vals) < n_modes:
        raise NumericalFailure(
            f"shift-invert Lanczos converged {len(vals)} of {n_modes} pairs in {total} steps",
            {"sigma": sigma, "converged": list(vals), "residuals": list(resid), "iterations": total})

    vals_a = np.asarray(vals)
    pick = np.argsort(np.abs(vals_a - sigma), kind="stable")[:n_modes]
    pick = pick[np.argsort(vals_a[pick], kind="stable")]
    V = np.column_stack([vecs[i] for i in pick])
    return EigenResult(vals_a[pick], V, np.asarray(resid)[pick], total,
                       {"sigma": sigma, "runs": run + 1})


def dense_generalized_eig(K, M) -> EigenResult:
    """Reference solve of ``K u = lam M u`` through Cholesky reduction (small n only)."""
    Kd = np.asarray(K.toarray() if sp.issparse(K) else K, dtype=float)
    Md = np.asarray(M.toarray() if sp.issparse(M) else M, dtype=float)
    C = np.linalg.cholesky(Md)
    Ci = sla.solve_triangular(C, np.eye(Md.shape[0]), lower=True)
    A = Ci @ Kd @ Ci.T
    A = 0.5 * (A + A.T)
    w, Y = sla.eigh(A)
    U = Ci.T @ Y
    res = np.linalg.norm(Kd @ U - (Md @ U) * w, axis=0)
    return EigenResult(w, U, res)
