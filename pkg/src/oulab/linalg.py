"""Dense matrix primitives: exponential, PSD pencils, least-norm solves, numerical range.

Everything here is a pure function of its inputs.  Matrices are numpy arrays;
"rank" always means numerical rank under :attr:`Tolerances.rank`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize_scalar

from .config import DEFAULT, Tolerances
from .errors import ModelError, UnrepresentableError

_LOG_MAX = math.log(np.finfo(float).max)


def sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def as_matrix(M, name: str = "matrix", square: bool = False) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(M, dtype=float))
    if arr.ndim != 2 or arr.size == 0:
        raise ModelError(f"{name} must be a non-empty 2-D array")
    if not np.all(np.isfinite(arr)):
        raise ModelError(f"{name} has non-finite entries")
    if square and arr.shape[0] != arr.shape[1]:
        raise ModelError(f"{name} must be square, got shape {arr.shape}")
    return arr


def rank_cutoff(s: np.ndarray, shape: tuple[int, int], tol: Tolerances = DEFAULT) -> float:
    smax = float(s.max()) if s.size else 0.0
    return tol.rank * smax * max(shape)


def numerical_rank(M: np.ndarray, tol: Tolerances = DEFAULT) -> int:
    M = np.atleast_2d(M)
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rank_cutoff(s, M.shape, tol)))


def psd_eig(G: np.ndarray, tol: Tolerances = DEFAULT) -> tuple[np.ndarray, np.ndarray]:
    """Rank-truncated eigendecomposition ``G ~ U diag(lam) U^T`` of a symmetric PSD matrix.

    Eigenvalues are returned in descending order; only those above the rank
    cutoff are kept.
    """
    w, V = np.linalg.eigh(sym(G))
    w, V = w[::-1], V[:, ::-1]
    if w.size == 0 or w[0] <= 0.0:
        return np.zeros(0), np.zeros((G.shape[0], 0))
    keep = w > rank_cutoff(np.abs(w), G.shape, tol)
    return w[keep], V[:, keep]


def psd_sqrt(G: np.ndarray, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Symmetric square root of a PSD matrix, small eigenvalues clamped to zero."""
    lam, U = psd_eig(G, tol)
    return (U * np.sqrt(lam)) @ U.T


def range_basis(M: np.ndarray, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Orthonormal basis of range(M) as columns."""
    U, s, _ = np.linalg.svd(np.atleast_2d(M), full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((M.shape[0], 0))
    return U[:, s > rank_cutoff(s, M.shape, tol)]


def kernel_basis(M: np.ndarray, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Orthonormal basis of ker(M) as columns."""
    M = np.atleast_2d(M)
    _, s, Vt = np.linalg.svd(M, full_matrices=True)
    r = 0 if (s.size == 0 or s[0] == 0.0) else int(np.sum(s > rank_cutoff(s, M.shape, tol)))
    return Vt[r:].T.copy()


# --------------------------------------------------------------------------- expm


def _eig_route(M: np.ndarray, tol: Tolerances):
    w, V = np.linalg.eig(M)
    if not np.all(np.isfinite(V)):
        return None
    if np.linalg.cond(V) >= tol.expm_cond:
        return None
    return w, V, np.linalg.inv(V)


def expm(A, t: float = 1.0, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Matrix exponential ``e^{tA}``.

    Uses the eigendecomposition when the eigenvector basis is well
    conditioned and scaling-and-squaring with a degree-13 Pade approximant
    otherwise (Jordan blocks defeat the eigenvector route).
    """
    A = as_matrix(A, "A", square=True)
    if t < 0:
        raise ValueError("t must be nonnegative")
    n = A.shape[0]
    if t == 0.0:
        return np.eye(n)
    M = t * A
    if not np.all(np.isfinite(M)):
        raise UnrepresentableError("t*A overflows")
    route = _eig_route(M, tol)
    if route is not None:
        w, V, Vinv = route
        if np.max(w.real) > _LOG_MAX:
            raise UnrepresentableError(f"e^(tA) overflows: spectral abscissa*t = {np.max(w.real):.3g}")
        E = (V * np.exp(w)) @ Vinv
        out = E.real if np.isrealobj(A) else E
    else:
        with np.errstate(over="raise", invalid="raise"):
            try:
                out = sla.expm(M)
            except FloatingPointError as exc:
                raise UnrepresentableError("e^(tA) overflows in scaling and squaring") from exc
    if not np.all(np.isfinite(out)):
        raise UnrepresentableError("e^(tA) is not representable in double precision")
    return out


def expm_many(A: np.ndarray, times: Sequence[float], tol: Tolerances = DEFAULT) -> np.ndarray:
    """Stack of ``e^{tA}`` for several times, sharing one eigendecomposition when possible."""
    A = as_matrix(A, "A", square=True)
    times = np.asarray(times, dtype=float)
    route = _eig_route(A, tol)
    if route is not None and times.size and np.max(np.real(route[0])) * times.max() < _LOG_MAX:
        w, V, Vinv = route
        E = np.einsum("ij,tj,jk->tik", V, np.exp(np.outer(times, w)), Vinv)
        return E.real
    return np.stack([expm(A, float(s), tol) for s in times])


# --------------------------------------------------------------------------- pencils


@dataclass(frozen=True)
class PencilResult:
    sup_ratio: float
    argmax_vector: np.ndarray | None
    kernel_violation: bool


def _check_psd_pair(Q: np.ndarray, R: np.ndarray, tol: Tolerances) -> None:
    if Q.shape != R.shape or Q.shape[0] != Q.shape[1]:
        raise ModelError(f"pencil needs two square matrices of equal size, got {Q.shape} and {R.shape}")
    for name, M in (("Q", Q), ("R", R)):
        scale = max(1.0, float(np.abs(M).max()))
        if np.abs(M - M.T).max() > 1e-8 * scale:
            raise ModelError(f"{name} is not symmetric")


def _whiten_range(R: np.ndarray, tol: Tolerances):
    """Split R into (eigenvalues, basis) on its numerical range and a kernel basis."""
    w, V = np.linalg.eigh(sym(R))
    w, V = w[::-1], V[:, ::-1]
    keep = w > rank_cutoff(np.abs(w), R.shape, tol) if w.size and w[0] > 0 else np.zeros(w.size, bool)
    return w[keep], V[:, keep], V[:, ~keep]


def pencil_sup_ratio(Q, R, tol: Tolerances = DEFAULT) -> PencilResult:
    """``sup <Qx,x>/<Rx,x>`` over x outside ker R, for symmetric PSD Q and R.

    The supremum is +inf exactly when ker R is not contained in ker Q; in
    that case the returned vector is a unit kernel vector of R with
    ``<Qx,x> > 0``.
    """
    Q = as_matrix(Q, "Q")
    R = as_matrix(R, "R")
    _check_psd_pair(Q, R, tol)
    Q, R = sym(Q), sym(R)
    lam, U, K = _whiten_range(R, tol)
    qscale = float(np.abs(np.linalg.eigvalsh(Q)).max()) if Q.size else 0.0
    if K.shape[1]:
        Kq = sym(K.T @ Q @ K)
        wk, vk = np.linalg.eigh(Kq)
        if wk[-1] > tol.rank * qscale * max(Q.shape):
            x = K @ vk[:, -1]
            return PencilResult(math.inf, x / np.linalg.norm(x), True)
    if lam.size == 0:
        return PencilResult(0.0, None, False)
    W = U / np.sqrt(lam)
    mu, Y = np.linalg.eigh(sym(W.T @ Q @ W))
    x = W @ Y[:, -1]
    return PencilResult(float(max(mu[-1], 0.0)), x / np.linalg.norm(x), False)


def pencil_eigvals(Q, R, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Generalized eigenvalues of (Q, R) restricted to range(R), descending."""
    Q = as_matrix(Q, "Q")
    R = as_matrix(R, "R")
    _check_psd_pair(Q, R, tol)
    lam, U = psd_eig(R, tol)
    if lam.size == 0:
        return np.zeros(0)
    W = U / np.sqrt(lam)
    return np.linalg.eigvalsh(sym(W.T @ sym(Q) @ W))[::-1]


def hermitian_ratio_sup(B, P, tol: Tolerances = DEFAULT) -> PencilResult:
    """``sup |z*Bz| / z*Pz`` for Hermitian B (possibly indefinite) and PSD P.

    Infinite iff B does not annihilate ker P.
    """
    B = np.asarray(B, dtype=complex)
    P = np.asarray(P, dtype=float)
    lam, U, K = _whiten_range(P, tol)
    bscale = float(np.abs(np.linalg.eigvalsh(0.5 * (B + B.conj().T))).max()) if B.size else 0.0
    if K.shape[1]:
        BK = B @ K
        if bscale > 0 and np.linalg.norm(BK, 2) > tol.membership * bscale:
            _, _, vh = np.linalg.svd(BK)
            z = K @ vh[0].conj()
            return PencilResult(math.inf, z / np.linalg.norm(z), True)
    if lam.size == 0:
        return PencilResult(0.0, None, False)
    W = U / np.sqrt(lam)
    Bw = W.T @ B @ W
    mu, Y = np.linalg.eigh(0.5 * (Bw + Bw.conj().T))
    k = int(np.argmax(np.abs(mu)))
    z = W @ Y[:, k]
    return PencilResult(float(abs(mu[k])), z / np.linalg.norm(z), False)


# --------------------------------------------------------------------------- least norm


class LeastNorm(NamedTuple):
    solution: np.ndarray
    residual: float
    in_range: bool


def pseudo_apply(B, y, tol: Tolerances = DEFAULT) -> LeastNorm:
    """Least-norm minimiser of ``|Bu - y|`` with a rank-revealing SVD."""
    B = as_matrix(B, "B")
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape[0] != B.shape[0]:
        raise ModelError(f"vector of length {y.shape[0]} does not match {B.shape[0]} rows")
    U, s, Vt = np.linalg.svd(B, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        u = np.zeros(B.shape[1])
    else:
        r = int(np.sum(s > rank_cutoff(s, B.shape, tol)))
        u = Vt[:r].T @ ((U[:, :r].T @ y) / s[:r])
    residual = float(np.linalg.norm(B @ u - y))
    return LeastNorm(u, residual, residual <= tol.membership * (1.0 + float(np.linalg.norm(y))))


# --------------------------------------------------------------------------- numerical range


@dataclass(frozen=True)
class NumericalRangeSample:
    boundary_points: np.ndarray
    theta_grid: np.ndarray
    vectors: np.ndarray

    def sector_ratio(self) -> float:
        """Largest ``|Im z| / (-Re z)`` over sampled points away from the origin.

        +inf when a sampled point other than 0 lies in the closed right half-plane.
        """
        z = self.boundary_points
        scale = max(1.0, float(np.abs(z).max()))
        tiny = 1e-12 * scale
        z = z[np.abs(z) > tiny]
        if z.size == 0:
            return 0.0
        if np.any(z.real > -tiny):
            return math.inf
        return float(np.max(np.abs(z.imag) / -z.real))


def _support_point(M: np.ndarray, theta: float):
    rot = np.exp(-1j * theta) * M
    H = 0.5 * (rot + rot.conj().T)
    _, V = np.linalg.eigh(H)
    z = V[:, -1]
    return complex(z.conj() @ M @ z), z


def numerical_range(M, grid_size: int = DEFAULT.range_grid, refine: bool = True) -> NumericalRangeSample:
    """Boundary support points of the field of values ``{z*Mz : |z| = 1}``.

    For each angle the top eigenvector of the Hermitian part of
    ``e^{-i theta} M`` gives the support point in direction ``e^{i theta}``.
    With ``refine`` the sector ratio is maximized over the angle in the two
    grid cells around the best grid point (bounded scalar search), and the
    evaluated points are appended.
    """
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ModelError("numerical_range needs a square matrix")
    thetas = list(np.linspace(-math.pi, math.pi, grid_size, endpoint=False))
    pts, vecs = [], []
    for th in thetas:
        p, z = _support_point(M, th)
        pts.append(p)
        vecs.append(z)
    if refine and grid_size > 2:
        arr = np.array(pts)
        neg = arr.real < 0
        if np.any(neg):
            ratio = np.where(neg, np.abs(arr.imag) / np.where(neg, -arr.real, 1.0), -1.0)
            k = int(np.argmax(ratio))
            step = 2 * math.pi / grid_size

            def neg_ratio(th):
                p, z = _support_point(M, th)
                thetas.append(th)
                pts.append(p)
                vecs.append(z)
                # points in the right half-plane already make the sampled ratio infinite
                return -abs(p.imag) / -p.real if p.real < 0 else 0.0

            minimize_scalar(neg_ratio, bounds=(thetas[k] - step, thetas[k] + step), method="bounded",
                            options={"xatol": 1e-13, "maxiter": 200})
    return NumericalRangeSample(np.array(pts), np.array(thetas), np.array(vecs))
