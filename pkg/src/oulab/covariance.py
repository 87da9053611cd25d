"""Gramians ``Q_t``, the invariant covariance ``Q_inf`` and the Lyapunov equation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg as sla
from numpy.polynomial.legendre import leggauss

from .config import DEFAULT, Tolerances
from .errors import MissingCovarianceError, NotStableError, QuadratureError
from .linalg import expm, pencil_eigvals, psd_eig, range_basis, sym
from .model import OuModel

_GL_NODES, _GL_WEIGHTS = leggauss(16)


# --------------------------------------------------------------------------- Lyapunov


def lyapunov(A: np.ndarray, Q: np.ndarray, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Solve ``A X + X A^T = -Q`` by Bartels-Stewart on the complex Schur form.

    With ``A = Z T Z^H`` the unknown ``Y = Z^H X Z`` satisfies
    ``T Y + Y T^H = -Z^H Q Z``, which is solved column by column from the
    right.  A Kronecker solve is used as a fallback for n <= 30 when the
    residual is not acceptable.
    """
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    n = A.shape[0]
    T, Z = sla.schur(A, output="complex")
    C = -(Z.conj().T @ Q @ Z)
    Y = np.zeros((n, n), dtype=complex)
    eye = np.eye(n)
    for j in range(n - 1, -1, -1):
        rhs = C[:, j] - Y[:, j + 1:] @ T[j, j + 1:].conj()
        Y[:, j] = sla.solve_triangular(T + T[j, j].conj() * eye, rhs)
    X = sym((Z @ Y @ Z.conj().T).real)
    if lyapunov_residual(A, X, Q) > tol.lyap and n <= 30:
        K = np.kron(eye, A) + np.kron(A, eye)
        X = sym(np.linalg.solve(K, -Q.reshape(-1, order="F")).reshape(n, n, order="F"))
    return X


def lyapunov_residual(A: np.ndarray, X: np.ndarray, Q: np.ndarray) -> float:
    """``|AX + XA^T + Q|_F / max(|Q|_F, tiny)``."""
    res = A @ X + X @ A.T + Q
    return float(np.linalg.norm(res) / max(np.linalg.norm(Q), np.finfo(float).tiny))


def solve_lyapunov(model: OuModel, tol: Tolerances | None = None) -> np.ndarray:
    """Invariant covariance of a Hurwitz-stable model (the minimal PSD Lyapunov solution)."""
    tol = tol or model.tol
    if model.is_diagonal:
        if np.any(model.a_diag <= 0):
            raise NotStableError("diagonal drift has a_n <= 0")
        return np.diag(model.q_diag / (2.0 * model.a_diag))
    eig = np.linalg.eigvals(model.A)
    if np.max(eig.real) >= 0:
        raise NotStableError(f"A is not Hurwitz: spectral abscissa {np.max(eig.real):.3g}")
    X = lyapunov(model.A, model.Q, tol)
    res = lyapunov_residual(model.A, X, model.Q)
    if res > tol.lyap:
        raise NotStableError(f"Lyapunov residual {res:.2e} above tolerance {tol.lyap:.0e}")
    return X


# --------------------------------------------------------------------------- Gramians


def diagonal_gramian(a: np.ndarray, q: np.ndarray, t: float) -> np.ndarray:
    """Diagonal of ``Q_t`` for ``A = diag(-a)``, ``Q = diag(q)``: ``q (1 - e^{-2at}) / 2a``."""
    with np.errstate(over="ignore"):
        g = np.where(a != 0, -np.expm1(-2.0 * a * t) / np.where(a != 0, 2.0 * a, 1.0), t)
    return q * g


def _diag_gramian(model: OuModel, t: float) -> np.ndarray:
    return np.diag(diagonal_gramian(model.a_diag, model.q_diag, t))


def _panel_sum(step_factor, local_factors, panels: int, weights) -> np.ndarray:
    """Sum of ``w_k F F^T`` over all panels and nodes, F = S(panel start) S(local node) i."""
    L = np.stack(local_factors)
    S0 = np.eye(step_factor.shape[0])
    acc = np.zeros((step_factor.shape[0],) * 2)
    for _ in range(panels):
        F = S0 @ L
        acc += np.einsum("k,kim,kjm->ij", weights, F, F)
        S0 = step_factor @ S0
    return acc


def gramian_quadrature(model: OuModel, t: float, panels: int = 1,
                       tol: Tolerances | None = None) -> np.ndarray:
    """``Q_t = int_0^t S(s) Q S(s)^T ds`` by composite 16-point Gauss-Legendre.

    The panel count doubles until successive results differ by less than
    ``tol.quad`` relative to the current result (Frobenius norm).
    """
    tol = tol or model.tol
    if not t > 0:
        raise ValueError("t must be positive")
    if model.is_diagonal:
        a, q = model.a_diag, model.q_diag
        prev = None
        for k in range(tol.max_doublings + 1):
            p = panels * 2 ** k
            h = t / p
            nodes = (np.arange(p)[:, None] * h + 0.5 * h * (_GL_NODES + 1.0)[None, :]).reshape(-1)
            w = np.tile(0.5 * h * _GL_WEIGHTS, p)
            cur = np.diag(q * (w @ np.exp(-2.0 * np.outer(nodes, a))))
            if prev is not None and np.linalg.norm(cur - prev) <= tol.quad * max(np.linalg.norm(cur), 1e-300):
                return cur
            prev = cur
        raise QuadratureError("diagonal Gramian quadrature did not converge",
                              float(np.linalg.norm(cur - prev)))

    A, B = model.A, model.i_factor
    prev = None
    achieved = math.inf
    for k in range(tol.max_doublings + 1):
        p = panels * 2 ** k
        h = t / p
        local = 0.5 * h * (_GL_NODES + 1.0)
        local_factors = [expm(A, float(s), tol) @ B for s in local]
        step = expm(A, h, tol)
        cur = sym(_panel_sum(step, local_factors, p, 0.5 * h * _GL_WEIGHTS))
        if prev is not None:
            achieved = float(np.linalg.norm(cur - prev))
            if achieved <= tol.quad * max(float(np.linalg.norm(cur)), 1e-300):
                return cur
        prev = cur
    raise QuadratureError(f"Gramian quadrature at t={t} did not converge after "
                          f"{tol.max_doublings} doublings", achieved)


def gramian_from_identity(model: OuModel, t: float, q_inf: np.ndarray | None = None) -> np.ndarray:
    """``Q_t = Q_inf - S(t) Q_inf S(t)^T``."""
    if q_inf is None:
        try:
            q_inf = solve_lyapunov(model)
        except NotStableError as exc:
            raise MissingCovarianceError(f"Q_inf unavailable: {exc}") from exc
    S = model.S(t)
    return sym(q_inf - S @ q_inf @ S.T)


def gramian(model: OuModel, t: float) -> np.ndarray:
    """Best available ``Q_t``: closed form for diagonal models, quadrature otherwise."""
    if model.is_diagonal:
        return _diag_gramian(model, t)
    return gramian_quadrature(model, t)


def check_q_symmetry(model: OuModel, tol: Tolerances | None = None) -> tuple[bool, float]:
    """Whether ``AQ = QA^T``; defect is ``|AQ - QA^T|_F / max(1, |AQ|_F)``."""
    tol = tol or model.tol
    if model.is_diagonal:
        return True, 0.0
    AQ = model.A @ model.Q
    defect = float(np.linalg.norm(AQ - AQ.T) / max(1.0, np.linalg.norm(AQ)))
    return defect <= tol.sym, defect


# --------------------------------------------------------------------------- HQ_inf


@dataclass(frozen=True)
class TracePlateau:
    holds: bool
    times: tuple
    traces: tuple


def hq_infinity_by_trace(model: OuModel, max_power: int = 12, rel_increase: float = 1e-6) -> TracePlateau:
    """Decide boundedness of ``t -> trace Q_t`` on ``t = 2^k``, k <= max_power.

    Uses ``Q_2t = Q_t + S(t) Q_t S(t)^T``.  The verdict is a numerical one:
    a plateau (relative increase below ``rel_increase``) counts as bounded.
    """
    Qt = gramian(model, 1.0)
    S = model.S(1.0)
    times, traces = [1.0], [float(np.trace(Qt))]
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, max_power + 1):
            Qt = sym(Qt + S @ Qt @ S.T)
            S = S @ S
            tr = float(np.trace(Qt))
            times.append(2.0 ** k)
            traces.append(tr)
            if not np.isfinite(tr):
                return TracePlateau(False, tuple(times), tuple(traces))
            if tr - traces[-2] <= rel_increase * tr:
                return TracePlateau(True, tuple(times), tuple(traces))
    return TracePlateau(False, tuple(times), tuple(traces))


def controllable_basis(A: np.ndarray, B: np.ndarray, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Orthonormal basis of the smallest A-invariant subspace containing range(B)."""
    V = range_basis(B, tol)
    while True:
        W = range_basis(np.hstack([V, A @ V]), tol) if V.shape[1] else V
        if W.shape[1] == V.shape[1]:
            return V
        V = W


def invariant_covariance(model: OuModel, tol: Tolerances | None = None) -> tuple[np.ndarray | None, bool, str]:
    """``(Q_inf, hq_infinity_holds, provenance)``.

    A stable drift goes straight to the Lyapunov solver.  Otherwise the
    trace-plateau test decides (HQ_inf); when it holds, ``Q_inf`` is obtained
    from the Lyapunov equation restricted to the controllable subspace, where
    the drift must then be stable.
    """
    tol = tol or model.tol
    if model.is_diagonal and np.all(model.a_diag > 0):
        return solve_lyapunov(model, tol), True, "closed-form-diagonal"
    if model.is_hurwitz():
        return solve_lyapunov(model, tol), True, "lyapunov"
    plateau = hq_infinity_by_trace(model)
    if not plateau.holds:
        return None, False, "trace-unbounded"
    V = controllable_basis(model.A, model.i_factor, tol)
    Ac = V.T @ model.A @ V
    if np.max(np.linalg.eigvals(Ac).real) >= 0:
        return None, True, "trace-plateau"
    X = lyapunov(Ac, V.T @ model.Q @ V, tol)
    return sym(V @ X @ V.T), True, "lyapunov-controllable-subspace"


# --------------------------------------------------------------------------- whitening


@dataclass(frozen=True)
class Whitening:
    """Orthonormal coordinates of ``H_inf``: ``Q_inf = U diag(lam) U^T`` (rank-truncated).

    A vector ``w`` in these coordinates is the state ``U lam^{1/2} w``, and
    ``|U lam^{1/2} w|_{H_inf} = |w|``.
    """

    lam: np.ndarray
    U: np.ndarray
    q_inf: np.ndarray

    @property
    def m(self) -> int:
        return self.lam.size

    @property
    def embed(self) -> np.ndarray:
        return self.U * np.sqrt(self.lam)

    @property
    def project(self) -> np.ndarray:
        return (self.U / np.sqrt(self.lam)).T

    def restrict(self, M: np.ndarray) -> np.ndarray:
        """Matrix of an operator leaving range(Q_inf) invariant, in whitened coordinates."""
        return self.project @ M @ self.embed


def whitening(model: OuModel, q_inf: np.ndarray | None = None, tol: Tolerances | None = None) -> Whitening:
    tol = tol or model.tol
    if q_inf is None:
        q_inf, _, how = invariant_covariance(model, tol)
        if q_inf is None:
            raise MissingCovarianceError(f"Q_inf unavailable ({how})")
    lam, U = psd_eig(q_inf, tol)
    if lam.size == 0:
        raise MissingCovarianceError("Q_inf is zero")
    return Whitening(lam, U, q_inf)


# --------------------------------------------------------------------------- family


@dataclass(frozen=True)
class GramianFamily:
    model: OuModel
    q_of_t: Mapping[float, np.ndarray]
    provenance: Mapping[float, str]
    q_infinity: np.ndarray | None
    hq_infinity_holds: bool
    q_infinity_provenance: str = field(default="")

    def __getitem__(self, t: float) -> np.ndarray:
        return self.q_of_t[t]

    @property
    def times(self) -> tuple:
        return tuple(sorted(self.q_of_t))

    def monotonicity_defect(self) -> float:
        """Most negative pencil eigenvalue of ``Q_t - Q_s`` over consecutive stored times,
        with ``Q_inf`` appended when present (0 if monotone)."""
        mats = [self.q_of_t[t] for t in self.times]
        if self.q_infinity is not None:
            mats.append(self.q_infinity)
        worst = 0.0
        for lo, hi in zip(mats, mats[1:]):
            w = np.linalg.eigvalsh(sym(hi - lo))
            worst = min(worst, float(w[0]) / max(1.0, float(np.abs(hi).max())))
        return -worst


def gramian_family(model: OuModel, times: Sequence[float], method: str = "auto") -> GramianFamily:
    """Assemble ``Q_t`` on a time grid plus ``Q_inf``.

    ``method`` is ``quadrature``, ``identity`` or ``auto`` (closed form for
    diagonal models, quadrature otherwise).
    """
    q_inf, holds, how = invariant_covariance(model)
    qs, prov = {}, {}
    for t in times:
        t = float(t)
        if method == "identity":
            qs[t] = gramian_from_identity(model, t, q_inf) if q_inf is not None else None
            if qs[t] is None:
                raise MissingCovarianceError("identity route needs Q_inf")
            prov[t] = "lyapunov-identity"
        elif method == "quadrature" or not model.is_diagonal:
            qs[t] = gramian_quadrature(model, t)
            prov[t] = "quadrature"
        else:
            qs[t] = _diag_gramian(model, t)
            prov[t] = "closed-form-diagonal"
    return GramianFamily(model, MappingProxyType(qs), MappingProxyType(prov), q_inf, holds, how)


def pencil_spread(Qs: np.ndarray, Qt: np.ndarray) -> np.ndarray:
    """Generalized eigenvalues of (Q_s, Q_t); all at most 1 when Q_s <= Q_t."""
    return pencil_eigvals(Qs, Qt)
