"""Invariance of H under the semigroup and the restricted semigroup ``S_H``.

H-coordinates: ``u`` in R^m stands for ``i u``, and ``|i u|_H = |u|``, so the
generator ``a_h`` of ``S_H`` is stored in an orthonormal frame and plain
spectral norms are H-operator norms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import DEFAULT, Tolerances
from .covariance import controllable_basis, diagonal_gramian, gramian
from .errors import ModelError, NotInSpaceError, NotNormalError, QuadratureError
from .linalg import expm, numerical_rank, pencil_sup_ratio, pseudo_apply, sym
from .model import OuModel
from .rkhs import RkhsSpace, build_H

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
DEFAULT_TIMES = (0.1, 1.0, 3.0)


def _in_range_cols(B: np.ndarray, M: np.ndarray, tol: Tolerances):
    """Least-norm solution X of ``B X = M`` column by column and whether all columns fit."""
    cols, ok = [], True
    for j in range(M.shape[1]):
        res = pseudo_apply(B, M[:, j], tol)
        cols.append(res.solution)
        ok = ok and res.in_range
    return np.column_stack(cols), ok


@dataclass(frozen=True)
class InvarianceResult:
    """``invariant`` is the verdict; ``generator_invariant`` is ``A range(i) ⊆ range(i)``
    and ``sampled`` records ``S(t) range(i) ⊆ range(i)`` at each sampled time."""

    invariant: bool
    a_h: np.ndarray | None
    generator_invariant: bool
    sampled: dict = field(default_factory=dict)
    note: str = ""

    def __iter__(self):
        yield self.invariant
        yield self.a_h


def check_invariance(model: OuModel, times: Sequence[float] = DEFAULT_TIMES) -> InvarianceResult:
    """Test ``S(t) H ⊆ H`` on sampled times and at generator level."""
    times = list(times)
    if not times:
        raise ModelError("times must be nonempty")
    if model.is_diagonal:
        return InvarianceResult(True, np.diag(-model.a_diag), True, {float(t): True for t in times},
                                "diagonal model")
    tol = model.tol
    i = model.i_factor
    a_h, gen_ok = _in_range_cols(i, model.A @ i, tol)
    sampled = {}
    for t in times:
        _, ok = _in_range_cols(i, model.S(float(t)) @ i, tol)
        sampled[float(t)] = ok
    samp_ok = all(sampled.values())
    note = ""
    if gen_ok and samp_ok:
        note = "generator condition holds, so invariance holds for every t"
    elif gen_ok != samp_ok:
        note = "generator and sampled verdicts disagree; sampled verdict reported"
    return InvarianceResult(samp_ok, a_h if gen_ok else None, gen_ok, sampled, note)


def contraction_criterion(model: OuModel) -> tuple[bool, np.ndarray]:
    """``sym(AQ) <= 0``, i.e. ``<Qx, A^T x> <= 0`` for all x; returns (verdict, sym(AQ))."""
    if model.is_diagonal:
        W = np.diag(-model.a_diag * model.q_diag)
    else:
        W = sym(model.A @ model.Q)
    lam_max = float(np.linalg.eigvalsh(W)[-1])
    scale = max(1.0, float(np.abs(W).max()))
    return lam_max <= model.tol.sym * scale, W


@dataclass(frozen=True)
class RestrictedSemigroup:
    model: OuModel
    a_h: np.ndarray
    invariant: bool
    contraction: bool
    growth_bound: float

    def S_H(self, t: float) -> np.ndarray:
        return expm(self.a_h, t, self.model.tol)

    def norm_H(self, t: float) -> float:
        """Operator norm of ``S_H(t)`` on H."""
        return float(np.linalg.norm(self.S_H(t), 2))

    def normality_defect(self) -> float:
        a = self.a_h
        denom = max(float(np.linalg.norm(a)) ** 2, np.finfo(float).tiny)
        return float(np.linalg.norm(a @ a.T - a.T @ a)) / denom

    def intertwining_defect(self, t: float) -> float:
        """``|S(t) i - i S_H(t)|_F / |i|_F``."""
        i = self.model.i_factor
        return float(np.linalg.norm(self.model.S(t) @ i - i @ self.S_H(t)) / np.linalg.norm(i))


def restrict(model: OuModel, times: Sequence[float] = DEFAULT_TIMES) -> RestrictedSemigroup:
    inv = check_invariance(model, times)
    if not inv.invariant or inv.a_h is None:
        raise ModelError("H is not invariant under the semigroup; S_H does not exist")
    contractive, _ = contraction_criterion(model)
    growth = float(np.max(np.linalg.eigvals(inv.a_h).real))
    return RestrictedSemigroup(model, inv.a_h, True, contractive, growth)


def _gl_integrate(func, t: float, rel: float, max_doublings: int = 12) -> float:
    """Composite Gauss-Legendre integral of a scalar function on [0, t] with panel doubling."""
    prev = None
    for k in range(max_doublings + 1):
        p = 2 ** k
        h = t / p
        nodes = (np.arange(p)[:, None] * h + 0.5 * h * (_GL_NODES + 1.0)[None, :]).reshape(-1)
        w = np.tile(0.5 * h * _GL_WEIGHTS, p)
        cur = float(sum(wk * func(float(s)) for wk, s in zip(w, nodes)))
        if prev is not None and abs(cur - prev) <= rel * max(abs(cur), 1e-300):
            return cur
        prev = cur
    raise QuadratureError("scalar quadrature did not converge", abs(cur - prev))


def _h_coordinates(model: OuModel, h) -> np.ndarray:
    H = build_H(model)
    u, inside = H.coordinates(h)
    if not inside:
        raise NotInSpaceError("h is not in the noise space H")
    return u


@dataclass(frozen=True)
class RegularizationResult:
    """``ht_norm = |S(t)h|_{H_t}``; ``bound = t^-2 int_0^t |S_H(s)h|_H^2 ds`` bounds its square."""

    ht_norm: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.ht_norm ** 2 <= self.bound * (1 + 1e-6) + 1e-300

    def __iter__(self):
        yield self.ht_norm
        yield self.bound


def regularization_estimate(model: OuModel, t: float, h) -> RegularizationResult:
    """Minimum-energy bound for reaching ``S(t)h``.

    The constant control ``u(s) = S_H(s)h / t`` steers 0 to ``S(t)h`` in time t,
    so ``|S(t)h|_{H_t}^2 <= t^-2 int_0^t |S_H(s)h|_H^2 ds``.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    sg = restrict(model)
    u = _h_coordinates(model, h)
    if not np.any(u):
        return RegularizationResult(0.0, 0.0)
    Ht = RkhsSpace.from_gram(gramian(model, t), model.tol)
    ht = Ht.norm(model.S(t) @ (model.i_factor @ u))
    integral = _gl_integrate(lambda s: float(np.sum((sg.S_H(s) @ u) ** 2)), t, 1e-12)
    return RegularizationResult(ht, integral / t ** 2)


@dataclass(frozen=True)
class EnergyIdentity:
    lhs: float
    rhs: float

    @property
    def relative_error(self) -> float:
        return abs(self.lhs - self.rhs) / max(abs(self.rhs), np.finfo(float).tiny) if self.rhs else abs(self.lhs)

    def __iter__(self):
        yield self.lhs
        yield self.rhs


def normal_energy_identity(model: OuModel, t: float, h, rel: float = 1e-10) -> EnergyIdentity:
    """``int_0^t |S_H(s)h|_{H_t}^2 ds`` against ``|h|_H^2`` for a normal ``S_H``."""
    if not t > 0:
        raise ValueError("t must be positive")
    sg = restrict(model)
    defect = sg.normality_defect()
    if defect > model.tol.normal:
        raise NotNormalError(f"restricted generator is not normal (defect {defect:.2e})", defect)
    u = _h_coordinates(model, h)
    rhs = float(u @ u)
    if rhs == 0.0:
        return EnergyIdentity(0.0, 0.0)
    Ht = RkhsSpace.from_gram(gramian(model, t), model.tol)
    i = model.i_factor

    def integrand(s):
        return Ht.norm(i @ (sg.S_H(s) @ u)) ** 2

    return EnergyIdentity(_gl_integrate(integrand, t, rel), rhs)


def kalman_rank(A: np.ndarray, B: np.ndarray, tol: Tolerances | None = None) -> int:
    """Dimension of the controllable subspace, i.e. rank [B, AB, ..., A^{n-1}B].

    Computed by orthonormalized Krylov growth, which avoids the column scaling
    problems of the explicit Kalman matrix.
    """
    return controllable_basis(np.asarray(A, float), np.asarray(B, float), tol or DEFAULT).shape[1]


@dataclass(frozen=True)
class StrongFellerResult:
    """``holds``: ``S(t)E ⊆ H_t`` (null controllability in time t).

    ``invariant_case`` is the verdict of ``S(t)E ⊆ H`` when H is invariant, else None.
    """

    holds: bool
    kalman_rank: int
    domination_M: float
    gramian_rank: int
    invariant_case: bool | None = None

    def __iter__(self):
        yield self.holds
        yield self.kalman_rank
        yield self.domination_M


def _cap(value: float, tol: Tolerances) -> float:
    return math.inf if value > tol.infinity else value


def strong_feller(model: OuModel, t: float) -> StrongFellerResult:
    if not t > 0:
        raise ValueError("t must be positive")
    tol = model.tol
    if model.is_diagonal:
        n = model.n
        a = model.a_diag
        M = _cap(float(np.max(np.exp(-2.0 * a * t) / diagonal_gramian(a, model.q_diag, t))), tol)
        return StrongFellerResult(math.isfinite(M), n, M, n, True)
    S = model.S(t)
    Qt = gramian(model, t)
    res = pencil_sup_ratio(sym(S @ S.T), Qt, tol)
    M = _cap(res.sup_ratio, tol)
    kr = kalman_rank(model.A, model.i_factor, tol)
    inv_case = None
    if check_invariance(model).invariant:
        inv_case = numerical_rank(model.i_factor, tol) == model.n
    return StrongFellerResult(math.isfinite(M), kr, M, numerical_rank(Qt, tol), inv_case)
