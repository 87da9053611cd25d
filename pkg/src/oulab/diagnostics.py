"""Headline verdicts: spectral gap, selfadjointness, analyticity and their cross-implications."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import Tolerances
from .covariance import check_q_symmetry, gramian, invariant_covariance, lyapunov, whitening
from .errors import MissingCovarianceError
from .linalg import (hermitian_ratio_sup, kernel_basis, numerical_range, pencil_eigvals,
                     pencil_sup_ratio, pseudo_apply, sym)
from .model import OuModel
from .restriction import check_invariance, contraction_criterion, strong_feller
from .rkhs import RkhsSpace, build_H, equivalent_norms, inclusion

GAP_TIMES = (0.5, 1.0, 2.0, 4.0)


def _q_inf(model: OuModel, q_inf: np.ndarray | None) -> np.ndarray:
    if q_inf is not None:
        return q_inf
    X, _, how = invariant_covariance(model)
    if X is None:
        raise MissingCovarianceError(f"Q_inf unavailable ({how})")
    return X


def _cap(value: float, tol: Tolerances) -> float:
    return math.inf if value > tol.infinity else value


# --------------------------------------------------------------------------- S_inf norm


def s_infinity_pencil(model: OuModel, t: float, q_inf: np.ndarray | None = None) -> np.ndarray:
    """Eigenvalues of the pencil ``(S(t) Q_inf S(t)^T, Q_inf)`` on range(Q_inf), descending."""
    X = _q_inf(model, q_inf)
    S = model.S(t)
    return pencil_eigvals(sym(S @ X @ S.T), X, model.tol)


def _positive_diagonal(model: OuModel) -> bool:
    return model.is_diagonal and bool(np.all(model.a_diag > 0))


def s_infinity_norm(model: OuModel, t: float, q_inf: np.ndarray | None = None) -> float:
    """Operator norm of ``S_inf(t)`` on ``H_inf`` (``e^{-t min a}`` for diagonal models)."""
    if q_inf is None and _positive_diagonal(model):
        return math.exp(-t * float(model.a_diag.min()))
    return math.sqrt(max(float(s_infinity_pencil(model, t, q_inf)[0]), 0.0))


# --------------------------------------------------------------------------- gap


@dataclass(frozen=True)
class SpectralGap:
    """``M_star = sup <Q_inf x,x>/<Qx,x>``; a gap is certified iff it is finite.

    ``bound_checks`` maps sampled t to ``(|S_inf(t)|, exp(-t/(2 M_star)), ok)``.
    """

    holds: bool
    M_star: float
    M_star_raw: float
    gap_omega: float | None
    growth_bound_A_infinity: float
    bound_checks: dict = field(default_factory=dict)
    witness: np.ndarray | None = None


def _diagonal_gap(model: OuModel, times: Sequence[float] = GAP_TIMES) -> SpectralGap:
    """``M_star = max 1/(2a)`` and ``|S_inf(t)| = e^{-t min a}`` for a diagonal model."""
    tol = model.tol
    a = model.a_diag
    ratio = 0.5 / a
    k = int(np.argmax(ratio))
    M = _cap(float(ratio[k]), tol)
    witness = np.zeros(model.n)
    witness[k] = 1.0
    a_min = float(a.min())
    checks = {}
    omega = None
    if math.isfinite(M):
        omega = 1.0 / (2.0 * M)
        for t in times:
            nrm, bound = math.exp(-t * a_min), math.exp(-t * omega)
            checks[float(t)] = (nrm, bound, nrm <= bound + 1e-8)
    gap = SpectralGap(math.isfinite(M), M, float(ratio[k]), omega, -a_min, checks, witness)
    return gap


def spectral_gap(model: OuModel, q_inf: np.ndarray | None = None,
                 times: Sequence[float] = GAP_TIMES) -> SpectralGap:
    if q_inf is None and _positive_diagonal(model):
        return _diagonal_gap(model, times)
    X = _q_inf(model, q_inf)
    tol = model.tol
    res = pencil_sup_ratio(X, model.Q, tol)
    M = _cap(res.sup_ratio, tol)
    white = whitening(model, X, tol)
    growth = float(np.max(np.linalg.eigvals(white.restrict(model.A)).real))
    checks = {}
    omega = None
    if math.isfinite(M) and M > 0:
        omega = 1.0 / (2.0 * M)
        for t in times:
            nrm = s_infinity_norm(model, t, X)
            bound = math.exp(-t * omega)
            checks[float(t)] = (nrm, bound, nrm <= bound + 1e-8)
    return SpectralGap(math.isfinite(M), M, res.sup_ratio, omega, growth, checks, res.argmax_vector)


# --------------------------------------------------------------------------- analyticity


@dataclass(frozen=True)
class Analyticity:
    """Three routes to analyticity of the transition semigroup.

    * kernel condition: ``Q A^T v = 0`` for every v in ker Q (necessary);
    * ``C_bound``: smallest C with ``|A Q_inf x|_H <= C |i^T x|``;
    * ``sector_constant_b``: ``sup |Im z| / -Re z`` over the numerical range of
      the whitened adjoint drift, computed exactly as a Hermitian pencil;
      ``sector_constant_sampled`` is the boundary-sampling estimate (a lower bound).
    """

    sector_constant_b: float
    sector_constant_sampled: float
    C_bound: float
    kernel_condition_ok: bool
    verdict: str
    kernel_witness: tuple | None = None
    sector_witness: np.ndarray | None = None
    C_witness: np.ndarray | None = None
    flags: tuple = ()


def kernel_condition(model: OuModel) -> tuple[bool, tuple | None]:
    """``Q A^T v = 0`` on ker Q; returns the worst violating (v, Q A^T v) when it fails."""
    tol = model.tol
    K = kernel_basis(model.Q, tol)
    if K.shape[1] == 0:
        return True, None
    QA = model.Q @ model.A.T
    images = QA @ K
    norms = np.linalg.norm(images, axis=0)
    scale = max(1.0, float(np.linalg.norm(model.Q, 2) * np.linalg.norm(model.A, 2)))
    j = int(np.argmax(norms))
    if norms[j] <= tol.membership * scale:
        return True, None
    v = K[:, j]
    # report a sign-normalized witness for readability
    k = int(np.argmax(np.abs(v)))
    v = v * np.sign(v[k])
    return False, (v, QA @ v)


def c_bound(model: OuModel, q_inf: np.ndarray) -> tuple[float, np.ndarray | None]:
    """``C`` with ``|A Q_inf x|_H <= C |i^T x|``; +inf when ``A Q_inf x`` leaves H."""
    tol = model.tol
    G = model.A @ q_inf
    i = model.i_factor
    cols = []
    for j in range(G.shape[1]):
        r = pseudo_apply(i, G[:, j], tol)
        if not r.in_range:
            e = np.zeros(G.shape[1])
            e[j] = 1.0
            return math.inf, e
        cols.append(r.solution)
    K = np.column_stack(cols)
    res = pencil_sup_ratio(sym(K.T @ K), model.Q, tol)
    C = math.sqrt(res.sup_ratio) if math.isfinite(res.sup_ratio) else math.inf
    return _cap(C, tol), res.argmax_vector


def sector_constant(drift_adjoint: np.ndarray, tol: Tolerances) -> tuple[float, np.ndarray | None]:
    """``sup |Im z*Mz| / -Re z*Mz`` for a dissipative M (exact Hermitian-pencil route)."""
    M = np.asarray(drift_adjoint, dtype=float)
    P = -sym(M)
    w = np.linalg.eigvalsh(P)
    scale = max(1.0, float(np.abs(w).max()))
    if w[0] < -tol.sym * scale:
        return math.inf, None
    skew = 0.5 * (M - M.T)
    res = hermitian_ratio_sup(-1j * skew, P, tol)
    return _cap(res.sup_ratio, tol), res.argmax_vector


def analyticity(model: OuModel, q_inf: np.ndarray | None = None) -> Analyticity:
    tol = model.tol
    X = _q_inf(model, q_inf)
    ok, kw = kernel_condition(model)
    C, c_wit = c_bound(model, X)
    white = whitening(model, X, tol)
    adj = white.restrict(model.A).T
    b, b_wit = sector_constant(adj, tol)
    sampled = numerical_range(adj, tol.range_grid).sector_ratio()
    flags = []
    if math.isfinite(b) != math.isfinite(C):
        flags.append("sector constant and C bound disagree on finiteness")
        verdict = "inconclusive"
    elif math.isfinite(b) and math.isfinite(sampled) and sampled > b * (1 + 1e-6) + 1e-9:
        flags.append("sampled sector ratio exceeds exact value")
        verdict = "inconclusive"
    else:
        verdict = "analytic" if math.isfinite(b) else "not-analytic"
    if not ok:
        verdict = "not-analytic"
    return Analyticity(b, sampled, C, ok, verdict, kw, b_wit, c_wit, tuple(flags))


# --------------------------------------------------------------------------- cross checks


@dataclass(frozen=True)
class CrossCheck:
    name: str
    status: str  # pass | fail | not-applicable
    detail: str = ""


def _bounded_analytic_matrix(a: np.ndarray) -> tuple[bool, float]:
    """``e^{z a}`` bounded on a sector iff the spectrum lies in the open left half-plane
    (finite dimension); returns the verdict and the eigenvalue sector ratio."""
    lam = np.linalg.eigvals(a)
    if np.any(lam.real >= 0):
        return False, math.inf
    return True, float(np.max(np.abs(lam.imag) / -lam.real))


def renorming_certificate(a_h: np.ndarray, tol: Tolerances) -> np.ndarray | None:
    """Positive definite X with ``sym(X a_h) <= 0``, or None when none is found.

    Tries X = I first, then the Lyapunov solution of ``a_h^T X + X a_h = -I``
    (which exists and is positive definite whenever a_h is stable).
    """
    m = a_h.shape[0]
    if np.linalg.eigvalsh(sym(a_h))[-1] <= tol.sym * max(1.0, float(np.abs(a_h).max())):
        return np.eye(m)
    if np.max(np.linalg.eigvals(a_h).real) < 0:
        X = lyapunov(a_h.T, np.eye(m), tol)
        if np.linalg.eigvalsh(X)[0] > 0:
            return X
    return None


def cross_checks(model: OuModel, q_inf: np.ndarray | None = None,
                 ana: Analyticity | None = None, gap: SpectralGap | None = None) -> list[CrossCheck]:
    tol = model.tol
    X = _q_inf(model, q_inf)
    ana = ana or analyticity(model, X)
    gap = gap or spectral_gap(model, X)
    inv = check_invariance(model)
    H = build_H(model)
    Hinf = RkhsSpace.from_gram(X, tol)
    hinf_in_h = inclusion(Hinf, H).included
    out = []

    # (i) P analytic and H_inf inside H  =>  S_H bounded analytic
    if ana.verdict == "analytic" and hinf_in_h:
        if inv.a_h is None:
            out.append(CrossCheck("analytic_P_implies_analytic_SH", "fail", "H is not invariant"))
        else:
            good, ratio = _bounded_analytic_matrix(inv.a_h)
            out.append(CrossCheck("analytic_P_implies_analytic_SH", "pass" if good else "fail",
                                  f"eigenvalue sector ratio of a_h = {ratio:.6g}"))
    else:
        why = "P not analytic" if ana.verdict != "analytic" else "H_inf not contained in H"
        out.append(CrossCheck("analytic_P_implies_analytic_SH", "not-applicable", why))

    # (ii) S_H analytic and contractive in an equivalent Hilbertian norm  =>  P analytic
    cert = renorming_certificate(inv.a_h, tol) if inv.a_h is not None else None
    if cert is None:
        out.append(CrossCheck("renormed_contractive_SH_implies_analytic_P", "not-applicable",
                              "no invariant restriction or no renorming certificate found"))
    else:
        out.append(CrossCheck("renormed_contractive_SH_implies_analytic_P",
                              "pass" if ana.verdict == "analytic" else "fail",
                              f"certificate condition number {np.linalg.cond(cert):.3g}"))

    # kernel condition is necessary for analyticity
    if ana.verdict == "analytic":
        out.append(CrossCheck("analytic_implies_kernel_condition",
                              "pass" if ana.kernel_condition_ok else "fail"))
    else:
        out.append(CrossCheck("analytic_implies_kernel_condition", "not-applicable", "P not analytic"))

    # on invariant models: S_H exponentially stable <=> M_star finite <=> H_t ~ H_inf
    if inv.a_h is not None:
        stable = bool(np.max(np.linalg.eigvals(inv.a_h).real) < 0)
        equiv = all(equivalent_norms(RkhsSpace.from_gram(gramian(model, t), tol), Hinf).equivalent
                    for t in (0.5, 1.0, 2.0))
        agree = stable == gap.holds == equiv
        out.append(CrossCheck("gap_equivalences", "pass" if agree else "fail",
                              f"stable={stable} gap={gap.holds} equivalent_norms={equiv}"))
    else:
        out.append(CrossCheck("gap_equivalences", "not-applicable", "H is not invariant"))
    return out


# --------------------------------------------------------------------------- report


@dataclass(frozen=True)
class DiagnosticsReport:
    model_name: str
    n: int
    m: int
    q_symmetric: bool
    q_symmetry_defect: float
    h_invariant: bool
    s_h_contractive: bool
    hq_infinity: bool
    q_infinity_provenance: str
    spectral_gap: SpectralGap | None
    analyticity: Analyticity | None
    strong_feller_at: dict
    cross_checks: list
    q_infinity: np.ndarray | None = None
    notes: tuple = ()


def _series_note(model: OuModel) -> str | None:
    p = model.params
    if "hq_inf_holds" not in p:
        return None
    return (f"series evidence at N={model.n}: HQ_inf {p['hq_inf_holds']} (sup q/a = {p['hq_inf_ratio']:.6g}), "
            f"trace Q {p['hmu_t_holds']} (sum q = {p['sum_q']:.6g}), "
            f"trace Q_inf {p['hmu_inf_holds']} (sum q/a = {p['sum_q_over_a']:.6g})")


def _analyze_diagonal(model: OuModel, times: Sequence[float]) -> DiagnosticsReport:
    """Closed-form report for ``A = diag(-a)``, ``Q = diag(q)`` with all a_n > 0.

    Here ``Q_inf = diag(q / 2a)``, ``M_star = max 1/(2a)``, ``|S_inf(t)| = e^{-t min a}``,
    the whitened drift is selfadjoint (sector constant 0) and ``C = 1/2``.
    """
    a, q = model.a_diag, model.q_diag
    gap = _diagonal_gap(model)
    ana = Analyticity(0.0, 0.0, 0.5, True, "analytic")
    sf = {float(t): strong_feller(model, float(t)).holds for t in times}
    detail = "selfadjoint diagonal model"
    cc = [CrossCheck("analytic_P_implies_analytic_SH", "pass" if gap.holds else "not-applicable", detail),
          CrossCheck("renormed_contractive_SH_implies_analytic_P", "pass", detail),
          CrossCheck("analytic_implies_kernel_condition", "pass", detail),
          CrossCheck("gap_equivalences", "pass", f"stable=True gap={gap.holds} equivalent_norms=True")]
    notes = ["diagonal model: closed-form verdicts; q_infinity holds the diagonal of Q_inf"]
    series = _series_note(model)
    if series:
        notes.append(series)
    return DiagnosticsReport(model.name, model.n, model.m, True, 0.0, True, True, True, "closed-form-diagonal",
                             gap, ana, sf, cc, q / (2.0 * a), tuple(notes))


def analyze(model: OuModel, times: Sequence[float] = (0.5, 1.0, 2.0)) -> DiagnosticsReport:
    """Run every diagnostic on a model.

    Diagonal models with positive rates get the closed-form report, so large
    truncations never build dense matrices.
    """
    if _positive_diagonal(model):
        return _analyze_diagonal(model, times)
    qs, defect = check_q_symmetry(model)
    inv = check_invariance(model)
    contractive, _ = contraction_criterion(model)
    X, hq, how = invariant_covariance(model)
    sf = {float(t): strong_feller(model, float(t)).holds for t in times}
    notes = []
    gap = ana = None
    checks = []
    if X is None:
        notes.append(f"invariant covariance unavailable ({how}); gap and analyticity skipped")
    else:
        gap = spectral_gap(model, X)
        ana = analyticity(model, X)
        checks = cross_checks(model, X, ana, gap)
    return DiagnosticsReport(model.name, model.n, model.m, qs, defect, inv.invariant,
                             contractive if inv.invariant else False, hq, how, gap, ana, sf,
                             checks, X, tuple(notes))
