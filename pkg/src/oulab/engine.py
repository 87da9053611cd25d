"""The OU process: exact Gaussian sampling, transition semigroup and generator.

Cylindrical functions are ``f(x) = phi(<x, x_1>, ..., <x, x_d>)`` with phi a
polynomial (closed-form Gaussian calculus up to degree 4) or a single
complex exponential ``amp * exp(i <x, xi>)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import polynomial as poly
from .covariance import diagonal_gramian, gramian, invariant_covariance
from .errors import MissingCovarianceError, ModelError, NumericalError, UnsupportedFunctionError
from .linalg import as_matrix, sym
from .model import OuModel

EXACT_MAX_DEGREE = 4
CHUNK = 4096


class CylindricalFunction:
    """``phi(D x)`` with D the d x n matrix of directions (rows), or an exponential marker."""

    def __init__(self, directions, terms: dict | None = None, *, exp_amplitude: complex | None = None):
        D = as_matrix(directions, "directions")
        self.directions = D
        if exp_amplitude is not None:
            if D.shape[0] != 1:
                raise ModelError("an exponential marker takes exactly one direction")
            self.kind = "exponential"
            self.amplitude = complex(exp_amplitude)
            self.terms = None
            return
        if terms is None:
            raise ModelError("polynomial cylindrical function needs terms")
        d = D.shape[0]
        clean = {}
        for e, c in terms.items():
            e = tuple(int(k) for k in e)
            if len(e) != d or min(e, default=0) < 0:
                raise ModelError(f"exponent {e} does not match {d} directions")
            if not np.isfinite(c):
                raise ModelError("polynomial coefficients must be finite")
            clean[e] = clean.get(e, 0) + c
        self.kind = "polynomial"
        self.terms = poly.clean(clean)
        self.amplitude = None

    # ---- constructors

    @classmethod
    def constant(cls, c: float, n: int) -> "CylindricalFunction":
        return cls(np.zeros((1, n)), {(0,): c})

    @classmethod
    def linear(cls, x_star) -> "CylindricalFunction":
        return cls(np.atleast_2d(np.asarray(x_star, float)), {(1,): 1.0})

    @classmethod
    def power(cls, x_star, k: int) -> "CylindricalFunction":
        return cls(np.atleast_2d(np.asarray(x_star, float)), {(k,): 1.0})

    @classmethod
    def product(cls, x1, x2) -> "CylindricalFunction":
        return cls(np.vstack([np.asarray(x1, float), np.asarray(x2, float)]), {(1, 1): 1.0})

    @classmethod
    def exponential(cls, xi, amplitude: complex = 1.0) -> "CylindricalFunction":
        return cls(np.atleast_2d(np.asarray(xi, float)), exp_amplitude=amplitude)

    # ---- queries

    @property
    def n(self) -> int:
        return self.directions.shape[1]

    @property
    def d(self) -> int:
        return self.directions.shape[0]

    @property
    def degree(self) -> int | None:
        return None if self.kind == "exponential" else poly.degree(self.terms)

    def __call__(self, x):
        X = np.atleast_2d(np.asarray(x, dtype=float))
        if X.shape[1] != self.n:
            raise ModelError(f"point of dimension {X.shape[1]} for a function on R^{self.n}")
        Y = X @ self.directions.T
        if self.kind == "exponential":
            vals = self.amplitude * np.exp(1j * Y[:, 0])
        else:
            vals = poly.evaluate(self.terms, Y)
        return vals[0] if np.ndim(x) == 1 else vals

    def __repr__(self) -> str:
        if self.kind == "exponential":
            return f"CylindricalFunction(exp, n={self.n}, amplitude={self.amplitude})"
        return f"CylindricalFunction(poly, d={self.d}, n={self.n}, degree={self.degree})"


def _require_exact(f: CylindricalFunction, max_degree: int = EXACT_MAX_DEGREE) -> None:
    if f.kind == "polynomial" and f.degree > max_degree:
        raise UnsupportedFunctionError(
            f"closed-form evaluation supports polynomial degree <= {max_degree}, got {f.degree}")


def _check_dims(model: OuModel, f: CylindricalFunction) -> None:
    if f.n != model.n:
        raise ModelError(f"function on R^{f.n} for a model on R^{model.n}")


# --------------------------------------------------------------------------- transition


def transition_function(model: OuModel, f: CylindricalFunction, t: float,
                        Qt: np.ndarray | None = None) -> CylindricalFunction:
    """``P(t)f`` as a cylindrical function (closed form)."""
    _check_dims(model, f)
    _require_exact(f)
    if t == 0:
        return f
    if not t > 0:
        raise ValueError("t must be nonnegative")
    S = model.S(t)
    Qt = gramian(model, t) if Qt is None else Qt
    D = f.directions
    if f.kind == "exponential":
        xi = D[0]
        amp = f.amplitude * math.exp(-0.5 * float(xi @ Qt @ xi))
        return CylindricalFunction.exponential(S.T @ xi, amp)
    Sigma = sym(D @ Qt @ D.T)
    terms = poly.gaussian_smooth(f.terms, Sigma)
    if not terms:
        terms = {(0,) * f.d: 0.0}
    return CylindricalFunction(D @ S, terms)


@dataclass(frozen=True)
class MonteCarloEstimate:
    value: complex
    stderr: float
    count: int


def transition_apply(model: OuModel, f: CylindricalFunction, x, t: float, mode: str = "exact",
                     count: int = 10_000, seed: int = 0):
    """``P(t)f(x) = E f(S(t)x + Y)``, ``Y ~ N(0, Q_t)``.

    ``mode="exact"`` uses closed-form Gaussian moments; ``mode="montecarlo"``
    returns the sample mean (see :func:`transition_montecarlo` for the
    standard error).
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if mode == "exact":
        return transition_function(model, f, t)(x)
    if mode == "montecarlo":
        return transition_montecarlo(model, f, x, t, count, seed).value
    raise ModelError(f"unknown mode {mode!r}")


def transition_montecarlo(model: OuModel, f: CylindricalFunction, x, t: float,
                          count: int = 10_000, seed: int = 0) -> MonteCarloEstimate:
    _check_dims(model, f)
    X = sample_transition(model, x, t, count, seed)
    vals = f(X)
    mean = vals.mean()
    err = float(np.sqrt(np.mean(np.abs(vals - mean) ** 2) / max(count - 1, 1)))
    return MonteCarloEstimate(complex(mean) if np.iscomplexobj(vals) else float(mean), err, count)


# --------------------------------------------------------------------------- sampling


def psd_factor(G: np.ndarray, rel_neg: float = 1e-10) -> np.ndarray:
    """Symmetric square root of a covariance; rejects eigenvalues below ``-rel_neg * lam_max``."""
    w, V = np.linalg.eigh(sym(G))
    top = max(float(w[-1]), 0.0)
    if w[0] < -rel_neg * top:
        raise NumericalError(f"covariance is indefinite: eigenvalue {w[0]:.3e}")
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


def standard_normals(seed: int, count: int, dim: int, stream: int = 0) -> np.ndarray:
    """``count x dim`` standard normals; block c of CHUNK rows comes from the stream
    keyed by ``(seed, stream, c)``, so any subset of blocks can be produced independently."""
    out = np.empty((count, dim))
    for c, start in enumerate(range(0, count, CHUNK)):
        stop = min(start + CHUNK, count)
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(stream, c)))
        out[start:stop] = rng.standard_normal((stop - start, dim))
    return out


def sample_transition(model: OuModel, x, t: float, count: int, seed: int) -> np.ndarray:
    """``count`` draws of ``X(t)`` given ``X(0) = x``: ``S(t)x + L z`` with ``L L^T = Q_t``."""
    if not t > 0:
        raise ValueError("t must be positive")
    if count < 1:
        raise ModelError("count must be positive")
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != model.n:
        raise ModelError(f"start point of dimension {x.size} for a model on R^{model.n}")
    Z = standard_normals(seed, count, model.n)
    if model.is_diagonal:
        std = np.sqrt(diagonal_gramian(model.a_diag, model.q_diag, t))
        return np.exp(-t * model.a_diag) * x + Z * std
    L = psd_factor(gramian(model, t))
    return model.S(t) @ x + Z @ L.T


@dataclass(frozen=True)
class SamplePath:
    times: np.ndarray
    states: np.ndarray
    seed: int


def _step(model: OuModel, dt: float):
    """Exact one-step map ``(x, z) -> S(dt)x + L z`` with ``L L^T = Q_dt``."""
    if model.is_diagonal:
        decay = np.exp(-dt * model.a_diag)
        std = np.sqrt(diagonal_gramian(model.a_diag, model.q_diag, dt))
        return lambda x, z: decay * x + std * z
    S, L = model.S(dt), psd_factor(gramian(model, dt))
    return lambda x, z: S @ x + L @ z


def sample_path(model: OuModel, x0, times: Sequence[float], seed: int) -> SamplePath:
    """Exact path on a grid: ``X(t_k+1) = S(dt) X(t_k) + N(0, Q_dt)``, started at time 0."""
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0 or times[0] < 0 or np.any(np.diff(times) < 0):
        raise ModelError("times must be a nonempty nondecreasing grid in [0, inf)")
    x = np.asarray(x0, dtype=float).reshape(-1)
    if x.size != model.n:
        raise ModelError(f"start point of dimension {x.size} for a model on R^{model.n}")
    states = np.empty((times.size, model.n))
    prev = 0.0
    cache = {}
    for k, t in enumerate(times):
        dt = float(t - prev)
        if dt > 0:
            if dt not in cache:
                cache[dt] = _step(model, dt)
            x = cache[dt](x, standard_normals(seed, 1, model.n, stream=k + 1)[0])
        states[k] = x
        prev = float(t)
    return SamplePath(times, states, seed)


# --------------------------------------------------------------------------- generator


def generator_function(model: OuModel, f: CylindricalFunction) -> CylindricalFunction:
    """``L_0 f`` for polynomial f as a cylindrical polynomial in the directions ``[D; D A]``.

    ``L_0 f(x) = 1/2 sum_jk <Q x_j, x_k> d_j d_k phi + sum_j <x, A^T x_j> d_j phi``.
    """
    _check_dims(model, f)
    if f.kind != "polynomial":
        raise UnsupportedFunctionError("generator_function needs a polynomial")
    D = f.directions
    d = f.d
    G = D @ model.Q @ D.T
    ext = np.vstack([D, D @ model.A])
    first = list(range(d))
    out: dict = {}
    for j in range(d):
        dj = poly.deriv(f.terms, j)
        for k in range(d):
            if G[j, k] != 0:
                out = poly.add(out, poly.embed(poly.deriv(dj, k), first, 2 * d), 0.5 * G[j, k])
        zj = {tuple(int(i == d + j) for i in range(2 * d)): 1.0}
        out = poly.add(out, poly.mul(poly.embed(dj, first, 2 * d), zj))
    if not out:
        out = {(0,) * (2 * d): 0.0}
    return CylindricalFunction(ext, out)


def generator_apply(model: OuModel, f: CylindricalFunction, x):
    """``L_0 f(x)``."""
    _check_dims(model, f)
    x = np.asarray(x, dtype=float).reshape(-1)
    if f.kind == "exponential":
        xi = f.directions[0]
        return f(x) * (-0.5 * float(xi @ model.Q @ xi) + 1j * float(x @ model.A.T @ xi))
    return generator_function(model, f)(x)


# --------------------------------------------------------------------------- invariant measure


def _stacked(fs: Sequence[CylindricalFunction]):
    """Common direction matrix for several polynomials and their re-embedded terms."""
    D = np.vstack([f.directions for f in fs])
    out, offset = [], 0
    for f in fs:
        out.append(poly.embed(f.terms, list(range(offset, offset + f.d)), D.shape[0]))
        offset += f.d
    return D, out


def stationary_expectation(model: OuModel, f: CylindricalFunction, q_inf: np.ndarray | None = None):
    """``int f d mu_inf`` with ``mu_inf = N(0, Q_inf)``."""
    X = _require_q_inf(model, q_inf)
    D = f.directions
    if f.kind == "exponential":
        return f.amplitude * math.exp(-0.5 * float(D[0] @ X @ D[0]))
    _require_exact(f)
    return poly.gaussian_expectation(f.terms, np.zeros(f.d), sym(D @ X @ D.T))


def _require_q_inf(model: OuModel, q_inf):
    if q_inf is not None:
        return q_inf
    X, _, how = invariant_covariance(model)
    if X is None:
        raise MissingCovarianceError(f"Q_inf unavailable ({how})")
    return X


@dataclass(frozen=True)
class IbpResult:
    lhs: float
    rhs: float

    @property
    def passes(self) -> bool:
        return abs(self.lhs - self.rhs) <= 1e-8 * (1 + abs(self.lhs))

    def __iter__(self):
        yield self.lhs
        yield self.rhs


def ibp_check(model: OuModel, f: CylindricalFunction, g: CylindricalFunction,
              q_inf: np.ndarray | None = None) -> IbpResult:
    """``int (f Lg + g Lf) d mu_inf`` against ``-int [D_H f, D_H g]_H d mu_inf``."""
    for h in (f, g):
        _check_dims(model, h)
        if h.kind != "polynomial" or h.degree > 2:
            raise UnsupportedFunctionError("integration by parts is closed-form for polynomials of degree <= 2")
    X = _require_q_inf(model, q_inf)
    Lf, Lg = generator_function(model, f), generator_function(model, g)
    D, (pf, pg, pLf, pLg) = _stacked([f, g, Lf, Lg])
    Sigma = sym(D @ X @ D.T)
    zero = np.zeros(D.shape[0])
    lhs_poly = poly.add(poly.mul(pf, pLg), poly.mul(pg, pLf))
    lhs = poly.gaussian_expectation(lhs_poly, zero, Sigma) if lhs_poly else 0.0
    # carre du champ: sum_jk d_j phi_f d_k phi_g <Q x_j, y_k>
    Gfg = f.directions @ model.Q @ g.directions.T
    rhs_poly: dict = {}
    for j in range(f.d):
        dfj = poly.embed(poly.deriv(f.terms, j), list(range(f.d)), D.shape[0])
        for k in range(g.d):
            if Gfg[j, k] == 0:
                continue
            dgk = poly.embed(poly.deriv(g.terms, k), list(range(f.d, f.d + g.d)), D.shape[0])
            rhs_poly = poly.add(rhs_poly, poly.mul(dfj, dgk), Gfg[j, k])
    rhs = -poly.gaussian_expectation(rhs_poly, zero, Sigma) if rhs_poly else 0.0
    return IbpResult(float(np.real(lhs)), float(np.real(rhs)))


# --------------------------------------------------------------------------- consistency


@dataclass(frozen=True)
class GeneratorConsistency:
    hs: tuple
    errors: tuple
    generator_value: complex
    order: float


def generator_consistency(model: OuModel, f: CylindricalFunction, x,
                          hs: Sequence[float] = tuple(2.0 ** -k for k in range(6, 13))) -> GeneratorConsistency:
    """Difference quotients ``(P(h)f(x) - f(x))/h`` against ``L_0 f(x)``.

    ``order`` is the least-squares slope of log error against log h; it is
    +inf when every error is at rounding level.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    target = generator_apply(model, f, x)
    f0 = f(x)
    errs = []
    for h in hs:
        q = (transition_apply(model, f, x, h) - f0) / h
        errs.append(float(abs(q - target)))
    errs_arr = np.array(errs)
    scale = max(1.0, abs(target), abs(f0))
    floor = 1e-12 * scale / min(hs)
    usable = errs_arr > floor
    if usable.sum() < 2:
        order = math.inf
    else:
        order = float(np.polyfit(np.log(np.asarray(hs)[usable]), np.log(errs_arr[usable]), 1)[0])
    return GeneratorConsistency(tuple(hs), tuple(errs), target, order)

