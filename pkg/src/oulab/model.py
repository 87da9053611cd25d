"""The OU model ``dX = AX dt + dW_H`` and builders for the standard examples."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence, Union

import numpy as np

from .config import DEFAULT, Tolerances
from .errors import ModelError
from .linalg import as_matrix, expm, psd_eig

SequenceRule = Union[Callable[[np.ndarray], np.ndarray], Sequence[float], np.ndarray, "PowerLaw"]


class OuModel:
    """Drift ``A`` (n x n) and injective noise embedding ``i_factor`` (n x m).

    The noise covariance is ``Q = i i^T`` and the Cameron-Martin space H is
    range(i) with ``|i u|_H = |u|``.  Diagonal models keep their diagonals
    and only build dense matrices on first access, so truncations with very
    large N stay cheap as long as nothing dense is requested.
    """

    def __init__(self, A, i_factor, name: str = "model", kind: str = "dense",
                 params: dict | None = None, tol: Tolerances = DEFAULT):
        self.name = name
        self.kind = kind
        self.params = dict(params or {})
        self.tol = tol
        self._A = as_matrix(A, "A", square=True)
        self._i = as_matrix(i_factor, "i_factor")
        if self._i.shape[0] != self._A.shape[0]:
            raise ModelError(f"i_factor has {self._i.shape[0]} rows but A is {self._A.shape[0]}x{self._A.shape[0]}")
        s = np.linalg.svd(self._i, compute_uv=False)
        if self._i.shape[1] > self._i.shape[0] or s[-1] <= tol.rank * s[0] * max(self._i.shape):
            raise ModelError("i_factor must be injective (full column rank)")
        self._a_diag = None
        self._q_diag = None

    @classmethod
    def diagonal(cls, a: np.ndarray, q: np.ndarray, name: str = "diagonal",
                 params: dict | None = None, tol: Tolerances = DEFAULT) -> "OuModel":
        """Model with ``A = diag(-a)`` and ``Q = diag(q)``, stored lazily."""
        a = np.asarray(a, dtype=float).reshape(-1)
        q = np.asarray(q, dtype=float).reshape(-1)
        if a.shape != q.shape or a.size == 0:
            raise ModelError("a and q must be nonempty sequences of equal length")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(q))):
            raise ModelError("a and q must be finite")
        if np.any(q <= 0):
            raise ModelError("q_n must be strictly positive")
        obj = cls.__new__(cls)
        obj.name = name
        obj.kind = "diagonal"
        obj.params = dict(params or {})
        obj.tol = tol
        obj._A = None
        obj._i = None
        obj._a_diag = a
        obj._q_diag = q
        return obj

    @classmethod
    def from_covariance(cls, A, Q, name: str = "model", tol: Tolerances = DEFAULT, **kw) -> "OuModel":
        """Factor a PSD noise covariance into an injective embedding and build the model."""
        Q = as_matrix(Q, "Q", square=True)
        lam, U = psd_eig(Q, tol)
        if lam.size == 0:
            raise ModelError("noise covariance is zero")
        return cls(A, U * np.sqrt(lam), name=name, tol=tol, **kw)

    # ---- dense views

    @cached_property
    def A(self) -> np.ndarray:
        if self._A is None:
            return np.diag(-self._a_diag)
        return self._A

    @cached_property
    def i_factor(self) -> np.ndarray:
        if self._i is None:
            return np.diag(np.sqrt(self._q_diag))
        return self._i

    @cached_property
    def Q(self) -> np.ndarray:
        if self._q_diag is not None:
            return np.diag(self._q_diag)
        return self.i_factor @ self.i_factor.T

    @property
    def n(self) -> int:
        return self._a_diag.size if self._a_diag is not None else self._A.shape[0]

    @property
    def m(self) -> int:
        return self._a_diag.size if self._a_diag is not None else self._i.shape[1]

    @property
    def is_diagonal(self) -> bool:
        return self._a_diag is not None

    @property
    def a_diag(self) -> np.ndarray | None:
        return self._a_diag

    @property
    def q_diag(self) -> np.ndarray | None:
        return self._q_diag

    def S(self, t: float) -> np.ndarray:
        """Semigroup operator ``e^{tA}``."""
        if self._a_diag is not None:
            return np.diag(np.exp(-t * self._a_diag))
        return expm(self.A, t, self.tol)

    def is_hurwitz(self) -> bool:
        if self._a_diag is not None:
            return bool(np.all(self._a_diag > 0))
        return bool(np.max(np.linalg.eigvals(self.A).real) < 0)

    def __repr__(self) -> str:
        return f"OuModel(name={self.name!r}, kind={self.kind!r}, n={self.n}, m={self.m})"


# --------------------------------------------------------------------------- sequences


@dataclass(frozen=True)
class PowerLaw:
    """The sequence ``c * n**(-p)`` for n = 1, 2, ..."""

    c: float = 1.0
    p: float = 1.0

    def __call__(self, n: np.ndarray) -> np.ndarray:
        return self.c * np.asarray(n, dtype=float) ** (-self.p)


def materialize(rule: SequenceRule, N: int) -> np.ndarray:
    n = np.arange(1, N + 1, dtype=float)
    if callable(rule):
        vals = np.asarray(rule(n), dtype=float)
    else:
        vals = np.asarray(rule, dtype=float).reshape(-1)
        if vals.size < N:
            raise ModelError(f"sequence has {vals.size} entries, need {N}")
        vals = vals[:N]
    if vals.shape != (N,):
        raise ModelError("sequence rule must produce one value per index")
    return vals


@dataclass(frozen=True)
class SeriesVerdict:
    """Partial-sum evidence for convergence of a positive series at truncation N.

    ``tail_ratio`` compares the last dyadic block sum with the previous one:
    about ``2**(1-p)`` for terms ``n**-p``.  Values below 0.95 are read as
    convergent; 1 (logarithmic growth) or more as divergent.
    """

    partial_sum: float
    half_sum: float
    tail_ratio: float
    converges: bool


def series_verdict(terms: np.ndarray) -> SeriesVerdict:
    N = terms.size
    c = np.cumsum(terms)
    total = float(c[-1])
    if N < 4:
        return SeriesVerdict(total, float(c[(N - 1) // 2]), 0.0, True)
    s4, s2 = float(c[N // 4 - 1]), float(c[N // 2 - 1])
    last, prev = total - s2, s2 - s4
    ratio = 0.0 if last == 0.0 else (math.inf if prev == 0.0 else last / prev)
    return SeriesVerdict(total, s2, ratio, ratio < 0.95)


def sup_verdict(values: np.ndarray) -> tuple[float, bool]:
    """Supremum at truncation and whether it is already attained in the first half."""
    N = values.size
    sup_all = float(values.max())
    sup_half = float(values[: max(1, N // 2)].max())
    return sup_all, sup_all <= sup_half * (1 + 1e-9)


def diagonal_hypotheses(q: np.ndarray, a: np.ndarray) -> dict:
    """Series evidence for (HQ_inf), (Hmu_t) and (Hmu_inf) of a diagonal model."""
    ratio, bounded = sup_verdict(q / a)
    trace_q = series_verdict(q)
    mu_inf = series_verdict(q / a)
    return {
        "hq_inf_ratio": ratio,
        "hq_inf_holds": bounded,
        "sum_q": trace_q.partial_sum,
        "hmu_t_holds": trace_q.converges,
        "sum_q_over_a": mu_inf.partial_sum,
        "sum_q_over_a_tail_ratio": mu_inf.tail_ratio,
        "hmu_inf_holds": mu_inf.converges,
        "trace_q_inf": float(np.sum(q / (2 * a))),
    }


# --------------------------------------------------------------------------- builders


def build_paper_2x2() -> OuModel:
    """Jordan drift ``[[-1, 1], [0, -1]]`` with noise only in the second coordinate."""
    A = np.array([[-1.0, 1.0], [0.0, -1.0]])
    i = np.array([[0.0], [1.0]])
    return OuModel(A, i, name="paper-2x2", kind="builtin")


def build_decoupled() -> OuModel:
    """``A = -I_2`` with noise only in the first coordinate (not null controllable)."""
    return OuModel(-np.eye(2), np.array([[1.0], [0.0]]), name="decoupled", kind="builtin")


def build_diagonal(q: SequenceRule, a: SequenceRule, N: int, name: str = "diagonal") -> OuModel:
    """Truncated diagonal model ``Q e_n = q_n e_n``, ``A e_n = -a_n e_n``, n <= N."""
    if N < 1:
        raise ModelError("N must be >= 1")
    qv = materialize(q, N)
    av = materialize(a, N)
    if np.any(qv <= 0) or np.any(av <= 0):
        raise ModelError("q_n and a_n must be strictly positive")
    params = {"N": N, **diagonal_hypotheses(qv, av)}
    for key, rule in (("q_rule", q), ("a_rule", a)):
        if isinstance(rule, PowerLaw):
            params[key] = {"rule": "power", "c": rule.c, "p": rule.p}
    return OuModel.diagonal(av, qv, name=name, params=params)


def build_heat_spectral(beta: float, N: int) -> OuModel:
    """Spectral truncation of the 1-d Dirichlet heat equation with noise space ``H_0^beta``.

    Eigenvalues ``a_n = (n pi)^2``; ``q_n = (n pi)^(-2 beta)``.
    """
    if beta < 0:
        raise ModelError("beta must be nonnegative")
    d = 1
    model = build_diagonal(lambda n: (n * math.pi) ** (-2.0 * beta), lambda n: (n * math.pi) ** 2, N,
                           name=f"heat-beta{beta:g}")
    model.params.update(beta=beta, dimension=d, beta_threshold=d / 4 - 0.5,
                        beta_above_threshold=beta > d / 4 - 0.5)
    return model


BUILTINS: dict[str, Callable[[], OuModel]] = {
    "paper-2x2": build_paper_2x2,
    "decoupled": build_decoupled,
    "diagonal-harmonic": lambda: build_diagonal(PowerLaw(1, 2), PowerLaw(1, 1), 20, name="diagonal-harmonic"),
    "diagonal-cubic": lambda: build_diagonal(PowerLaw(1, 3), PowerLaw(1, 1), 20, name="diagonal-cubic"),
    "heat": lambda: build_heat_spectral(1.0, 10),
    "scalar": lambda: OuModel([[-1.0]], [[1.0]], name="scalar", kind="builtin"),
}

BUILTIN_DESCRIPTIONS = {
    "paper-2x2": "A=[[-1,1],[0,-1]], Q=diag(0,1): H not invariant, no spectral gap, P not analytic",
    "decoupled": "A=-I, Q=diag(1,0): second coordinate noiseless, strong Feller fails",
    "diagonal-harmonic": "q_n=1/n^2, a_n=1/n, N=20",
    "diagonal-cubic": "q_n=1/n^3, a_n=1/n, N=20",
    "heat": "1-d heat equation, noise space H_0^1, 10 modes",
    "scalar": "a=1, q=1",
}


def builtin(name: str) -> OuModel:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise ModelError(f"unknown builtin {name!r}; choose from {sorted(BUILTINS)}") from None
