"""Hilbert subspaces of state space given by a factor, with minimum-energy norms.

A space with factor ``B`` (n x m) is range(B) with ``|h| = min{|u| : Bu = h}``;
its Gramian ``B B^T`` is the covariance whose reproducing kernel space it is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import DEFAULT, Tolerances
from .covariance import gramian, invariant_covariance
from .errors import MissingCovarianceError, ModelError
from .linalg import as_matrix, pencil_sup_ratio, psd_sqrt, rank_cutoff, sym
from .model import OuModel


class RkhsSpace:
    """range(factor) with the least-norm (minimum energy) norm.

    The SVD of the factor is computed once at construction; all later
    queries only read it.
    """

    def __init__(self, factor, tol: Tolerances = DEFAULT, name: str = ""):
        self.factor = as_matrix(factor, "factor")
        self.tol = tol
        self.name = name
        U, s, Vt = np.linalg.svd(self.factor, full_matrices=False)
        r = 0 if (s.size == 0 or s[0] == 0.0) else int(np.sum(s > rank_cutoff(s, self.factor.shape, tol)))
        self.rank = r
        self._U, self._s, self._V = U[:, :r], s[:r], Vt[:r].T
        self.gram = sym(self.factor @ self.factor.T)

    @classmethod
    def from_gram(cls, G, tol: Tolerances = DEFAULT, name: str = "") -> "RkhsSpace":
        """Space of a PSD covariance, factored by its symmetric square root."""
        return cls(psd_sqrt(as_matrix(G, "gram", square=True), tol), tol, name)

    @property
    def dim(self) -> int:
        return self.factor.shape[0]

    def coordinates(self, h) -> tuple[np.ndarray, bool]:
        """Least-norm ``u`` with ``factor u = h`` and whether h lies in the space."""
        h = np.asarray(h, dtype=float).reshape(-1)
        if h.shape[0] != self.dim:
            raise ModelError(f"vector of length {h.shape[0]} in a space of dimension {self.dim}")
        c = self._U.T @ h
        u = self._V @ (c / self._s)
        resid = float(np.linalg.norm(h - self._U @ c))
        return u, resid <= self.tol.membership * (1.0 + float(np.linalg.norm(h)))

    def contains(self, h) -> bool:
        return self.coordinates(h)[1]

    def norm(self, h) -> float:
        """RKHS norm of h, ``+inf`` when h is outside the space."""
        u, inside = self.coordinates(h)
        return float(np.linalg.norm(u)) if inside else math.inf

    def inner(self, g, h) -> float:
        ug, ing = self.coordinates(g)
        uh, inh = self.coordinates(h)
        if not (ing and inh):
            raise ModelError("inner product needs both vectors in the space")
        return float(ug @ uh)

    def projector(self) -> np.ndarray:
        """Euclidean orthogonal projector onto the span."""
        return self._U @ self._U.T

    def __repr__(self) -> str:
        return f"RkhsSpace({self.name or 'unnamed'}, dim={self.dim}, rank={self.rank})"


def rkhs_norm(space: RkhsSpace, h) -> float:
    return space.norm(h)


def build_H(model: OuModel) -> RkhsSpace:
    return RkhsSpace(model.i_factor, model.tol, name="H")


def build_Ht(model: OuModel, t: float) -> RkhsSpace:
    if not t > 0:
        raise ValueError("t must be positive")
    return RkhsSpace.from_gram(gramian(model, t), model.tol, name=f"H_{t:g}")


def build_Hinf(model: OuModel, q_inf: np.ndarray | None = None) -> RkhsSpace:
    if q_inf is None:
        q_inf, _, how = invariant_covariance(model)
        if q_inf is None:
            raise MissingCovarianceError(f"Q_inf unavailable ({how})")
    return RkhsSpace.from_gram(q_inf, model.tol, name="H_inf")


@dataclass(frozen=True)
class InclusionVerdict:
    """``included`` iff ``constant_M`` is finite; M bounds ``|h|_B^2 <= M |h|_A^2``.

    ``dense`` is True when the two spans coincide and None (unknown) otherwise.
    """

    included: bool
    constant_M: float
    dense: bool | None
    raw_M: float
    witness: np.ndarray | None = None


def _capped(value: float, tol: Tolerances) -> float:
    return math.inf if value > tol.infinity else value


def inclusion(space_a: RkhsSpace, space_b: RkhsSpace) -> InclusionVerdict:
    """Whether space_a sits inside space_b, with the squared embedding constant."""
    if space_a.dim != space_b.dim:
        raise ModelError("spaces live in different ambient dimensions")
    tol = space_b.tol
    res = pencil_sup_ratio(space_a.gram, space_b.gram, tol)
    M = _capped(res.sup_ratio, tol)
    included = math.isfinite(M)
    dense = True if included and space_a.rank == space_b.rank else None
    return InclusionVerdict(included, M, dense, res.sup_ratio, res.argmax_vector)


@dataclass(frozen=True)
class NormEquivalence:
    """``lower |h|_A <= |h|_B <= upper |h|_A`` on the common space."""

    equivalent: bool
    lower: float
    upper: float


def equivalent_norms(space_a: RkhsSpace, space_b: RkhsSpace) -> NormEquivalence:
    ab = inclusion(space_a, space_b)
    ba = inclusion(space_b, space_a)
    upper = math.sqrt(ab.constant_M) if ab.included else math.inf
    lower = 1.0 / math.sqrt(ba.constant_M) if ba.included and ba.constant_M > 0 else 0.0
    return NormEquivalence(ab.included and ba.included, lower, upper)
