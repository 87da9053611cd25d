"""Second quantization on truncated Wiener chaos.

In whitened coordinates ``xi`` of ``H_inf`` the invariant measure is the
standard Gaussian on R^m.  The orthonormal basis is
``h_alpha(xi) = prod_j He_{alpha_j}(xi_j) / sqrt(alpha!)`` and ``Gamma(T)``
sends the Wick monomial in directions ``v_1..v_k`` to the one in
``T v_1..T v_k``.  Its block on chaos k has entries
``perm(T[beta-rows, alpha-cols]) / sqrt(alpha! beta!)``, obtained here as
``J_k^T T^{(x)k} J_k`` with ``J_k`` the isometry onto symmetric tensors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations_with_replacement, permutations

import numpy as np
from numpy.polynomial import hermite_e as He

from .config import Tolerances
from .covariance import Whitening, whitening
from .errors import ModelError
from .model import OuModel

MAX_BLOCK_DIM = 10_000


def multi_indices(m: int, k: int) -> list[tuple[int, ...]]:
    """Multi-indices of total degree k in m variables, graded lexicographic order."""
    out = []
    for combo in combinations_with_replacement(range(m), k):
        alpha = [0] * m
        for j in combo:
            alpha[j] += 1
        out.append(tuple(alpha))
    return out


def _factorial_prod(alpha) -> int:
    return math.prod(math.factorial(a) for a in alpha)


@lru_cache(maxsize=64)
def _symmetric_isometry(m: int, k: int) -> np.ndarray:
    """Columns ``sqrt(alpha!/k!) * sum of e_seq`` over the distinct sequences of type alpha."""
    idx = multi_indices(m, k)
    J = np.zeros((m ** k, len(idx)))
    if k == 0:
        J[0, 0] = 1.0
        return J
    for col, alpha in enumerate(idx):
        base = [j for j, a in enumerate(alpha) for _ in range(a)]
        seqs = set(permutations(base))
        w = math.sqrt(_factorial_prod(alpha) / math.factorial(k))
        for s in seqs:
            J[np.ravel_multi_index(s, (m,) * k), col] = w
    J.setflags(write=False)
    return J


def _apply_modes(T: np.ndarray, J: np.ndarray, k: int, derivation: bool = False) -> np.ndarray:
    """``T^{(x)k} J`` (or the derivation ``sum_l I..T..I`` applied to J) mode by mode."""
    m = T.shape[0]
    D = J.shape[1]
    X = J.reshape((m,) * k + (D,))
    if not derivation:
        for ax in range(k):
            X = np.moveaxis(np.tensordot(T, X, axes=([1], [ax])), 0, ax)
        return X.reshape(m ** k, D)
    acc = np.zeros_like(X)
    for ax in range(k):
        acc += np.moveaxis(np.tensordot(T, X, axes=([1], [ax])), 0, ax)
    return acc.reshape(m ** k, D)


@dataclass(frozen=True)
class ChaosBasis:
    m: int
    K: int

    def __post_init__(self):
        if self.m < 1 or self.K < 0:
            raise ModelError("chaos basis needs m >= 1 and K >= 0")
        if math.comb(self.m + self.K - 1, self.K) > MAX_BLOCK_DIM:
            raise ModelError(f"chaos block of order {self.K} in {self.m} variables exceeds {MAX_BLOCK_DIM}")

    def indices(self, k: int) -> list[tuple[int, ...]]:
        return multi_indices(self.m, k)

    @property
    def multi_indices(self) -> list[tuple[int, ...]]:
        return [a for k in range(self.K + 1) for a in self.indices(k)]

    @property
    def block_sizes(self) -> list[int]:
        return [math.comb(self.m + k - 1, k) for k in range(self.K + 1)]

    @property
    def normalization(self) -> np.ndarray:
        return np.array([1.0 / math.sqrt(_factorial_prod(a)) for a in self.multi_indices])

    def evaluate(self, xi: np.ndarray) -> np.ndarray:
        """Basis functions at points ``xi`` (N x m); returns N x dim."""
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        # table[j][d] = He_d(xi_j)
        table = np.stack([He.hermevander(xi[:, j], self.K) for j in range(self.m)], axis=0)
        cols = []
        for alpha, c in zip(self.multi_indices, self.normalization):
            v = np.full(xi.shape[0], c)
            for j, a in enumerate(alpha):
                if a:
                    v = v * table[j, :, a]
            cols.append(v)
        return np.column_stack(cols)


def gamma_block(T: np.ndarray, k: int) -> np.ndarray:
    T = np.asarray(T, dtype=float)
    m = T.shape[0]
    J = _symmetric_isometry(m, k)
    if k == 0:
        return np.ones((1, 1))
    return J.T @ _apply_modes(T, J, k)


def derivation_block(M: np.ndarray, k: int) -> np.ndarray:
    """Block on chaos k of ``dGamma(M) = d/dh Gamma(e^{hM})`` at h = 0."""
    M = np.asarray(M, dtype=float)
    if k == 0:
        return np.zeros((1, 1))
    J = _symmetric_isometry(M.shape[0], k)
    return J.T @ _apply_modes(M, J, k, derivation=True)


@dataclass(frozen=True)
class ChaosOperator:
    basis: ChaosBasis
    blocks: tuple

    def block(self, k: int) -> np.ndarray:
        return self.blocks[k]

    def matrix(self) -> np.ndarray:
        sizes = self.basis.block_sizes
        out = np.zeros((sum(sizes),) * 2, dtype=self.blocks[0].dtype)
        start = 0
        for B, s in zip(self.blocks, sizes):
            out[start:start + s, start:start + s] = B
            start += s
        return out

    def block_norms(self) -> list[float]:
        return [float(np.linalg.norm(B, 2)) for B in self.blocks]

    def symmetry_defect(self) -> float:
        return max(float(np.abs(B - B.T).max()) for B in self.blocks)

    def apply(self, coeffs: np.ndarray) -> np.ndarray:
        return self.matrix() @ np.asarray(coeffs)

    def compose(self, other: "ChaosOperator") -> "ChaosOperator":
        return ChaosOperator(self.basis, tuple(a @ b for a, b in zip(self.blocks, other.blocks)))


def gamma_operator(C: np.ndarray, basis: ChaosBasis, tol: Tolerances | None = None) -> ChaosOperator:
    """Matrix of ``Gamma(C)`` on chaos orders 0..K."""
    C = np.asarray(C, dtype=float)
    if C.shape != (basis.m, basis.m):
        raise ModelError(f"operator of shape {C.shape} does not match basis dimension {basis.m}")
    slack = 1e-8 if tol is None else max(1e-8, tol.sym)
    if np.linalg.norm(C, 2) > 1 + slack:
        raise ModelError("second quantization needs a contraction")
    return ChaosOperator(basis, tuple(gamma_block(C, k) for k in range(basis.K + 1)))


@dataclass(frozen=True)
class WhitenedSemigroup:
    """``C(t)``: matrix of ``S_inf(t)`` in orthonormal ``H_inf`` coordinates."""

    model: OuModel
    white: Whitening

    @property
    def m(self) -> int:
        return self.white.m

    def C(self, t: float) -> np.ndarray:
        return self.white.restrict(self.model.S(t))

    @property
    def drift(self) -> np.ndarray:
        return self.white.restrict(self.model.A)

    def __iter__(self):
        yield self.m
        yield self.C


def whiten(model: OuModel, q_inf: np.ndarray | None = None) -> WhitenedSemigroup:
    return WhitenedSemigroup(model, whitening(model, q_inf))


def transition_chaos(model: OuModel, t: float, K: int = 3, white: WhitenedSemigroup | None = None) -> ChaosOperator:
    """``P(t) = Gamma(C(t)^T)`` on chaos orders 0..K."""
    w = white or whiten(model)
    return gamma_operator(w.C(t).T, ChaosBasis(w.m, K), model.tol)


def generator_chaos(model: OuModel, K: int = 3, white: WhitenedSemigroup | None = None) -> ChaosOperator:
    """Generator of ``P(t)`` on chaos orders 0..K: ``dGamma`` of the transposed whitened drift."""
    w = white or whiten(model)
    M = w.drift.T
    return ChaosOperator(ChaosBasis(w.m, K), tuple(derivation_block(M, k) for k in range(K + 1)))


@dataclass(frozen=True)
class ChaosSpectrum:
    values: np.ndarray
    gap: float
    from_eigenvalues: bool


def generator_spectrum_chaos(model: OuModel, K: int = 3) -> ChaosSpectrum:
    """Spectrum of the generator on chaos orders 0..K.

    For a diagonalizable whitened drift with eigenvalues ``lam_j`` this is
    ``{sum_j alpha_j lam_j : |alpha| <= K}``; otherwise the eigenvalues of
    the generator blocks are returned and ``from_eigenvalues`` is False.
    """
    w = whiten(model)
    drift = w.drift
    lam, V = np.linalg.eig(drift)
    if np.linalg.cond(V) < model.tol.expm_cond:
        vals = [complex(sum(a * l for a, l in zip(alpha, lam)))
                for k in range(K + 1) for alpha in multi_indices(w.m, k)]
        exact = True
    else:
        G = generator_chaos(model, K, w)
        vals = [complex(v) for B in G.blocks for v in np.linalg.eigvals(B)]
        exact = False
    vals = np.array(vals)
    nonzero = vals[1:]
    gap = float(-np.max(nonzero.real)) if nonzero.size else math.inf
    return ChaosSpectrum(vals, gap, exact)


def hermite_coefficients(coeffs: dict, m: int, K: int) -> np.ndarray:
    """Coefficients in the orthonormal basis of a polynomial in ``xi``.

    ``coeffs`` maps exponent tuples (length m) to monomial coefficients.
    Raises when the degree exceeds K.
    """
    basis = ChaosBasis(m, K)
    pos = {a: n for n, a in enumerate(basis.multi_indices)}
    norm = basis.normalization
    out = np.zeros(len(pos))
    for expo, c in coeffs.items():
        if sum(expo) > K:
            raise ModelError(f"polynomial degree {sum(expo)} exceeds chaos order {K}")
        per_coord = [He.poly2herme([0.0] * e + [1.0]) for e in expo]
        # expand the product of per-coordinate Hermite series
        terms = {(): c}
        for series in per_coord:
            nxt = {}
            for key, val in terms.items():
                for d, s in enumerate(series):
                    if s != 0.0:
                        nk = key + (d,)
                        nxt[nk] = nxt.get(nk, 0.0) + val * s
            terms = nxt
        for alpha, val in terms.items():
            out[pos[alpha]] += val / norm[pos[alpha]]
    return out

