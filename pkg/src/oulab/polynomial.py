"""Sparse multivariate polynomials and their Gaussian expectations.

A polynomial in d variables is a dict mapping exponent tuples to
coefficients.  Gaussian moments use Isserlis' pairing formula.
"""

from __future__ import annotations

import math
from functools import lru_cache
from itertools import product
from typing import Dict, Tuple

import numpy as np

Terms = Dict[Tuple[int, ...], complex]


def clean(p: Terms) -> Terms:
    return {e: c for e, c in p.items() if c != 0}


def degree(p: Terms) -> int:
    return max((sum(e) for e, c in p.items() if c != 0), default=0)


def constant(c, d: int) -> Terms:
    return {(0,) * d: c}


def add(p: Terms, q: Terms, scale=1.0) -> Terms:
    out = dict(p)
    for e, c in q.items():
        out[e] = out.get(e, 0) + scale * c
    return clean(out)


def scale(p: Terms, s) -> Terms:
    return clean({e: s * c for e, c in p.items()})


def mul(p: Terms, q: Terms) -> Terms:
    out: Terms = {}
    for (e1, c1), (e2, c2) in product(p.items(), q.items()):
        e = tuple(a + b for a, b in zip(e1, e2))
        out[e] = out.get(e, 0) + c1 * c2
    return clean(out)


def deriv(p: Terms, j: int) -> Terms:
    out: Terms = {}
    for e, c in p.items():
        if e[j]:
            ne = e[:j] + (e[j] - 1,) + e[j + 1:]
            out[ne] = out.get(ne, 0) + c * e[j]
    return clean(out)


def embed(p: Terms, positions, d_new: int) -> Terms:
    """Rename variable j to ``positions[j]`` in a space of ``d_new`` variables."""
    out: Terms = {}
    for e, c in p.items():
        ne = [0] * d_new
        for j, k in enumerate(e):
            ne[positions[j]] += k
        ne = tuple(ne)
        out[ne] = out.get(ne, 0) + c
    return clean(out)


def compose_linear(p: Terms, M: np.ndarray) -> Terms:
    """Substitute ``y = M z``: returns the polynomial in z (M is d x d')."""
    M = np.asarray(M)
    dz = M.shape[1]
    lin = [{tuple(int(i == k) for i in range(dz)): M[j, k] for k in range(dz) if M[j, k] != 0}
           for j in range(M.shape[0])]
    out: Terms = {}
    for e, c in p.items():
        term = constant(c, dz)
        for j, k in enumerate(e):
            for _ in range(k):
                term = mul(term, lin[j])
        out = add(out, term)
    return out


def evaluate(p: Terms, Y: np.ndarray) -> np.ndarray:
    """Values at the rows of Y (N x d)."""
    Y = np.atleast_2d(np.asarray(Y))
    cplx = np.iscomplexobj(Y) or any(np.iscomplexobj(c) for c in p.values())
    out = np.zeros(Y.shape[0], dtype=complex if cplx else float)
    for e, c in p.items():
        v = np.full(Y.shape[0], c, dtype=out.dtype)
        for j, k in enumerate(e):
            if k:
                v = v * Y[:, j] ** k
        out = out + v
    return out


@lru_cache(maxsize=4096)
def _pairings(n: int) -> tuple:
    """All perfect matchings of ``range(n)`` as tuples of pairs."""
    if n == 0:
        return ((),)
    if n % 2:
        return ()
    out = []
    for j in range(1, n):
        rest = [k for k in range(1, n) if k != j]
        for sub in _pairings(n - 2):
            out.append(((0, j),) + tuple((rest[a], rest[b]) for a, b in sub))
    return tuple(out)


def gaussian_moment(expo: Tuple[int, ...], Sigma: np.ndarray) -> float:
    """``E prod_j Z_j^{expo_j}`` for ``Z ~ N(0, Sigma)`` by Isserlis' theorem."""
    idx = [j for j, k in enumerate(expo) for _ in range(k)]
    if len(idx) % 2:
        return 0.0
    total = 0.0
    for pairing in _pairings(len(idx)):
        total += math.prod(Sigma[idx[a], idx[b]] for a, b in pairing)
    return total


def gaussian_smooth(p: Terms, Sigma: np.ndarray) -> Terms:
    """The polynomial ``w -> E p(w + Z)``, ``Z ~ N(0, Sigma)``."""
    out: Terms = {}
    for e, c in p.items():
        for k in product(*(range(a + 1) for a in e)):
            if sum(k) % 2:
                continue
            mom = gaussian_moment(k, Sigma)
            if mom == 0:
                continue
            coef = c * mom * math.prod(math.comb(a, b) for a, b in zip(e, k))
            ne = tuple(a - b for a, b in zip(e, k))
            out[ne] = out.get(ne, 0) + coef
    return clean(out)


def gaussian_expectation(p: Terms, mean: np.ndarray, Sigma: np.ndarray):
    """``E p(Y)`` for ``Y ~ N(mean, Sigma)``."""
    q = gaussian_smooth(p, Sigma)
    if not q:
        return 0.0
    return evaluate(q, np.asarray(mean)[None, :])[0]
