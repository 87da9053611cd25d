"""Random model generators and independent oracles shared by the test modules."""

import math

import numpy as np

from oulab.model import OuModel


def random_stable(rng, n, m=None, margin=0.3):
    """Random drift shifted so the spectral abscissa is at most -margin, random injective noise."""
    m = n if m is None else m
    A = rng.normal(size=(n, n))
    A -= (np.max(np.linalg.eigvals(A).real) + margin + rng.uniform(0, 0.5)) * np.eye(n)
    i = rng.normal(size=(n, m))
    return OuModel(A, i, name="random-stable")


def random_q_symmetric(rng, n, full_rank=True):
    """``A = -P Q^+`` on range(Q) with P, Q positive: then AQ = -P is symmetric."""
    if full_rank:
        i = rng.normal(size=(n, n)) + 2 * np.eye(n)
        Q = i @ i.T
        B = rng.normal(size=(n, n))
        P = B @ B.T + 0.5 * np.eye(n)
        A = -P @ np.linalg.inv(Q)
        return OuModel(A, i, name="random-q-symmetric")
    # rank-deficient noise: symmetric negative definite A commuting with Q
    k = max(1, n - 1)
    O, _ = np.linalg.qr(rng.normal(size=(n, n)))
    q = np.concatenate([rng.uniform(0.5, 2.0, k), np.zeros(n - k)])
    a = rng.uniform(0.5, 3.0, n)
    A = -(O * a) @ O.T
    i = (O * np.sqrt(q))[:, :k]
    return OuModel(A, i, name="random-q-symmetric-deficient")


def random_invariant(rng, n, m, contractive=None):
    """Model with ``A i = i a_h`` for a chosen ``a_h`` (so H is invariant).

    ``contractive`` True forces sym(a_h) <= 0 (with a margin), False forces
    a positive eigenvalue of sym(a_h) of size at least 0.1, None leaves it random.
    """
    i = rng.normal(size=(n, m))
    K = rng.normal(size=(m, m))
    K = K - K.T
    B = rng.normal(size=(m, m))
    P = B @ B.T
    if contractive is True:
        P += 0.05 * np.eye(m)
    elif contractive is False:
        w, V = np.linalg.eigh(P)
        w[0] = -0.1 - rng.uniform(0, 0.5)
        P = (V * w) @ V.T
    a_h = K - P
    W = rng.normal(size=(n, n - m))
    T = np.hstack([i, W])
    top = np.hstack([a_h, rng.normal(size=(m, n - m))])
    bot = np.hstack([np.zeros((n - m, m)), -np.eye(n - m) + 0.3 * rng.normal(size=(n - m, n - m))])
    A = T @ np.vstack([top, bot]) @ np.linalg.inv(T)
    return OuModel(A, i, name="random-invariant"), a_h


def random_normal_model(rng, n, m):
    """Invariant model whose restricted generator is normal and stable."""
    V, _ = np.linalg.qr(rng.normal(size=(n, n)))
    Vi, Vc = V[:, :m], V[:, m:]
    c = rng.uniform(0.5, 2.0)
    O, _ = np.linalg.qr(rng.normal(size=(m, m)))
    blocks = np.zeros((m, m))
    j = 0
    while j < m:
        if j + 1 < m and rng.uniform() < 0.5:
            re, im = -rng.uniform(0.2, 2.0), rng.uniform(-2, 2)
            blocks[j:j + 2, j:j + 2] = [[re, im], [-im, re]]
            j += 2
        else:
            blocks[j, j] = -rng.uniform(0.2, 2.0)
            j += 1
    a_h = O @ blocks @ O.T
    A = Vi @ a_h @ Vi.T - Vc @ Vc.T
    return OuModel(A, c * Vi, name="random-normal"), a_h


def taylor_expm(A, t=1.0, terms=20):
    """Oracle: scaled Taylor series of e^{tA} with repeated squaring."""
    M = t * np.asarray(A, dtype=float)
    s = max(0, int(math.ceil(math.log2(max(np.linalg.norm(M, 1), 1e-300)))) + 1)
    M = M / 2 ** s
    E = np.eye(M.shape[0])
    term = np.eye(M.shape[0])
    for k in range(1, terms + 1):
        term = term @ M / k
        E = E + term
    for _ in range(s):
        E = E @ E
    return E


def quadvec_gramian(model, t):
    """Oracle: adaptive vector quadrature of S(s) Q S(s)^T from scipy."""
    from scipy.integrate import quad_vec
    from scipy.linalg import expm as sexpm

    def integrand(s):
        F = sexpm(s * model.A) @ model.i_factor
        return (F @ F.T).ravel()

    val, _ = quad_vec(integrand, 0.0, t, epsabs=1e-13, epsrel=1e-12)
    return val.reshape(model.n, model.n)


def permanent(M):
    """Oracle: permanent by summing over all permutations."""
    from itertools import permutations
    k = M.shape[0]
    return sum(math.prod(M[r, s] for r, s in zip(range(k), p)) for p in permutations(range(k)))


def kalman_matrix(A, B):
    n = A.shape[0]
    blocks, cur = [], B
    for _ in range(n):
        blocks.append(cur)
        cur = A @ cur
    return np.hstack(blocks)
