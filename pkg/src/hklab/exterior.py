"""Combinatorics of constant-coefficient exterior algebra on R^n.

Forms are stored as coefficient vectors in the lexicographic basis of
increasing multi-indices, e.g. for 2-forms on R^4 the order is
``(01, 02, 03, 12, 13, 23)``.  Everything here is pure index bookkeeping;
the spectral and pointwise modules build on these tables.
"""

from functools import lru_cache
from itertools import combinations

import numpy as np


@lru_cache(maxsize=None)
def basis(dim, degree):
    return tuple(combinations(range(dim), degree))


def perm_sign(seq):
    """Sign of the permutation sorting ``seq`` (0 if an index repeats)."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


@lru_cache(maxsize=None)
def d_table(dim, degree):
    """Entries ``(target, source, axis, sign)`` of the exterior derivative.

    ``(d alpha)_J = sum sign * partial_axis alpha_I`` over the listed rows.
    """
    src = {I: n for n, I in enumerate(basis(dim, degree))}
    rows = []
    for t, J in enumerate(basis(dim, degree + 1)):
        for p, axis in enumerate(J):
            I = J[:p] + J[p + 1:]
            rows.append((t, src[I], axis, (-1) ** p))
    return tuple(rows)


@lru_cache(maxsize=None)
def star_matrix(dim, degree):
    """Euclidean Hodge star from degree-forms to (dim-degree)-forms."""
    src = basis(dim, degree)
    dst = {J: n for n, J in enumerate(basis(dim, dim - degree))}
    S = np.zeros((len(dst), len(src)))
    for n, I in enumerate(src):
        Ic = tuple(k for k in range(dim) if k not in I)
        S[dst[Ic], n] = perm_sign(I + Ic)
    S.setflags(write=False)
    return S


@lru_cache(maxsize=None)
def wedge_tensor(dim, p, q):
    """Structure constants ``T[K, I, J]`` with ``(a^b)_K = T[K,I,J] a_I b_J``."""
    bp, bq = basis(dim, p), basis(dim, q)
    out = {K: n for n, K in enumerate(basis(dim, p + q))}
    T = np.zeros((len(out), len(bp), len(bq)))
    for i, I in enumerate(bp):
        for j, J in enumerate(bq):
            s = perm_sign(I + J)
            if s:
                T[out[tuple(sorted(I + J))], i, j] = s
    T.setflags(write=False)
    return T


def wedge(a, b, p, q, dim=4):
    """Wedge of coefficient arrays with components on the last axis."""
    return np.einsum("kij,...i,...j->...k", wedge_tensor(dim, p, q), a, b)


# 2-forms on R^4: the top-degree pairing a^b = a @ Q @ b.
WEDGE_PAIRING = wedge_tensor(4, 2, 2)[0]
STAR2 = star_matrix(4, 2)

# The flat hyperkahler triple e01+e23, e02+e31, e03+e12 (self-dual for e0123).
FLAT_TRIPLE = np.array(
    [
        [1.0, 0.0, 0.0, 0.0, 0.0, 1.0],
        [0.0, 1.0, 0.0, 0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0, 1.0, 0.0, 0.0],
    ]
)
FLAT_TRIPLE.setflags(write=False)


def two_form_to_matrix(c):
    """Coefficients (..., 6) -> antisymmetric matrices W with W[a,b] = w(e_a, e_b)."""
    c = np.asarray(c, dtype=float)
    W = np.zeros(c.shape[:-1] + (4, 4))
    for n, (a, b) in enumerate(basis(4, 2)):
        W[..., a, b] = c[..., n]
        W[..., b, a] = -c[..., n]
    return W


def matrix_to_two_form(W):
    W = np.asarray(W, dtype=float)
    return np.stack([W[..., a, b] for a, b in basis(4, 2)], axis=-1)


def pullback_matrix(L):
    """6x6 matrix acting on 2-form coefficients as w -> L^* w (W -> L^T W L)."""
    L = np.asarray(L, dtype=float)
    M = np.empty((6, 6))
    for n in range(6):
        e = np.zeros(6)
        e[n] = 1.0
        M[:, n] = matrix_to_two_form(L.T @ two_form_to_matrix(e) @ L)
    return M
