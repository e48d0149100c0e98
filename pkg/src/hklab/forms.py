"""Pointwise exterior algebra of 2-forms in real dimension four.

A 2-form is a length-6 coefficient vector in the basis
``e01, e02, e03, e12, e13, e23`` (see :mod:`hklab.exterior`).  A triple of
2-forms together with a positive volume coefficient is a :class:`FormTriple`;
all functions accept arbitrary leading batch axes so the same code serves
single points and whole grids.
"""

from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .errors import DegenerateTriple, IncompatibleTriple, NotSO3
from .exterior import (
    FLAT_TRIPLE,
    STAR2,
    WEDGE_PAIRING,
    basis,
    perm_sign,
    two_form_to_matrix,
)

ADMISSIBILITY_TOL = 1e-8

_EPS3 = np.zeros((3, 3, 3))
for _p in permutations(range(3)):
    _EPS3[_p] = perm_sign(_p)
_EPS4 = np.zeros((4, 4, 4, 4))
for _p in permutations(range(4)):
    _EPS4[_p] = perm_sign(_p)


def flat_triple():
    """The flat triple ``(e01+e23, e02+e31, e03+e12)`` with unit volume."""
    return FormTriple(FLAT_TRIPLE.copy(), 1.0)


@dataclass
class FormTriple:
    """Three 2-forms and the coefficient of the volume form ``V``.

    ``omega`` has shape ``(..., 3, 6)`` and ``volume`` shape ``(...)``.
    """

    omega: np.ndarray
    volume: np.ndarray = 1.0

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float)
        self.volume = np.asarray(self.volume, dtype=float)
        if self.omega.shape[-2:] != (3, 6):
            raise ValueError(f"omega must have shape (..., 3, 6), got {self.omega.shape}")
        if np.any(self.volume <= 0):
            raise ValueError("volume must be positive")

    def gram(self):
        return gram(self)

    def admissible(self, tol=ADMISSIBILITY_TOL):
        """True when gram = c*Id (c > 0) within ``tol`` after normalisation."""
        G = gram(self)
        c = np.trace(G, axis1=-2, axis2=-1) / 3.0
        if np.any(c <= 0):
            return False
        dev = np.abs(G / c[..., None, None] - np.eye(3)).max(axis=(-2, -1))
        return bool(np.all(dev <= tol))


@dataclass
class MetricQuaternion:
    """Metric and complex structures recovered from a triple.

    ``orientation`` is +1 when ``IJ = K`` and -1 when ``IJ = -K``.
    """

    g: np.ndarray
    I: np.ndarray
    J: np.ndarray
    K: np.ndarray
    orientation: int = 1

    @property
    def structures(self):
        return (self.I, self.J, self.K)

    def quaternion_defect(self):
        """Largest of |I^2+1|, |J^2+1|, |K^2+1|, |IJ - orientation*K|."""
        one = np.eye(4)
        I, J, K = self.I, self.J, self.K
        defects = [
            np.abs(I @ I + one).max(),
            np.abs(J @ J + one).max(),
            np.abs(K @ K + one).max(),
            np.abs(I @ J - self.orientation * K).max(),
        ]
        return float(max(defects))

    def orthogonality_defect(self):
        return float(max(np.abs(S.T @ self.g @ S - self.g).max() for S in self.structures))


def wedge(a, b):
    """Coefficient of ``a ^ b`` on ``e0123``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.einsum("...i,ij,...j->...", a, WEDGE_PAIRING, b)


def wedge_matrix(omega):
    """All pairwise wedges ``omega^i ^ omega^j`` for ``omega`` of shape (..., 3, 6)."""
    return np.einsum("...ik,kl,...jl->...ij", omega, WEDGE_PAIRING, omega)


def gram(t):
    """``A_ij = (omega^i ^ omega^j) / (2 V)``."""
    return wedge_matrix(t.omega) / (2.0 * np.asarray(t.volume)[..., None, None])


def _check_definite(G):
    w = np.linalg.eigvalsh(G)
    scale = np.abs(w).max(axis=-1, initial=0.0)
    if np.any(scale == 0) or np.any(w[..., 0] <= 1e-12 * scale):
        raise DegenerateTriple(
            "the three forms do not span a definite self-dual space "
            f"(gram eigenvalues {np.round(w.reshape(-1, 3)[0], 12)})"
        )


def star_from_triple(t):
    """Involution on 2-forms: +1 on span(omega), -1 on its wedge complement.

    Returns a ``(..., 6, 6)`` matrix acting on coefficient vectors.
    """
    G = gram(t)
    _check_definite(G)
    Om = np.swapaxes(t.omega, -1, -2)  # (..., 6, 3)
    QOm = WEDGE_PAIRING @ Om
    P = Om @ np.linalg.solve(np.swapaxes(Om, -1, -2) @ QOm, np.swapaxes(QOm, -1, -2))
    return 2.0 * P - np.eye(6)


def hodge_star_2forms(g):
    """Hodge star of a metric on 2-forms, orientation ``e0123``, as a 6x6 matrix."""
    g = np.asarray(g, dtype=float)
    ginv = np.linalg.inv(g)
    vol = np.sqrt(np.linalg.det(g))
    pairs = basis(4, 2)
    S = np.zeros((6, 6))
    for n, (a, b) in enumerate(pairs):
        E = np.zeros((4, 4))
        E[a, b], E[b, a] = 1.0, -1.0
        up = ginv @ E @ ginv.T
        # (*E)_{cd} = 1/2 E^{ab} eps_{abcd} sqrt(det g)
        out = 0.5 * vol * np.einsum("ab,abcd->cd", up, _EPS4)
        for m, (c, d) in enumerate(pairs):
            S[m, n] = out[c, d]
    return S


def urbantke(omega):
    """Cubic conformal metric ``eps_ijk eps^cdef W^i_ac W^j_de W^k_fb`` of a triple."""
    W = two_form_to_matrix(omega)
    U = np.einsum("ijk,cdef,...iac,...jde,...kfb->...ab", _EPS3, _EPS4, W, W, W)
    return 0.5 * (U + np.swapaxes(U, -1, -2))


def metric_from_triple(t, tol=ADMISSIBILITY_TOL):
    """Recover ``(g, I, J, K)`` from an admissible triple at a single point.

    The conformal class is the one making span(omega) self-dual; the scale is
    fixed so that the Riemannian volume equals ``c * V`` where ``gram = c*Id``.
    Structures are the g-raised forms, ``omega^i(X, Y) = g(J_i X, Y)``.
    """
    omega = np.asarray(t.omega, dtype=float)
    if omega.shape != (3, 6):
        raise ValueError("metric_from_triple works pointwise; use metric_field for grids")
    G = gram(t)
    _check_definite(G)
    c = np.trace(G) / 3.0
    if np.abs(G / c - np.eye(3)).max() > tol:
        raise IncompatibleTriple(f"gram deviates from c*Id by {np.abs(G / c - np.eye(3)).max():.3e}")
    vol = c * float(t.volume)
    U = urbantke(omega)
    sign = 1.0 if np.trace(U) > 0 else -1.0
    U = sign * U
    g_conformal = U * np.sqrt(vol) / np.linalg.det(U) ** 0.25
    W1, W2, W3 = two_form_to_matrix(omega)
    raised = [-np.linalg.solve(g_conformal, W) for W in (W1, W2, W3)]
    orientation = 1 if np.abs(raised[0] @ raised[1] - raised[2]).max() <= np.abs(
        raised[0] @ raised[1] + raised[2]).max() else -1
    # W_i = -g J_i, so W_k^{-1} W_j reproduces the raised forms and W_i J_i gives g back
    # without inverting g; this keeps the error linear in the conditioning of the forms
    s = orientation
    I = s * np.linalg.solve(W3, W2)
    J = s * np.linalg.solve(W1, W3)
    K = s * np.linalg.solve(W2, W1)
    g = (W1 @ I + W2 @ J + W3 @ K) / 3.0
    g = 0.5 * (g + g.T)
    return MetricQuaternion(g, I, J, K, orientation)


def metric_field(omega, volume):
    """Vectorised metric recovery for a grid of triples (no compatibility gate)."""
    U = urbantke(omega)
    sign = np.sign(np.trace(U, axis1=-2, axis2=-1))[..., None, None]
    U = sign * U
    volume = np.asarray(volume, dtype=float)
    return U * (np.sqrt(volume) / np.linalg.det(U) ** 0.25)[..., None, None]


def is_rotation(R, tol=1e-10):
    R = np.asarray(R, dtype=float)
    return R.shape == (3, 3) and np.abs(R.T @ R - np.eye(3)).max() <= tol and np.linalg.det(R) > 0


def hyperkahler_rotate(t, R, tol=1e-10):
    """``omega'^i = R_ij omega^j`` for ``R`` in SO(3)."""
    R = np.asarray(R, dtype=float)
    if not is_rotation(R, tol):
        raise NotSO3("rotation matrix must satisfy R^T R = Id and det R = 1")
    return FormTriple(np.einsum("ij,...jk->...ik", R, t.omega), t.volume)


def euclidean_star():
    return np.array(STAR2)


def random_pullback(rng, log_spread=0.7, dim=4):
    """Random orientation-preserving matrix ``Q1 diag(exp(s)) Q2`` with ``|s| <= log_spread``.

    Bounding the singular values keeps the condition number at most
    ``exp(2*log_spread)``; Gaussian matrices have a heavy-tailed condition number.
    """
    q1, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    q2, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    L = q1 @ np.diag(np.exp(rng.uniform(-log_spread, log_spread, dim))) @ q2
    if np.linalg.det(L) < 0:
        L[0] *= -1
    return L
