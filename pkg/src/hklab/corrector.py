"""Fixed-point correction of a near-hyperkahler closed triple on a flat 4-torus.

Given a closed triple ``omega`` on ``T^4`` whose classes are those of a
flat hyperkahler triple, the iteration

    phi_{n+1} = -2 * d G Proj_perp F(B_n),   B_n = delta - d^-phi_n ^ d^-phi_n / 2V

converges to ``phi`` such that ``d phi + Proj_H F(B)`` satisfies
``omega^i ^ omega^j = 2 delta_ij V`` pointwise.  ``F(B) = C omega_plus`` with
``C = B^{1/2} A^{-1/2}`` so that ``F^i ^ F^j = 2 B_ij V``.

Self-duality is taken with respect to the flat metric of the torus, so the
base forms are projected onto flat ``Lambda^+`` before ``A`` is computed.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DivergenceDetected,
    FarFromIdentity,
    HarmonicComponent,
    IncompatibleTriple,
    MaxIterations,
    NotSPD,
    SingularPairing,
)
from .exterior import FLAT_TRIPLE, STAR2, WEDGE_PAIRING
from .torus import SpectralTorus

SD_PROJECTOR = 0.5 * (np.eye(6) + STAR2)
ASD_PROJECTOR = 0.5 * (np.eye(6) - STAR2)
SPECTRAL_BOUNDS = (0.5, 2.0)


def _apply6(M, f):
    """Apply a 6x6 matrix to the 2-form index of a (3, 6, *grid) triple field."""
    return np.einsum("kl,il...->ik...", M, f)


def selfdual_part(f):
    return _apply6(SD_PROJECTOR, f)


def antiselfdual_part(f):
    return _apply6(ASD_PROJECTOR, f)


def wedge_field(a, b):
    """Pointwise ``a^i ^ b^j`` of two triple fields, shape (*grid, 3, 3)."""
    return np.einsum("ik...,kl,jl...->...ij", a, WEDGE_PAIRING, b)


def sym_eig(M, what):
    """Batched symmetric eigendecomposition with the SPD and spectral-window gates."""
    M = 0.5 * (M + np.swapaxes(M, -1, -2))
    w, Q = np.linalg.eigh(M)
    if np.any(w <= 0):
        raise NotSPD(f"{what} has eigenvalue {w.min():.3e} <= 0")
    lo, hi = SPECTRAL_BOUNDS
    if np.any(w < lo) or np.any(w > hi):
        raise FarFromIdentity(f"{what} spectrum [{w.min():.4f}, {w.max():.4f}] leaves [{lo}, {hi}]")
    return w, Q


def sym_power(w, Q, p):
    return np.einsum("...ij,...j,...kj->...ik", Q, w ** p, Q)


def green_selfdual(torus, psi, tol=1e-10):
    """Inverse Hodge Laplacian on self-dual 2-form fields orthogonal to ``H^+``.

    ``psi`` has shape (..., 6, *grid).  Constant self-dual content is harmonic
    and raises; pure-Nyquist content lies in the kernel of the discrete
    Laplacian and is dropped.
    """
    psi = np.asarray(psi, dtype=float)
    zm = torus.zero_mode(psi)
    if np.abs(zm).max(initial=0.0) > tol:
        raise HarmonicComponent(f"harmonic self-dual part of size {np.abs(zm).max():.3e}")
    return torus.inverse_laplacian(psi)


def proj_perp(torus, f):
    """Remove the harmonic (constant) and discrete-kernel modes of a field."""
    return torus.remove_kernel(f)


def proj_harmonic(torus, f):
    """Part of a field in the kernel of the discrete Laplacian.

    On an odd grid this is the constant part.  On an even grid it also holds
    the pure-Nyquist modes, which no discrete exact form can produce.
    """
    return torus.kernel_part(f)


def volume_form(omega):
    """``V = (1/2) det(omega^i ^ omega^j)^{1/3}`` for a (3, 6, *grid) field."""
    M = wedge_field(omega, omega)
    det = np.linalg.det(M)
    if np.any(det <= 0):
        raise NotSPD(f"wedge matrix determinant {det.min():.3e} <= 0")
    return 0.5 * np.cbrt(det)


@dataclass
class CorrectorState:
    torus: SpectralTorus
    base: np.ndarray  # (3, 6, *grid) self-dual base forms
    V: np.ndarray  # (*grid)
    A: np.ndarray  # (*grid, 3, 3)
    classes: np.ndarray  # (3, 3) with input zero modes = classes @ FLAT_TRIPLE
    phi: np.ndarray  # (3, 4, *grid)
    residuals: list = field(default_factory=list)
    increments: list = field(default_factory=list)
    candidate: np.ndarray = None

    @property
    def iterations(self):
        return len(self.residuals)


def harmonic_classes(torus, omega, tol=1e-9):
    """Return ``P`` with ``zero_mode(omega) = P @ FLAT_TRIPLE``; the classes must be flat self-dual
    and conformally compatible (``P P^T = c Id``)."""
    zm = torus.zero_mode(omega)  # (3, 6)
    P = zm @ FLAT_TRIPLE.T / 2.0
    if np.abs(P @ FLAT_TRIPLE - zm).max() > tol:
        raise IncompatibleTriple("harmonic part is not flat self-dual")
    PP = P @ P.T
    c = np.trace(PP) / 3
    if c <= 0 or np.abs(PP / c - np.eye(3)).max() > tol:
        raise IncompatibleTriple("classes are not conformally compatible")
    return P


def prepare(torus, omega):
    """Build the corrector state from a closed triple field of shape (3, 6, *grid)."""
    omega = np.asarray(omega, dtype=float)
    P = harmonic_classes(torus, omega)
    V = volume_form(omega)
    # pin the mean of V to the value forced by the classes, det(P P^T)^{1/3}
    V = V * np.cbrt(np.linalg.det(P @ P.T)) / V.mean()
    base = selfdual_part(omega)
    A = wedge_field(base, base) / (2 * V[..., None, None])
    phi = np.zeros((3, 4) + torus.shape)
    return CorrectorState(torus, base, V, A, P, phi)


def F_map(state, B):
    """``F^i(B) = C_ij omega^j`` with ``C = B^{1/2} A^{-1/2}``; returns (3, 6, *grid)."""
    wa, Qa = sym_eig(state.A, "A")
    wb, Qb = sym_eig(B, "B")
    C = sym_power(wb, Qb, 0.5) @ sym_power(wa, Qa, -0.5)
    return np.einsum("...ij,jk...->ik...", C, state.base)


def d_triple(torus, phi):
    return np.stack([torus.d(phi[i], 1) for i in range(3)])


def b_matrix(state, phi):
    dm = antiselfdual_part(d_triple(state.torus, phi))
    return np.eye(3) - wedge_field(dm, dm) / (2 * state.V[..., None, None])


def gram_residual(state, omega):
    G = wedge_field(omega, omega) / (2 * state.V[..., None, None])
    return float(np.abs(G - np.eye(3)).max())


def iterate(state):
    """One fixed-point step; appends the residual of the candidate triple."""
    T = state.torus
    B = b_matrix(state, state.phi)
    F = F_map(state, B)
    psi = proj_perp(T, F)
    G = green_selfdual(T, psi)
    phi_next = np.stack([-2 * T.star(T.d(G[i], 2), 3) for i in range(3)])
    candidate = d_triple(T, phi_next) + proj_harmonic(T, F)
    state.increments.append(float(np.abs(phi_next - state.phi).max()))
    state.phi = phi_next
    state.candidate = candidate
    state.residuals.append(gram_residual(state, candidate))
    r = state.residuals
    if len(r) >= 4 and r[-1] > r[-2] > r[-3] > r[-4]:
        raise DivergenceDetected(f"residual grew for 3 consecutive steps: {r[-4:]}")
    return state


def rotate_to_classes(state, omega):
    """Hyperkahler rotation restoring the input classes exactly."""
    M = state.torus.zero_mode(omega) @ FLAT_TRIPLE.T / 2.0
    R = state.classes @ np.linalg.inv(M)
    return np.einsum("ij,jk...->ik...", R, omega), R


@dataclass
class CorrectorResult:
    omega: np.ndarray
    V: np.ndarray
    phi: np.ndarray
    rotation: np.ndarray
    residuals: list
    increments: list

    @property
    def iterations(self):
        return len(self.residuals)

    @property
    def residual(self):
        return self.residuals[-1] if self.residuals else 0.0


def solve(torus, omega, tol=1e-8, max_iter=200):
    """Correct ``omega`` to a closed triple with ``gram = Id`` pointwise and the same classes."""
    state = prepare(torus, omega)
    initial = gram_residual(state, np.asarray(omega, dtype=float))
    if initial <= tol:
        return CorrectorResult(np.array(omega, dtype=float), state.V, state.phi, np.eye(3), [], [])
    while True:
        iterate(state)
        if state.residuals[-1] <= tol:
            break
        if state.iterations >= max_iter:
            raise MaxIterations(f"residual {state.residuals[-1]:.3e} after {max_iter} iterations")
    out, R = rotate_to_classes(state, state.candidate)
    return CorrectorResult(out, state.V, state.phi, R, state.residuals, state.increments)


def exact_perturbation(torus, amplitude, rng, max_mode=1):
    """Flat triple plus ``d eta`` with ``eta`` a random band-limited 1-form triple,
    scaled so that ``max |d eta| = amplitude``."""
    eta = np.stack([torus.band_limited(1, rng, max_mode) for _ in range(3)])
    deta = d_triple(torus, eta)
    deta *= amplitude / np.abs(deta).max()
    flat = np.broadcast_to(FLAT_TRIPLE[(Ellipsis,) + (None,) * torus.dim], deta.shape)
    return flat + deta


def proj_inverse(V_basis, W_basis, f):
    """``P^{-1} f = f - sum a^{ij} (f, v_i) w_j`` where ``a_ij = (w_i, v_j)``.

    ``P`` is the orthogonal projection onto ``W^perp`` restricted to ``V^perp``;
    bases are given as rows.  The result lies in ``V^perp`` and projects to ``f``.
    """
    Vb = np.atleast_2d(np.asarray(V_basis, dtype=float))
    Wb = np.atleast_2d(np.asarray(W_basis, dtype=float))
    f = np.asarray(f, dtype=float)
    a = Wb @ Vb.T
    if a.shape[0] != a.shape[1]:
        raise SingularPairing("V and W bases must have the same number of vectors")
    # relative to the basis scales, since cond(a) alone cannot see a uniformly tiny pairing
    scale = np.linalg.norm(Wb, 2) * np.linalg.norm(Vb, 2)
    if np.linalg.svd(a, compute_uv=False).min() <= 1e-12 * scale:
        raise SingularPairing("pairing matrix (w_i, v_j) is singular")
    coeff = np.linalg.solve(a.T, Vb @ f)  # a^{ij} (f, v_i)
    return f - coeff @ Wb


def laplacian_coefficient_check(torus, f, omega=FLAT_TRIPLE):
    """``max |Delta(f omega^i) - (Delta f) omega^i|`` for a scalar field ``f``."""
    f = np.asarray(f, dtype=float)
    worst = 0.0
    for w in np.atleast_2d(omega):
        form = w[(slice(None),) + (None,) * torus.dim] * f
        lhs = torus.d(torus.dstar(form, 2), 1) + torus.dstar(torus.d(form, 2), 3)
        rhs = w[(slice(None),) + (None,) * torus.dim] * torus.laplacian(f[None])[0]
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    return worst
