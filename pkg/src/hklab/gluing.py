"""Gluing two cylindrical necks ``[rho-1, rho+1] x T^3`` into one closed triple.

Neck coordinates are ``t in [-1, 1]`` with ``r = rho + t`` and Cartesian torus
coordinates ``theta``.  A triple on a neck is the flat triple plus a
perturbation stored as

    a[i, j]  coefficient of dr ^ dtheta^j      (3, 3, n_r, *grid)
    b[i, J]  coefficient of dtheta^J, J in (12, 13, 23)

so that exponentially small perturbations remain resolvable.  The 4D
coefficient order ``(01, 02, 03, 12, 13, 23)`` with ``x^0 = r`` is ``(a, b)``.

Derivatives along the torus are spectral; along ``r`` they are second-order
central differences and integrals are cumulative trapezoid sums.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConstantMismatch, DegenerateGram, NotClosed
from .exterior import FLAT_TRIPLE, WEDGE_PAIRING
from .models import Lattice3, lambda1, shortest_vector, dual_lattice
from .torus import SpectralTorus

CHI_STEEPNESS = 0.5
CLOSED_TOL = 1e-6


def _transition(u, c=CHI_STEEPNESS):
    """Smooth step 0 -> 1 on [0, 1] with all derivatives vanishing at the ends; returns (h, h')."""
    u = np.asarray(u, dtype=float)
    inside = (u > 0) & (u < 1)
    uu = np.where(inside, u, 0.5)
    s = c * (1 / uu - 1 / (1 - uu))
    th = np.tanh(s / 2)
    h = 0.5 * (1 - th)
    dh = 0.25 * (1 - th ** 2) * c * (1 / uu ** 2 + 1 / (1 - uu) ** 2)
    h = np.where(inside, h, np.where(u >= 1, 1.0, 0.0))
    dh = np.where(inside, dh, 0.0)
    return h, dh


def chi(t):
    """Cutoff: 1 for ``t <= -1/2``, 0 for ``t >= 1/2``, smooth, ``-2 < chi' <= 0``."""
    return 1.0 - _transition(np.asarray(t) + 0.5)[0]


def chi_prime(t):
    return -_transition(np.asarray(t) + 0.5)[1]


def pullback_signs(r_sign, theta_sign):
    """Coefficient signs of ``(dr^dtheta, dtheta^dtheta)`` under ``r -> r_sign r``, ``theta -> theta_sign theta``.

    The doubling identification ``(r, theta) -> (2 rho - r, Theta - theta)`` has both signs -1,
    so both blocks are preserved.
    """
    return r_sign * theta_sign, theta_sign * theta_sign


@dataclass
class GluingParams:
    rho: float
    Theta: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.Theta = np.asarray(self.Theta, dtype=float).reshape(3)


@dataclass
class NeckField:
    lattice: Lattice3
    rho: float
    t: np.ndarray
    a: np.ndarray
    b: np.ndarray
    delta: float = None

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        lam = lambda1(self.lattice)
        if self.delta is None:
            self.delta = lam / 200
        if not 0 < self.delta < lam / 100:
            raise ValueError(f"delta must lie in (0, lambda_1/100) = (0, {lam / 100:.4g})")
        n = len(self.t)
        if n % 2 == 0 or abs(self.t[n // 2]) > 1e-14:
            raise ValueError("r grid must be symmetric with an odd number of points including t = 0")
        if not np.allclose(self.t, -self.t[::-1], atol=1e-14):
            raise ValueError("r grid must be symmetric about t = 0")
        self.torus = SpectralTorus(self.lattice.basis, self.a.shape[-3:])

    @property
    def r(self):
        return self.rho + self.t

    @property
    def h(self):
        return self.t[1] - self.t[0]

    @property
    def n_r(self):
        return len(self.t)

    def full(self):
        """Perturbation as 4D 2-form coefficients, shape (3, 6, n_r, *grid)."""
        return np.concatenate([self.a, self.b], axis=1)

    def closedness(self):
        """``(torus part, r part)`` of the discrete residual of d(omega)."""
        return closedness_residual(self.torus, self.t, self.a, self.b)

    def check_closed(self, tol=CLOSED_TOL):
        spectral, radial = self.closedness()
        if max(spectral, radial) > tol:
            raise NotClosed(f"closedness residual {max(spectral, radial):.3e} exceeds {tol:.1e}")


def flat_neck(lattice, rho, n_r=21, n_theta=8):
    t = np.linspace(-1, 1, n_r)
    shape = (3, 3, n_r) + (n_theta,) * 3
    return NeckField(lattice, rho, t, np.zeros(shape), np.zeros(shape))


def _dr(f, h):
    """Second-order finite difference along the r axis (axis 2)."""
    return np.gradient(f, h, axis=2, edge_order=2)


def _d_theta_1form(torus, f):
    """d on torus 1-forms with components on axis 1; leading and r axes are batched."""
    F = torus.fft(f)
    ik = 1j * torus.wavevectors
    out = np.zeros(f.shape[:1] + (3,) + f.shape[2:], dtype=complex)
    # dtheta^J ordering (12, 13, 23) -> pairs (0,1), (0,2), (1,2)
    for J, (p, q) in enumerate([(0, 1), (0, 2), (1, 2)]):
        out[:, J] = ik[p] * F[:, q] - ik[q] * F[:, p]
    return torus.ifft(out)


def _d_theta_2form(torus, b):
    F = torus.fft(b)
    ik = 1j * torus.wavevectors
    return torus.ifft(ik[0] * F[:, 2] - ik[1] * F[:, 1] + ik[2] * F[:, 0])


def closedness_residual(torus, t, a, b):
    h = t[1] - t[0]
    spectral = float(np.abs(_d_theta_2form(torus, b)).max(initial=0.0))
    radial = float(np.abs(_dr(b, h) - _d_theta_1form(torus, a)).max(initial=0.0))
    return spectral, radial


def synthetic_neck(lattice, rho, rng, amplitude=1e-3, n_r=21, n_theta=8, decay=None, exact=True):
    """Closed perturbation ``d eta`` of the flat neck with ``eta ~ e^{-decay r}`` on a shortest dual mode.

    ``decay`` defaults to ``lambda_1``.  With ``exact`` the radial derivative of
    ``eta`` is taken analytically so only the torus derivative is discrete.
    """
    lam = lambda1(lattice) if decay is None else float(decay)
    kvec, _ = shortest_vector(dual_lattice(lattice))
    k = 2 * np.pi * kvec
    t = np.linspace(-1, 1, n_r)
    torus = SpectralTorus(lattice.basis, n_theta)
    phase = np.einsum("...a,a->...", torus.points, k)
    c = rng.standard_normal((3, 3))
    s = rng.standard_normal((3, 3))
    wave = c[..., None, None, None] * np.cos(phase) + s[..., None, None, None] * np.sin(phase)
    envelope = amplitude * np.exp(-lam * (rho + t))
    eta = envelope[None, None, :, None, None, None] * wave[:, :, None]
    a = -lam * eta
    b = _d_theta_1form(torus, eta)
    return NeckField(lattice, rho, t, a, b)


def primitive_phi(nf, tol=CLOSED_TOL):
    """``phi^i_j(r) = int_rho^r a^i_j ds`` (cumulative trapezoid from ``t = 0``), shape like ``a``."""
    nf.check_closed(tol)
    return _cumulative_from_center(nf.a, nf.h)


def _cumulative_from_center(a, h):
    n = a.shape[2]
    c = n // 2
    mid = 0.5 * (a[:, :, 1:] + a[:, :, :-1]) * h
    cum = np.concatenate([np.zeros_like(a[:, :, :1]), np.cumsum(mid, axis=2)], axis=2)
    return cum - cum[:, :, c:c + 1]


def phi_identity_residual(nf, phi):
    """``max |d phi - (perturbation - b(rho))|`` over the neck; second order in the r spacing."""
    c = nf.n_r // 2
    dr_part = _dr(phi, nf.h) - nf.a
    theta_part = _d_theta_1form(nf.torus, phi) - (nf.b - nf.b[:, :, c:c + 1])
    return float(max(np.abs(dr_part).max(), np.abs(theta_part).max()))


def constant_representative(torus, b, tol=1e-10):
    """Zero mode of a closed 2-form on ``T^3`` (components on axis -4)."""
    b = np.asarray(b, dtype=float)
    res = np.abs(_d_theta_2form(torus, b[None] if b.ndim == 4 else b)).max()
    if res > tol * max(1.0, np.abs(b).max()):
        raise NotClosed(f"torus form is not closed (residual {res:.3e})")
    return torus.zero_mode(b)


def exact_primitive(torus, b):
    """1-form ``beta`` with ``d beta = b - zero_mode(b)`` for closed ``b``: ``beta = d* Delta^{-1} b``.

    Components of ``b`` are on axis 1 and leading/r axes are batched.
    """
    G = torus.inverse_laplacian(b)
    Gh = torus.fft(G)
    ik = 1j * torus.wavevectors
    # d* on 2-forms of R^3: (d* w)_p = -sum_q d_q w_{qp}
    w = {(0, 1): 0, (0, 2): 1, (1, 2): 2}
    out = np.zeros(b.shape, dtype=complex)
    for p in range(3):
        for q in range(3):
            if p == q:
                continue
            sign, J = (1, w[(q, p)]) if q < p else (-1, w[(p, q)])
            out[:, p] -= sign * ik[q] * Gh[:, J]
    return torus.ifft(out)


def identify(nf, Theta):
    """Pull ``nf`` back through ``(t, theta) -> (-t, Theta - theta)``."""
    sa, sb = pullback_signs(-1, -1)
    torus = nf.torus

    def move(f):
        f = f[:, :, ::-1]
        F = torus.fft(f)
        # theta -> -theta, then translate by Theta
        F = np.roll(np.flip(F, axis=(-3, -2, -1)), 1, axis=(-3, -2, -1))
        phase = np.exp(-1j * np.einsum("a...,a->...", torus.wavevectors, Theta))
        return torus.ifft(F * phase)

    return NeckField(nf.lattice, nf.rho, nf.t, sa * move(nf.a), sb * move(nf.b), nf.delta)


@dataclass
class GluedNeck:
    """Glued triple on the doubled neck, as flat triple plus perturbation (3, 6, n_r, *grid)."""

    t: np.ndarray
    torus: SpectralTorus
    perturbation: np.ndarray
    psi: np.ndarray  # (3, 3, n_r, *grid) dtheta components
    side1: np.ndarray
    side2: np.ndarray
    rho: float
    Theta: np.ndarray

    @property
    def flat(self):
        return FLAT_TRIPLE

    def omega(self):
        """Full coefficients (3, 6, n_r, *grid)."""
        shape = (1,) * (self.perturbation.ndim - 2)
        return FLAT_TRIPLE.reshape((3, 6) + shape) + self.perturbation

    def closedness(self):
        return closedness_residual(self.torus, self.t, self.perturbation[:, :3], self.perturbation[:, 3:])

    def deviation(self, which="flat"):
        """``sup |omega_glued - omega_X|`` for X in {flat, 1, 2}."""
        ref = {"flat": 0.0, "1": self.side1, "2": self.side2}[which]
        return float(np.abs(self.perturbation - ref).max())


def glue_forms(nf1, nf2, gp, tol=CLOSED_TOL, mismatch_tol=1e-12):
    """``omega_1 + d((1 - chi) psi)`` with ``d psi = omega_2 - omega_1`` on the overlap."""
    if nf1.lattice.basis.shape != nf2.lattice.basis.shape or not np.allclose(nf1.lattice.basis, nf2.lattice.basis):
        raise ValueError("necks must share the cross-section lattice")
    nf1.check_closed(tol)
    nf2.check_closed(tol)
    other = identify(nf2, gp.Theta)
    p1, p2 = nf1.full(), other.full()
    D = p2 - p1
    aD, bD = D[:, :3], D[:, 3:]
    c = nf1.n_r // 2
    b0 = bD[:, :, c]
    zm = nf1.torus.zero_mode(b0)
    scale = max(np.abs(p1).max(), np.abs(p2).max(), 1e-300)
    if np.abs(zm).max() > mismatch_tol * max(scale, 1.0):
        raise ConstantMismatch(f"constant parts differ by {np.abs(zm).max():.3e}")
    Phi = _cumulative_from_center(aD, nf1.h)
    beta = exact_primitive(nf1.torus, b0)
    psi = Phi + beta[:, :, None]
    t = nf1.t.reshape((1, 1, -1) + (1,) * 3)
    ch, dch = chi(t), chi_prime(t)
    pert = p1 + (1 - ch) * D
    pert[:, :3] -= dch * psi  # -chi' dt ^ psi
    return GluedNeck(nf1.t, nf1.torus, pert, psi, p1, p2, gp.rho, gp.Theta)


def psi_residual(glued):
    """``max |d psi - (omega_2 - omega_1)|``; second order in the r spacing."""
    D = glued.side2 - glued.side1
    h = glued.t[1] - glued.t[0]
    r_part = _dr(glued.psi, h) - D[:, :3]
    th_part = _d_theta_1form(glued.torus, glued.psi) - D[:, 3:]
    return float(max(np.abs(r_part).max(), np.abs(th_part).max()))


def consistency_residual(glued):
    """``omega_1 + d((1-chi) psi)`` against ``omega_2 - d(chi psi)`` using ``d psi = omega_2 - omega_1``."""
    t = glued.t.reshape((1, 1, -1) + (1,) * 3)
    ch, dch = chi(t), chi_prime(t)
    D = glued.side2 - glued.side1
    other = glued.side2 - ch * D
    other[:, :3] -= dch * glued.psi
    return float(np.abs(glued.perturbation - other).max())


@dataclass
class NormalizedTriple:
    omega: np.ndarray  # (3, 6, ...)
    V: np.ndarray
    gram_deviation: np.ndarray  # (..., 3, 3) gram - Id

    @property
    def residual(self):
        return float(np.abs(self.gram_deviation).max())


def volume_normalize(perturbation, flat=FLAT_TRIPLE):
    """``V = (1/2) det(omega^i ^ omega^j)^{1/3}`` and ``gram - Id`` for ``omega = flat + perturbation``.

    Works on the perturbation so deviations far below machine epsilon relative
    to the flat part are still resolved.  ``flat`` may be any constant triple
    with ``flat^i ^ flat^j = 2 c delta_ij``.
    """
    p = np.asarray(perturbation, dtype=float)
    lead = (1,) * (p.ndim - 2)
    f = np.asarray(flat, dtype=float).reshape((3, 6) + lead)
    base = np.einsum("ik,kl,jl->ij", flat, WEDGE_PAIRING, flat)
    c = np.trace(base) / 6
    cross = np.einsum("ik...,kl,jl...->...ij", f, WEDGE_PAIRING, p)
    E = (cross + np.swapaxes(cross, -1, -2) + np.einsum("ik...,kl,jl...->...ij", p, WEDGE_PAIRING, p)) / (2 * c)
    # wedge matrix M = 2c (Id + E)
    w = np.linalg.eigvalsh(0.5 * (E + np.swapaxes(E, -1, -2)))
    onepw = 1 + w
    if np.any(onepw <= 0):
        bad = np.unravel_index(np.argmin(onepw.min(axis=-1)), onepw.shape[:-1])
        raise DegenerateGram("wedge matrix determinant is not positive", worst_index=bad,
                             worst_value=float(onepw.min()))
    s = np.expm1(np.sum(np.log1p(w), axis=-1) / 3)  # det(Id+E)^{1/3} - 1
    V = c * (1 + s)
    dev = (E - s[..., None, None] * np.eye(3)) / (1 + s)[..., None, None]
    omega = f + p
    return NormalizedTriple(omega, V, dev)


def fit_exponent(x, y):
    """Least-squares slope of ``-log y`` against ``x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return float(-np.polyfit(x, np.log(y), 1)[0])
