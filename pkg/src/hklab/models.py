"""Flat ALG and ALH model geometries, rank-3 lattices and the gap lambda_1.

Complex chart coordinates ``(u, v)`` are realified as
``(Re u, Im u, Re v, Im v)``; in that order the ALG model forms
``(i/2)(du^du* + dv^dv*)`` and ``du^dv`` are exactly the flat triple.
"""

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np

from .errors import OutOfChart, SingularLattice
from .exterior import FLAT_TRIPLE, pullback_matrix
from .forms import FormTriple

RHO = np.exp(2j * np.pi / 3)  # e^{2 pi i / 3}


class FiberType(str, Enum):
    REGULAR = "Regular"
    I0_STAR = "I0*"
    II = "II"
    II_STAR = "II*"
    III = "III"
    III_STAR = "III*"
    IV = "IV"
    IV_STAR = "IV*"


# (beta, tau); tau None means free in the upper half plane.
ALG_TABLE = {
    FiberType.REGULAR: (Fraction(1), None),
    FiberType.I0_STAR: (Fraction(1, 2), None),
    FiberType.II: (Fraction(1, 6), RHO),
    FiberType.II_STAR: (Fraction(5, 6), RHO),
    FiberType.III: (Fraction(1, 4), 1j),
    FiberType.III_STAR: (Fraction(3, 4), 1j),
    FiberType.IV: (Fraction(1, 3), RHO),
    FiberType.IV_STAR: (Fraction(2, 3), RHO),
}


def alg_parameters(fiber_type):
    """Return ``(beta, tau)`` for a Kodaira fiber type; ``tau`` is None when free."""
    return ALG_TABLE[FiberType(fiber_type)]


@dataclass
class ALGModel:
    fiber_type: FiberType
    tau: complex = None
    l: float = 1.0
    R: float = 1.0
    beta: Fraction = field(init=False)

    def __post_init__(self):
        self.fiber_type = FiberType(self.fiber_type)
        beta, fixed_tau = alg_parameters(self.fiber_type)
        self.beta = beta
        if fixed_tau is None:
            if self.tau is None:
                raise ValueError(f"{self.fiber_type.value} needs an explicit tau in the upper half plane")
            self.tau = complex(self.tau)
            if self.tau.imag <= 0:
                raise ValueError("tau must have positive imaginary part")
        else:
            if self.tau is not None and abs(complex(self.tau) - fixed_tau) > 1e-12:
                raise ValueError(f"fiber type {self.fiber_type.value} forces tau = {fixed_tau}")
            self.tau = complex(fixed_tau)
        if self.l <= 0 or self.R <= 0:
            raise ValueError("l and R must be positive")

    @property
    def deck_angle(self):
        return 2 * np.pi * float(self.beta)

    def deck(self, u, v):
        """The identification ``(u, v) -> (e^{2 pi i beta} u, e^{-2 pi i beta} v)``."""
        w = np.exp(1j * self.deck_angle)
        return w * np.asarray(u), np.asarray(v) / w

    def deck_jacobian(self):
        """Real 4x4 Jacobian of the deck map in ``(Re u, Im u, Re v, Im v)``."""
        a = self.deck_angle
        c, s = np.cos(a), np.sin(a)
        D = np.zeros((4, 4))
        D[:2, :2] = [[c, -s], [s, c]]
        D[2:, 2:] = [[c, s], [-s, c]]
        return D

    def fiber_periods(self):
        return self.l, self.tau * self.l

    def sample(self, n, rng):
        """``n`` random chart points in the half-open sector, ``R <= |u| < 4R``."""
        arg = rng.uniform(0.0, self.deck_angle, n)
        rad = rng.uniform(self.R, 4 * self.R, n)
        u = rad * np.exp(1j * arg)
        p1, p2 = self.fiber_periods()
        v = rng.uniform(0, 1, n) * p1 + rng.uniform(0, 1, n) * p2
        return u, v


def realify(u, v):
    u, v = np.asarray(u), np.asarray(v)
    return np.stack([u.real, u.imag, v.real, v.imag], axis=-1)


def alg_model_forms(m, u, v):
    """Flat model triple at chart point(s) ``(u, v)``.

    The coefficients are constant; the call validates that the point lies in
    the truncated sector ``|u| >= R``, ``arg u in [0, 2 pi beta]``.
    """
    u = np.asarray(u, dtype=complex)
    if np.any(np.abs(u) < m.R):
        raise OutOfChart(f"|u| < R = {m.R}")
    arg = np.mod(np.angle(u), 2 * np.pi)
    # arg = 0 may be reported as 2 pi by mod; both lie on the sector boundary
    arg = np.where(np.isclose(arg, 2 * np.pi), 0.0, arg)
    if np.any(arg > m.deck_angle + 1e-12):
        raise OutOfChart(f"arg u outside [0, 2 pi beta] with beta = {m.beta}")
    omega = np.broadcast_to(FLAT_TRIPLE, u.shape + (3, 6)).copy()
    return FormTriple(omega, np.ones(u.shape))


def alg_holomorphic_form(u, v):
    """``du ^ dv`` as a pair (real part, imaginary part) of 2-form coefficients."""
    shape = np.shape(u)
    return (np.broadcast_to(FLAT_TRIPLE[1], shape + (6,)).copy(),
            np.broadcast_to(FLAT_TRIPLE[2], shape + (6,)).copy())


def deck_pullback_residual(m, u, v):
    """Max |D^* omega(deck(p)) - omega(p)| over the three model forms at the points."""
    before = alg_model_forms(m, u, v).omega
    # the deck image leaves the fundamental sector; the forms are the constant
    # model forms wherever they are evaluated, so evaluate without the chart gate
    uu, vv = m.deck(u, v)
    after = np.broadcast_to(FLAT_TRIPLE, np.shape(uu) + (3, 6))
    P = pullback_matrix(m.deck_jacobian())
    pulled = after @ P.T
    return float(np.abs(pulled - before).max())


@dataclass
class Lattice3:
    """Lattice ``Z v1 + Z v2 + Z v3`` in R^3; rows of ``basis`` are the ``v_i``."""

    basis: np.ndarray

    def __post_init__(self):
        self.basis = np.array(self.basis, dtype=float).reshape(3, 3)
        if abs(np.linalg.det(self.basis)) < 1e-14 * max(1.0, np.abs(self.basis).max() ** 3):
            raise SingularLattice("lattice basis is singular")

    @classmethod
    def cubic(cls, scale=1.0):
        return cls(scale * np.eye(3))

    @property
    def det(self):
        return float(np.linalg.det(self.basis))

    @property
    def gram(self):
        return self.basis @ self.basis.T

    def dual(self):
        return dual_lattice(self)

    @property
    def lambda1(self):
        return lambda1(self)

    def reduce(self, x):
        """Reduce points of R^3 into the fundamental cell."""
        s = np.asarray(x) @ np.linalg.inv(self.basis)
        return (s - np.floor(s)) @ self.basis

    def scaled(self, s):
        return Lattice3(s * self.basis)


def dual_lattice(lat):
    """Basis of ``{lam : <lam, theta> in Z for theta in Lambda}`` (inverse transpose)."""
    try:
        return Lattice3(np.linalg.inv(lat.basis).T)
    except np.linalg.LinAlgError as exc:
        raise SingularLattice(str(exc)) from exc


def shortest_vector(lat):
    """A shortest nonzero vector of ``lat`` by exhaustive bounded enumeration.

    Any lattice point ``x = n @ B`` with ``|x| <= mu`` has
    ``|n_i| <= mu * |column i of B^{-1}|``, with ``mu`` the shortest basis row.
    """
    B = lat.basis
    mu = np.linalg.norm(B, axis=1).min()
    Binv = np.linalg.inv(B)
    bounds = np.floor(mu * np.linalg.norm(Binv, axis=0) + 1e-9).astype(int)
    ranges = [np.arange(-b, b + 1) for b in bounds]
    n = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, 3)
    n = n[np.any(n != 0, axis=1)]
    x = n @ B
    norms = np.linalg.norm(x, axis=1)
    k = int(np.argmin(norms))
    return x[k], n[k]


def lambda1(lat):
    """``2 pi`` times the length of a shortest nonzero dual vector."""
    vec, _ = shortest_vector(dual_lattice(lat))
    return float(2 * np.pi * np.linalg.norm(vec))


@dataclass
class ALHModel:
    lattice: Lattice3
    R: float = 1.0

    def triple(self, coordinates="theta"):
        return alh_model_triple(self, coordinates)

    def metric(self, coordinates="theta"):
        """``h = dr^2 +`` flat torus metric, assembled directly."""
        h = np.eye(4)
        if coordinates == "fractional":
            h[1:, 1:] = self.lattice.gram
        return h


def alh_model_triple(m, coordinates="theta"):
    """The cyclic model triple ``dr^dth1 + dth2^dth3`` etc.

    In ``theta`` coordinates the coefficients are those of the flat triple.
    With ``coordinates="fractional"`` the chart is ``(r, s)`` with
    ``theta = s @ basis`` so that the torus is the unit cube.
    """
    if coordinates == "theta":
        return FormTriple(FLAT_TRIPLE.copy(), 1.0)
    if coordinates != "fractional":
        raise ValueError("coordinates must be 'theta' or 'fractional'")
    L = np.eye(4)
    L[1:, 1:] = m.lattice.basis.T
    det = np.linalg.det(L)
    if det <= 0:
        raise ValueError("fractional chart needs a positively oriented basis")
    P = pullback_matrix(L)
    return FormTriple(FLAT_TRIPLE @ P.T, det)
