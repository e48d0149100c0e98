"""Homology and period algebra of the doubled K3 and of ALH ends.

Basis order for the K3: ``Sigma_1..Sigma_16``, the short faces ``F_23, F_31, F_12``
and the long faces ``F_1, F_2, F_3``.  The ALH basis keeps ``Sigma_1..Sigma_8`` and
the three short faces.  Classes are stored with doubled integer coefficients,
``x = (1/2) (sum m_a Sigma_a + sum n_ab F_ab + sum n_a F_a)``.

Face periods are 3x3 arrays ``f[i, k]`` with the column ``k`` running over
``(23, 31, 12)`` for short faces and ``(1, 2, 3)`` for long faces, so that
column ``k`` of the two pairs with itself.
"""

from dataclasses import dataclass
from itertools import combinations, product

import numpy as np

from .errors import RankDeficient, SingularLattice
from .models import Lattice3
from .recovery import adjugate

SHORT_FACES = ("F23", "F31", "F12")
LONG_FACES = ("F1", "F2", "F3")

# Self-intersection of a curve and the pairing of F_a with F_bc, (a, bc) cyclic.
CURVE_SQUARE = -2
FACE_PAIRING = 2


@dataclass(frozen=True)
class HomologyBasis:
    n_curves: int
    long_faces: bool

    @property
    def labels(self):
        out = [f"Sigma_{a + 1}" for a in range(self.n_curves)] + list(SHORT_FACES)
        return out + (list(LONG_FACES) if self.long_faces else [])

    @property
    def rank(self):
        return len(self.labels)

    @property
    def n_face_coeffs(self):
        return 6 if self.long_faces else 3

    def pairing(self):
        """Intersection matrix on the basis."""
        n = self.n_curves
        Q = np.zeros((self.rank, self.rank))
        Q[:n, :n] = CURVE_SQUARE * np.eye(n)
        if self.long_faces:
            Q[n:n + 3, n + 3:n + 6] = FACE_PAIRING * np.eye(3)
            Q[n + 3:n + 6, n:n + 3] = FACE_PAIRING * np.eye(3)
        return Q


def HomologyBasisK3():
    return HomologyBasis(16, True)


def HomologyBasisALH():
    return HomologyBasis(8, False)


@dataclass
class PeriodVector:
    c: np.ndarray  # (3, n_curves)
    f_faces: np.ndarray  # (3, 3)
    f_long: np.ndarray = None  # (3, 3) on the K3
    V: float = 0.0

    def __post_init__(self):
        self.c = np.atleast_2d(np.asarray(self.c, dtype=float))
        self.f_faces = np.asarray(self.f_faces, dtype=float).reshape(3, 3)
        if self.f_long is not None:
            self.f_long = np.asarray(self.f_long, dtype=float).reshape(3, 3)
        self.V = float(self.V)

    def as_vector(self):
        """Periods against the basis, shape (3, rank)."""
        parts = [self.c, self.f_faces]
        if self.f_long is not None:
            parts.append(self.f_long)
        return np.concatenate(parts, axis=1)

    def to_dict(self):
        d = {"c": self.c.tolist(), "f_faces": self.f_faces.tolist(), "V": self.V}
        if self.f_long is not None:
            d["f_long"] = self.f_long.tolist()
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(d["c"], d["f_faces"], d.get("f_long"), d.get("V", 0.0))


def integrability_form(pv):
    """``-1/2 sum c_ia c_ja + 1/2 sum (f_ia f_j,bc + f_ja f_i,bc)`` as a 3x3 matrix."""
    c, F, X = pv.c, pv.f_faces, pv.f_long
    return -0.5 * c @ c.T + 0.5 * (X @ F.T + F @ X.T)


def check_integrability(pv):
    """Residual ``integrability_form - 2 delta V``."""
    return integrability_form(pv) - 2 * pv.V * np.eye(3)


def wedge_from_pairing(pv, basis=None):
    """Same bilinear form via the inverse of the intersection matrix."""
    basis = basis or HomologyBasisK3()
    P = pv.as_vector()
    return P @ np.linalg.inv(basis.pairing()) @ P.T


def _traceless_basis():
    """Orthonormal basis (5, 3, 3) of traceless symmetric matrices."""
    E = []
    for i in range(3):
        for j in range(i, 3):
            M = np.zeros((3, 3))
            M[i, j] = M[j, i] = 1.0
            E.append(M)
    flat = np.array([m.ravel() for m in E]).T  # 9 x 6
    trace = np.eye(3).ravel() / np.sqrt(3)
    flat = flat - np.outer(trace, trace @ flat)
    U, _, _ = np.linalg.svd(flat, full_matrices=False)
    return U[:, :5].T.reshape(5, 3, 3)


_TRACELESS = _traceless_basis()
_SYM_INDEX = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)]


def _sym_map(F):
    """Linear map ``X -> (X F^T + F X^T) / 2`` on the 9 entries of ``X``."""
    cols = []
    for e in np.eye(9):
        X = e.reshape(3, 3)
        cols.append(0.5 * (X @ F.T + F @ X.T))
    return np.array(cols)  # (9, 3, 3)


@dataclass
class Rank5Solution:
    particular: np.ndarray  # (3, 3)
    kernel: np.ndarray  # (4, 3, 3)
    singular_values: np.ndarray  # 9 values, 5 nonzero
    rank: int

    @property
    def gap(self):
        s = self.singular_values
        return float(s[self.rank - 1] / max(s[self.rank], 1e-300))


def solve_rank5(c, f_faces, V, gap_orders=6):
    """Long-face periods compatible with the integrability identity.

    Eliminating ``V`` leaves the traceless part of the identity: five equations in
    the nine ``f_ia``.  The solution set is ``particular + span(kernel)`` where the
    particular solution also matches the given ``V`` and kernel directions change
    the implied volume.
    """
    c = np.atleast_2d(np.asarray(c, dtype=float))
    F = np.asarray(f_faces, dtype=float).reshape(3, 3)
    S = _sym_map(F)
    T = np.einsum("kab,nab->kn", _TRACELESS, S)  # 5 x 9
    # rank is measured on the redundant 9 x 9 traceless operator so the four null
    # directions show up as round-off rather than as structurally absent rows
    D = S - np.einsum("nkk,ab->nab", S, np.eye(3)) / 3.0
    sv = np.linalg.svd(D.reshape(9, 9).T, compute_uv=False)
    scale = max(sv[0], 1e-300)
    rank = int(np.sum(sv > scale * 10.0 ** (-gap_orders)))
    if rank != 5 or sv[4] / max(sv[5], 1e-300) < 10.0 ** gap_orders:
        raise RankDeficient(f"traceless system has rank {rank}, singular values {sv}")
    _, _, Vt = np.linalg.svd(T)
    kernel = Vt[5:].reshape(4, 3, 3)
    full = np.array([[S[n][i, j] for n in range(9)] for i, j in _SYM_INDEX])  # 6 x 9
    # the trace equation must be reachable too, which fails exactly when f_faces is singular
    sv_full = np.linalg.svd(full, compute_uv=False)
    if sv_full[-1] <= sv_full[0] * 10.0 ** (-gap_orders):
        raise RankDeficient(f"face periods are singular, symmetric system singular values {sv_full}")
    target = 2 * V * np.eye(3) + 0.5 * c @ c.T
    rhs = np.array([target[i, j] for i, j in _SYM_INDEX])
    x, *_ = np.linalg.lstsq(full, rhs, rcond=None)
    return Rank5Solution(x.reshape(3, 3), kernel, sv, rank)


def implied_volume(c, f_faces, f_long):
    """``V`` for which the integrability trace equation holds."""
    pv = PeriodVector(c, f_faces, f_long, 0.0)
    return float(np.trace(integrability_form(pv)) / 6)


def L_map(lattice, drho, dTheta):
    """Period shifts ``f_ia = 4 drho (v_a)_i + 2 (dTheta x v_a)_i``."""
    A = lattice.basis if isinstance(lattice, Lattice3) else np.asarray(lattice, dtype=float)
    if abs(np.linalg.det(A)) < 1e-14:
        raise SingularLattice("lattice basis is singular")
    dTheta = np.asarray(dTheta, dtype=float)
    cross = np.cross(dTheta[None, :], A).T  # column a = dTheta x v_a
    return 4 * drho * A.T + 2 * cross


def L_image_basis(lattice):
    """Images of the four unit parameter directions, shape (4, 3, 3)."""
    out = [L_map(lattice, 1.0, np.zeros(3))]
    for e in np.eye(3):
        out.append(L_map(lattice, 0.0, e))
    return np.array(out)


def in_L_image(lattice, X, tol=1e-9):
    """``X (adj A)^T + adj(A) X^T = 2 C Id`` for some constant ``C``."""
    A = lattice.basis if isinstance(lattice, Lattice3) else np.asarray(lattice, dtype=float)
    F = adjugate(A)
    S = 0.5 * (X @ F.T + F @ X.T)
    C = np.trace(S) / 3
    return bool(np.abs(S - C * np.eye(3)).max() <= tol * max(1.0, np.abs(X).max() * np.abs(F).max()))


# -- minus-two classes ------------------------------------------------------


def sum_of_squares_vectors(n, total=4):
    """All integer vectors of length ``n`` with ``sum m^2 = total``, shape (N, n)."""
    out = []
    bound = int(np.floor(np.sqrt(total)))
    # enumerate supports then signs; entries are nonzero on the support
    for k in range(1, min(n, total) + 1):
        for mags in product(range(1, bound + 1), repeat=k):
            if sum(m * m for m in mags) != total:
                continue
            for support in combinations(range(n), k):
                for signs in product((1, -1), repeat=k):
                    v = np.zeros(n, dtype=np.int8)
                    v[list(support)] = np.array(mags) * np.array(signs)
                    out.append(v)
    return np.array(out, dtype=np.int8).reshape(-1, n)


@dataclass(frozen=True)
class HalfIntegralClass:
    m: tuple
    faces: tuple
    tag: str = "parity-unverified"

    def name(self, basis):
        return class_name(basis, np.array(self.m), np.array(self.faces))


def class_name(basis, m, faces):
    labels = basis.labels
    coeffs = np.concatenate([m, faces])
    terms = []
    for c, lab in zip(coeffs, labels):
        if c == 0:
            continue
        terms.append((int(c), lab))
    if all(c % 2 == 0 for c, _ in terms):
        parts = [(c // 2, lab) for c, lab in terms]
        prefix = ""
    else:
        parts = terms
        prefix = "1/2"
    s = ""
    for c, lab in parts:
        sign = "-" if c < 0 else "+"
        mag = "" if abs(c) == 1 else f"{abs(c)}*"
        s += f" {sign} {mag}{lab}" if s else f"{'-' if c < 0 else ''}{mag}{lab}"
    return f"{prefix}({s})" if prefix else s


class MinusTwoClasses:
    """Product set of curve parts and face parts with square -2, iterated lazily."""

    def __init__(self, basis, curve_parts, face_parts):
        self.basis = basis
        self.curve_parts = curve_parts
        self.face_parts = face_parts

    def __len__(self):
        return len(self.curve_parts) * len(self.face_parts)

    def __iter__(self):
        for f in self.face_parts:
            for m in self.curve_parts:
                yield HalfIntegralClass(tuple(int(x) for x in m), tuple(int(x) for x in f))

    def __contains__(self, x):
        m = np.asarray(x.m if isinstance(x, HalfIntegralClass) else x[0])
        f = np.asarray(x.faces if isinstance(x, HalfIntegralClass) else x[1])
        if m.shape != (self.basis.n_curves,) or f.shape != (self.basis.n_face_coeffs,):
            return False
        return bool(np.any(np.all(self.curve_parts == m, axis=1)) and np.any(np.all(self.face_parts == f, axis=1)))

    def as_array(self):
        """Materialise all classes, shape (len, rank)."""
        N, M = len(self.curve_parts), len(self.face_parts)
        cp = np.repeat(self.curve_parts[None], M, axis=0).reshape(N * M, -1)
        fp = np.repeat(self.face_parts, N, axis=0)
        return np.concatenate([cp, fp], axis=1)


def face_cross_term(faces):
    """``sum n'_a n_bc`` for face coefficient rows (short, long)."""
    faces = np.asarray(faces)
    if faces.shape[-1] < 6:
        return np.zeros(faces.shape[:-1], dtype=int)
    return np.sum(faces[..., :3].astype(int) * faces[..., 3:].astype(int), axis=-1)


def self_intersection(basis, m, faces):
    """``x . x`` via the intersection matrix (doubled coefficients)."""
    x = np.concatenate([np.asarray(m, dtype=float), np.asarray(faces, dtype=float)], axis=-1) / 2
    return np.einsum("...i,ij,...j->...", x, basis.pairing(), x)


def self_intersection_formula(m, faces):
    """``-(1/2) sum m^2 + sum n'_a n_bc``."""
    m = np.asarray(m)
    return -0.5 * np.sum(m.astype(float) ** 2, axis=-1) + face_cross_term(faces)


def enumerate_minus2(basis, face_bound):
    """Classes with ``sum m^2 = 4`` and vanishing face cross term, faces bounded by ``face_bound``."""
    curve = sum_of_squares_vectors(basis.n_curves, 4)
    rng = range(-face_bound, face_bound + 1)
    faces = np.array(list(product(rng, repeat=basis.n_face_coeffs)), dtype=np.int8)
    faces = faces[face_cross_term(faces) == 0]
    return MinusTwoClasses(basis, curve, faces)


def brute_force_minus2_curves(n, bound=2):
    """Exhaustive oracle: all ``m in {-bound..bound}^n`` with ``sum m^2 = 4``."""
    grid = np.array(list(product(range(-bound, bound + 1), repeat=n)), dtype=np.int8)
    return grid[np.sum(grid.astype(int) ** 2, axis=1) == 4]


@dataclass
class NondegeneracyReport:
    condition1: bool
    det_faces: float
    condition2: bool
    violations: list
    checked: int

    @property
    def passed(self):
        return self.condition1 and self.condition2

    def to_dict(self):
        return {
            "condition1": "PASS" if self.condition1 else "FAIL",
            "det_faces": self.det_faces,
            "condition2": "PASS" if self.condition2 else "FAIL",
            "violations": self.violations,
            "checked": self.checked,
        }


def class_periods(pv, m, faces):
    """``integral of alpha^i over x`` for doubled coefficients; shape (..., 3)."""
    P = pv.as_vector()
    x = np.concatenate([np.asarray(m, dtype=float), np.asarray(faces, dtype=float)], axis=-1) / 2
    return x @ P.T


def check_nondegeneracy(pv, classes, tol=1e-12, chunk=1 << 20, max_report=50):
    """Condition (1): ``det f_faces > 0``.  Condition (2): every -2 class pairs nontrivially with some ``alpha^i``."""
    det = float(np.linalg.det(pv.f_faces))
    basis = classes.basis
    P = pv.as_vector()
    n = basis.n_curves
    Pc = classes.curve_parts.astype(float) @ P[:, :n].T / 2  # (N, 3)
    Pf = classes.face_parts.astype(float) @ P[:, n:].T / 2  # (M, 3)
    scale = max(np.abs(P).max(), 1e-300)
    violations = []
    per = max(1, chunk // max(len(Pc), 1))
    for start in range(0, len(Pf), per):
        block = Pf[start:start + per]
        total = np.abs(Pc[None, :, :] + block[:, None, :]).max(axis=-1)
        hits = np.argwhere(total <= tol * scale)
        for fi, ci in hits:
            if len(violations) < max_report:
                violations.append(class_name(basis, classes.curve_parts[ci], classes.face_parts[start + fi]))
            else:
                violations.append(None)
    named = [v for v in violations if v is not None]
    return NondegeneracyReport(det > 0, det, not violations, named, len(classes))
