"""Cross-section torus lattice from the nine face periods.

With lattice basis rows ``v_1, v_2, v_3`` the period of ``dth^i`` components over
the face spanned by ``v_b, v_c`` (faces ordered 23, 31, 12) is ``(v_b x v_c)_i``,
i.e. the face-period matrix is ``adj(A)`` for ``A`` with rows ``v_i``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NondegeneracyFailure
from .models import Lattice3


def adjugate(m):
    """Classical adjoint via cofactors (valid for singular ``m``)."""
    m = np.asarray(m, dtype=float)
    c0, c1, c2 = m[..., :, 0], m[..., :, 1], m[..., :, 2]
    # rows of adj(m) are cross products of columns of m
    adj = np.stack([np.cross(c1, c2), np.cross(c2, c0), np.cross(c0, c1)], axis=-2)
    return adj


@dataclass
class FacePeriods:
    """``f[i, k]`` = integral of the i-th form over face ``k`` in the order (F23, F31, F12)."""

    f: np.ndarray

    def __post_init__(self):
        self.f = np.array(self.f, dtype=float).reshape(3, 3)

    @property
    def det(self):
        return float(np.linalg.det(self.f))

    def nondegenerate(self):
        return self.det > 0


def face_periods_of(lat):
    """Face periods of the standard cross-section with lattice ``lat``."""
    B = lat.basis if isinstance(lat, Lattice3) else np.asarray(lat, dtype=float)
    return FacePeriods(adjugate(B))


def recover_basis(fp):
    """Lattice with ``adj(A) = f`` and ``det A > 0``: ``A = det(f)^{-1/2} adj(f)``."""
    f = fp.f if isinstance(fp, FacePeriods) else np.asarray(fp, dtype=float)
    det = float(np.linalg.det(f))
    if not det > 0:
        raise NondegeneracyFailure(f"face period determinant {det:.3e} is not positive")
    return Lattice3(adjugate(f) / np.sqrt(det))
