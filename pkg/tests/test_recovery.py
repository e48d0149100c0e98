import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import philox
from hklab.errors import NondegeneracyFailure
from hklab.models import Lattice3
from hklab.recovery import FacePeriods, adjugate, face_periods_of, recover_basis


def cofactor_adjugate(m):
    """Transpose of the cofactor matrix, one 2x2 minor at a time."""
    out = np.zeros((3, 3))
    for i in range(3):
        for j in range(3):
            minor = np.delete(np.delete(m, i, axis=0), j, axis=1)
            out[j, i] = (-1) ** (i + j) * np.linalg.det(minor)
    return out


def positive_basis(rng):
    A = rng.standard_normal((3, 3))
    if np.linalg.det(A) < 0:
        A[0] *= -1
    return A


def test_adjugate_examples():
    assert np.array_equal(adjugate(np.eye(3)), np.eye(3))
    assert np.array_equal(adjugate(np.diag([1.0, 2, 3])), np.diag([6.0, 3, 2]))
    m = np.outer([1.0, 2, 3], [4.0, -1, 2])
    adj = adjugate(m)
    assert np.linalg.matrix_rank(adj) <= 1
    assert np.allclose(adj @ m, 0)


def test_adjugate_matches_cofactors(rng):
    for _ in range(50):
        m = rng.standard_normal((3, 3))
        assert np.allclose(adjugate(m), cofactor_adjugate(m), atol=1e-13)
        assert np.allclose(adjugate(m) @ m, np.linalg.det(m) * np.eye(3), atol=1e-12)


def test_det_of_adjugate(rng):
    m = rng.standard_normal((1000, 3, 3))
    lhs = np.linalg.det(adjugate(m))
    rhs = np.linalg.det(m) ** 2
    assert np.max(np.abs(lhs - rhs) / np.abs(rhs)) <= 1e-9


def test_recover_examples():
    assert np.allclose(recover_basis(FacePeriods(np.eye(3))).basis, np.eye(3))
    assert np.allclose(recover_basis(FacePeriods(np.diag([6.0, 3, 2]))).basis, np.diag([1.0, 2, 3]))
    assert np.array_equal(face_periods_of(Lattice3.cubic()).f, np.eye(3))
    with pytest.raises(NondegeneracyFailure):
        recover_basis(FacePeriods(np.diag([-1.0, 1, 1])))
    with pytest.raises(NondegeneracyFailure):
        recover_basis(FacePeriods(np.diag([0.0, 1, 1])))


def test_face_periods_are_cross_products(rng):
    A = positive_basis(rng)
    f = face_periods_of(Lattice3(A)).f
    for k, (b, c) in enumerate([(1, 2), (2, 0), (0, 1)]):
        assert np.allclose(f[:, k], np.cross(A[b], A[c]))


def test_roundtrip_1000(rng):
    worst = 0.0
    for _ in range(1000):
        A = positive_basis(rng)
        worst = max(worst, np.abs(recover_basis(face_periods_of(Lattice3(A))).basis - A).max())
    assert worst <= 1e-10


def test_negative_orientation_recovers_reflection(rng):
    A = positive_basis(rng)
    A[0] *= -1
    fp = face_periods_of(Lattice3(A))
    assert fp.det > 0
    assert np.allclose(recover_basis(fp).basis, -A, atol=1e-12)


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=100)
def test_failure_exactly_when_det_nonpositive(seed):
    f = philox(seed).standard_normal((3, 3))
    if np.linalg.det(f) > 0:
        lat = recover_basis(FacePeriods(f))
        assert np.allclose(face_periods_of(lat).f, f, atol=1e-10 * max(1.0, np.abs(f).max()))
    else:
        with pytest.raises(NondegeneracyFailure):
            recover_basis(FacePeriods(f))
