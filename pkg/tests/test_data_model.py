import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sing.data_model import (
    ComponentMatrix, DataMatrix, MixingMatrix, SignedPermutation, UnmixingMatrix,
    apply_signed_permutation,
)


def test_data_matrix_rejects_bad_input():
    with pytest.raises(ValueError):
        DataMatrix(np.zeros((2, 5)))
    with pytest.raises(ValueError):
        DataMatrix(np.array([[1.0, np.nan]] * 3))
    X = DataMatrix(np.ones((3, 4)))
    assert (X.n, X.p) == (3, 4)
    assert not X.values.flags.writeable


def test_component_matrix_orthogonality(rng):
    Q = np.linalg.qr(rng.standard_normal((30, 3)))[0].T * np.sqrt(30)
    assert ComponentMatrix(Q).r == 3
    with pytest.raises(ValueError):
        ComponentMatrix(Q * 2)


def test_mixing_and_unmixing_checks(rng):
    with pytest.raises(ValueError):
        MixingMatrix(np.ones((5, 2)))
    A = rng.standard_normal((5, 2))
    with pytest.raises(ValueError):
        MixingMatrix(A, unit_norm=True)
    MixingMatrix(A / np.linalg.norm(A, axis=0), unit_norm=True)
    U = np.linalg.qr(rng.standard_normal((6, 3)))[0].T
    UnmixingMatrix(U)
    with pytest.raises(ValueError):
        UnmixingMatrix(U * 1.1)


def test_identity_and_inverse(rng):
    S = rng.standard_normal((4, 9))
    assert np.array_equal(apply_signed_permutation(S, SignedPermutation.identity(4)), S)
    P = SignedPermutation([2, 0, 3, 1], [1, -1, -1, 1])
    back = apply_signed_permutation(apply_signed_permutation(S, P), P.inverse())
    assert np.allclose(back, S)


def test_swap_with_sign_matches_index_arithmetic(rng):
    S = rng.standard_normal((2, 5))
    out = apply_signed_permutation(S, SignedPermutation([1, 0], [-1, 1]))
    for j in range(5):
        assert out[0, j] == -S[1, j]
        assert out[1, j] == S[0, j]


def test_signed_permutation_validation():
    with pytest.raises(ValueError):
        SignedPermutation([0, 0])
    with pytest.raises(ValueError):
        SignedPermutation([0, 1], [1, 2])


@given(st.permutations(range(5)), st.lists(st.sampled_from([-1.0, 1.0]), min_size=5, max_size=5))
def test_as_matrix_agrees_with_apply(perm, signs):
    P = SignedPermutation(perm, signs)
    S = np.arange(15.0).reshape(5, 3)
    assert np.array_equal(P.as_matrix() @ S, apply_signed_permutation(S, P))
    assert np.allclose(P.inverse().as_matrix(), P.as_matrix().T)


def test_component_matrix_roundtrip(rng):
    Q = np.linalg.qr(rng.standard_normal((20, 3)))[0].T * np.sqrt(20)
    out = apply_signed_permutation(ComponentMatrix(Q), SignedPermutation([1, 2, 0]))
    assert isinstance(out, ComponentMatrix)
