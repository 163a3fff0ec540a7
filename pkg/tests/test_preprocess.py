import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sing.preprocess import (
    ConvergenceError, center_columns, double_center, iterated_standardize_center, prepare, whiten,
)


def test_constant_matrix_centers_to_zero():
    assert np.all(double_center(np.full((4, 6), 3.5)).values == 0)


def test_double_center_idempotent(rng):
    Xc = double_center(rng.standard_normal((6, 9))).values
    assert np.allclose(double_center(Xc).values, Xc, atol=1e-12)


def test_double_center_matches_projectors(rng):
    X = rng.standard_normal((5, 7))
    Xc = double_center(X).values
    Hn = np.eye(5) - np.ones((5, 5)) / 5
    Hp = np.eye(7) - np.ones((7, 7)) / 7
    assert np.allclose(Xc, Hn @ X @ Hp, atol=1e-12)
    assert np.abs(Xc.sum(axis=0)).max() < 1e-10
    assert np.abs(Xc.sum(axis=1)).max() < 1e-10


@given(arrays(float, (4, 6), elements=st.floats(-1e3, 1e3)))
def test_double_center_row_and_column_sums(X):
    Xc = double_center(X).values
    scale = max(1.0, np.abs(X).max())
    assert np.abs(Xc.sum(axis=0)).max() < 1e-9 * scale
    assert np.abs(Xc.sum(axis=1)).max() < 1e-9 * scale


def test_double_center_rejects_tiny_or_nonfinite():
    with pytest.raises(ValueError):
        double_center(np.ones((2, 4)))
    with pytest.raises(ValueError):
        double_center(np.array([[1.0, np.inf]] * 3))


def test_column_centering_keeps_row_means(rng):
    X = rng.standard_normal((5, 8)) + np.arange(5)[:, None]
    Xc = center_columns(X).values
    assert np.allclose(Xc.mean(axis=0), 0)
    assert not np.allclose(Xc.mean(axis=1), 0)


def test_iterated_standardize_fixed_point(rng):
    X = iterated_standardize_center(rng.standard_normal((20, 200)), tol=1e-12, max_iter=500).values
    out = iterated_standardize_center(X)
    assert out.iterations_used == 1
    assert np.allclose(out.values, X, atol=1e-6)


def test_iterated_standardize_converges_quickly(rng):
    out = iterated_standardize_center(rng.standard_normal((20, 200)), tol=1e-6)
    assert out.iterations_used <= 20


def test_single_pass_matches_two_step_composition():
    X = np.array([[1.0, 2.0, 4.0, 7.0], [0.0, 3.0, 1.0, 2.0], [5.0, 1.0, 2.0, 0.5]])
    Z = (X - X.mean(axis=0)) / X.std(axis=0)
    Z = Z - Z.mean(axis=1, keepdims=True)
    out = iterated_standardize_center(X, max_iter=1, tol=np.inf)
    assert np.allclose(out.values, Z)


def test_iterated_standardize_errors(rng):
    with pytest.raises(ValueError):
        iterated_standardize_center(np.ones((4, 3)))
    with pytest.raises(ConvergenceError):
        iterated_standardize_center(rng.standard_normal((6, 8)), max_iter=1, tol=0.0)


def test_whiten_isotropic_rows():
    p = 40
    Q = np.linalg.qr(np.random.default_rng(1).standard_normal((p, 3)))[0].T * 3.0
    wd = whiten(Q)
    assert np.allclose(wd.L, np.eye(3) * np.sqrt(p) / 3.0)
    assert np.allclose(wd.Xw @ wd.Xw.T / p, np.eye(3))


def test_whiten_rank_and_projector(rng):
    wd = prepare(rng.standard_normal((10, 50)))
    assert wd.retained_rank == 9
    proj = wd.Xw @ wd.Xw.T / wd.p
    assert np.allclose(proj, wd.basis @ wd.basis.T, atol=1e-10)
    assert np.allclose(wd.reduced @ wd.reduced.T / wd.p, np.eye(9), atol=1e-10)


@given(st.integers(0, 10_000))
def test_whiten_round_trip(seed):
    X = np.random.default_rng(seed).standard_normal((8, 30))
    wd = prepare(X)
    assert np.allclose(wd.L_inv @ wd.L @ wd.Xc, wd.Xc, atol=1e-8)


def test_prepare_rejects_unknown_centering(rng):
    with pytest.raises(ValueError):
        prepare(rng.standard_normal((5, 9)), center="none")
    with pytest.raises(ValueError):
        whiten(np.zeros((4, 5)))
