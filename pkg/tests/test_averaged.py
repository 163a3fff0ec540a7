import numpy as np
import pytest
from scipy.optimize import minimize

from sing.averaged import (
    align_columns, average_mixing, procrustes_components, procrustes_refit, refit_objective,
    sing_averaged,
)
from sing.lngca import MultiStartConfig, fit_lngca
from sing.preprocess import prepare

from helpers import joint_pair


def test_average_of_identical_columns(rng):
    M = rng.standard_normal((7, 2))
    assert np.allclose(average_mixing(M, 3 * M), M / np.linalg.norm(M, axis=0))


def test_sign_flipped_copy(rng):
    m = rng.standard_normal((7, 1))
    assert np.allclose(average_mixing(m, -m), m / np.linalg.norm(m))
    _, _, dx, dy = align_columns(m, -2 * m)
    assert dy[0] == pytest.approx(-2 * dx[0])


def test_sixty_degree_bisector():
    x = np.array([[1.0], [0.0]])
    y = np.array([[0.5], [np.sqrt(3) / 2]])
    avg = average_mixing(x, y)[:, 0]
    assert np.allclose(avg, [np.cos(np.pi / 6), np.sin(np.pi / 6)])


def test_cancelling_columns_rejected():
    with pytest.raises(ValueError):
        average_mixing(np.zeros((3, 1)), np.ones((3, 1)))
    with pytest.raises(ValueError):
        align_columns(np.ones((3, 1)), np.ones((3, 2)))


def test_refit_reproduces_separate_fit():
    X, _, _ = joint_pair(seed=2)
    fit = fit_lngca(prepare(X), 3, MultiStartConfig(n_restarts=2))
    norms = np.linalg.norm(fit.M, axis=0)
    J = fit.M @ fit.S
    S, D, _, _ = procrustes_refit(J, fit.M / norms, norms, tol=1e-10)
    assert np.allclose(S, fit.S, atol=1e-6)
    assert np.allclose(D, norms, atol=1e-6)


def oracle_objective(J, M, d):
    """Objective with S profiled out: |J|^2 - 2 sqrt(p) |J^T M D|_* + p |d|^2."""
    p = J.shape[1]
    nuc = np.linalg.svd(J.T @ M @ np.diag(d), compute_uv=False).sum()
    return np.sum(J * J) - 2 * np.sqrt(p) * nuc + p * np.sum(d * d)


def test_alternating_matches_grid_oracle():
    rng = np.random.default_rng(7)
    n, p = 6, 20
    M = rng.standard_normal((n, 2))
    M /= np.linalg.norm(M, axis=0)
    S0 = np.linalg.qr(rng.standard_normal((p, 2)))[0].T * np.sqrt(p)
    J = M @ np.diag([2.0, 0.7]) @ S0 + 0.3 * rng.standard_normal((n, p))
    grid = np.linspace(0.0, 4.0, 201)
    vals = np.array([[oracle_objective(J, M, np.array([a, b])) for b in grid] for a in grid])
    i, j = np.unravel_index(np.argmin(vals), vals.shape)
    best = minimize(lambda d: oracle_objective(J, M, d), [grid[i], grid[j]], method="Nelder-Mead",
                    options=dict(xatol=1e-10, fatol=1e-12))
    S, D, _, trace = procrustes_refit(J, M, tol=1e-10, max_iter=10_000)
    assert refit_objective(J, M, D, S) == pytest.approx(best.fun, abs=1e-4)
    assert trace[-1] == pytest.approx(refit_objective(J, M, D, S))


def test_alternation_never_increases_objective():
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n, p, k = 8, 30, 3
        M = rng.standard_normal((n, k))
        M /= np.linalg.norm(M, axis=0)
        J = rng.standard_normal((n, p))
        D0 = rng.uniform(0.1, 3.0, k)
        S, D, _, trace = procrustes_refit(J, M, D0, tol=1e-8, max_iter=200)
        start = refit_objective(J, M, D0, procrustes_components(J, M, D0))
        assert trace[0] <= start + 1e-9
        assert np.all(np.diff(trace) <= 1e-9)
        assert np.allclose(S @ S.T / p, np.eye(k), atol=1e-10)


def test_refit_input_checks(rng):
    with pytest.raises(ValueError):
        procrustes_refit(rng.standard_normal((5, 9)), rng.standard_normal((5, 2)))
    M = np.ones((5, 2)) / np.sqrt(5)
    with pytest.raises(ValueError):
        procrustes_components(rng.standard_normal((5, 9)), M, np.ones(2))


def test_sing_averaged_outputs():
    X, Y, M_J = joint_pair(seed=3)
    ms = MultiStartConfig(n_restarts=3)
    fx, fy = fit_lngca(prepare(X), 3, ms), fit_lngca(prepare(Y), 3, ms)
    fit = sing_averaged(fx, fy, 2)
    assert fit.M_J.shape == (12, 2)
    assert np.allclose(np.linalg.norm(fit.M_J, axis=0), 1)
    p = fit.S_Jx.shape[1]
    assert np.allclose(fit.S_Jx @ fit.S_Jx.T / p, np.eye(2), atol=1e-10)
    assert fit.J_x.shape == X.shape
    with pytest.raises(ValueError):
        sing_averaged(fx, fy, 4)
