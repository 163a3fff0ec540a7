"""Shared synthetic fixtures."""
import numpy as np


def planted_data(n=12, p=2000, k=2, seed=0, noise=0.0):
    """``M @ S`` with ``k`` skewed, orthogonal, unit-variance rows plus optional Gaussian rows."""
    rng = np.random.default_rng(seed)
    S = rng.exponential(size=(k, p)) - 1.0
    S = np.linalg.qr(S.T)[0].T * np.sqrt(p)
    M = rng.standard_normal((n, k))
    X = M @ S
    if noise:
        X = X + noise * rng.standard_normal((n, n - 1)) @ rng.standard_normal((n - 1, p))
    return X, M, S


def joint_pair(seed=0, n=12, p=1500, noise=0.3):
    """Two datasets sharing two score columns, each with one individual component."""
    rng = np.random.default_rng(seed)

    def comps(k):
        S = rng.exponential(size=(k, p)) - 1.0
        return np.linalg.qr(S.T)[0].T * np.sqrt(p)

    M_J = rng.standard_normal((n, 2))
    Sx, Sy = comps(3), comps(3)
    X = M_J @ Sx[:2] + rng.standard_normal((n, 1)) @ Sx[2:]
    Y = M_J @ np.diag([2.0, -1.0]) @ Sy[:2] + rng.standard_normal((n, 1)) @ Sy[2:]
    X = X + noise * rng.standard_normal((n, p))
    Y = Y + noise * rng.standard_normal((n, p))
    return X, Y, M_J
