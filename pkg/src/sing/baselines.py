"""PCA-based comparison methods: Joint ICA and mCCA+jICA.

Both use the same JB contrast as the rest of the package. Data are double
centered and each dataset is divided by the square root of the mean of its
squared entries before anything else.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .contrast import DEFAULT_CONTRAST, ContrastConfig, jb, skewness
from .lngca import MultiStartConfig, ica_rotation
from .preprocess import double_center

CCA_RIDGE = 1e-8


@dataclass
class JointIcaFit:
    scores: np.ndarray  # n x r_J, shared by both datasets
    loadings_x: np.ndarray
    loadings_y: np.ndarray
    scale_x: float
    scale_y: float
    jb_values: np.ndarray

    @property
    def scores_x(self) -> np.ndarray:
        return self.scores

    @property
    def scores_y(self) -> np.ndarray:
        return self.scores

    @property
    def J_x(self) -> np.ndarray:
        return self.scale_x * self.scores @ self.loadings_x

    @property
    def J_y(self) -> np.ndarray:
        return self.scale_y * self.scores @ self.loadings_y


@dataclass
class MccaJicaFit:
    scores_x: np.ndarray
    scores_y: np.ndarray
    loadings_x: np.ndarray
    loadings_y: np.ndarray
    canonical_correlations: np.ndarray
    scale_x: float
    scale_y: float
    jb_values: np.ndarray

    @property
    def J_x(self) -> np.ndarray:
        return self.scale_x * self.scores_x @ self.loadings_x

    @property
    def J_y(self) -> np.ndarray:
        return self.scale_y * self.scores_y @ self.loadings_y


def _standardize(X):
    Xc = double_center(X).values
    scale = float(np.sqrt(np.mean(Xc * Xc)))
    if scale == 0:
        raise ValueError("dataset is constant after centering")
    return Xc / scale, scale


def _concat_ica(C, k, cfg, contrast):
    """PCA of ``C`` to ``k`` directions, then a JB rotation.

    Returns ``(T, S)`` with ``C ~= T @ S``, rows of ``S`` sorted by JB and
    signed to non-negative skewness.
    """
    P = C.shape[1]
    A, sv, Bt = np.linalg.svd(C, full_matrices=False)
    if k > int(np.sum(sv > sv[0] * 1e-10)):
        raise ValueError(f"r_J={k} exceeds the rank of the concatenated data")
    Z = np.sqrt(P) * Bt[:k]
    W, _ = ica_rotation(Z, cfg, contrast)
    S = W @ Z
    T = A[:, :k] * sv[:k] @ W.T / np.sqrt(P)
    values = jb(S, contrast)
    order = np.argsort(-values, kind="stable")
    S, T, values = S[order], T[:, order], values[order]
    flip = np.where(skewness(S) < 0, -1.0, 1.0)
    return T * flip, S * flip[:, None], values


def joint_ica(X, Y, r_J: int, cfg: MultiStartConfig = MultiStartConfig(),
              contrast: ContrastConfig = DEFAULT_CONTRAST) -> JointIcaFit:
    """Concatenate the standardized datasets, reduce by PCA and rotate by JB."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape[0] != Y.shape[0]:
        raise ValueError("datasets must have the same subjects")
    if not 1 <= r_J <= X.shape[0] - 1:
        raise ValueError("r_J must lie in [1, n - 1]")
    Xs, sx = _standardize(X)
    Ys, sy = _standardize(Y)
    px = Xs.shape[1]
    M, S, values = _concat_ica(np.hstack([Xs, Ys]), r_J, cfg, contrast)
    return JointIcaFit(M, S[:, :px], S[:, px:], sx, sy, values)


def _inv_sqrt(C):
    w, V = np.linalg.eigh(C)
    return (V / np.sqrt(w)) @ V.T


def cca(Px, Py, ridge: float = CCA_RIDGE):
    """Canonical correlation analysis of two column-centered score matrices.

    Returns ``(a, b, corr)`` with canonical variates ``Px @ a`` and
    ``Py @ b`` of unit variance and correlations ``corr`` in decreasing order.
    A relative ridge keeps the within-set covariances invertible.
    """
    n = Px.shape[0]
    Cxx = Px.T @ Px / n
    Cyy = Py.T @ Py / n
    Cxy = Px.T @ Py / n
    Cxx = Cxx + ridge * np.trace(Cxx) / len(Cxx) * np.eye(len(Cxx))
    Cyy = Cyy + ridge * np.trace(Cyy) / len(Cyy) * np.eye(len(Cyy))
    Kx, Ky = _inv_sqrt(Cxx), _inv_sqrt(Cyy)
    P, corr, Qt = np.linalg.svd(Kx @ Cxy @ Ky)
    k = len(corr)
    return Kx @ P[:, :k], Ky @ Qt[:k].T, np.clip(corr, 0.0, 1.0)


def _pc_scores(Xs, r):
    A, sv, _ = np.linalg.svd(Xs, full_matrices=False)
    return A[:, :r] * sv[:r]


def mcca_jica(X, Y, r_x: int, r_y: int, r_J: int,
              cfg: MultiStartConfig = MultiStartConfig(),
              contrast: ContrastConfig = DEFAULT_CONTRAST) -> MccaJicaFit:
    """Separate PCA, CCA on the PC scores, then Joint ICA of the canonical loadings.

    The top ``r_J`` canonical variates of each dataset define loadings by
    regression; the loadings are concatenated and rotated to maximize JB,
    and the same rotation is applied to both sets of canonical variates.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n = X.shape[0]
    if Y.shape[0] != n:
        raise ValueError("datasets must have the same subjects")
    if not 1 <= r_J <= min(r_x, r_y) or max(r_x, r_y) > n - 1:
        raise ValueError("need 1 <= r_J <= min(r_x, r_y) and r_x, r_y <= n - 1")
    Xs, sx = _standardize(X)
    Ys, sy = _standardize(Y)
    px = Xs.shape[1]
    Px, Py = _pc_scores(Xs, r_x), _pc_scores(Ys, r_y)
    a, b, corr = cca(Px, Py)
    Vx, Vy = Px @ a[:, :r_J], Py @ b[:, :r_J]
    Lx = np.linalg.lstsq(Vx, Xs, rcond=None)[0]
    Ly = np.linalg.lstsq(Vy, Ys, rcond=None)[0]
    T, S, values = _concat_ica(np.hstack([Lx, Ly]), r_J, cfg, contrast)
    return MccaJicaFit(Vx @ T, Vy @ T, S[:, :px], S[:, px:], corr, sx, sy, values)
