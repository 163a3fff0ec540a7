"""Centering, standardization and whitening."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .data_model import DataMatrix

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class CenteredData:
    values: np.ndarray
    iterations_used: int = 1

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class WhitenedData:
    """Whitened data and the operators that produced it.

    ``L`` maps centered data to ``Xw = L @ Xc`` with ``Xw Xw^T / p`` equal to
    the projector onto the retained eigenspace. ``L_inv`` is its inverse on
    that subspace, ``V diag(sqrt(eigenvalues)) V^T``, so mixing matrices built
    as ``L_inv @ U.T`` satisfy ``M = Xc S^T / p``.
    """

    Xw: np.ndarray
    L: np.ndarray
    L_inv: np.ndarray
    retained_rank: int
    eigenvalues: np.ndarray
    basis: np.ndarray
    Xc: np.ndarray

    @property
    def n(self) -> int:
        return self.Xw.shape[0]

    @property
    def p(self) -> int:
        return self.Xw.shape[1]

    @property
    def reduced(self) -> np.ndarray:
        """Whitened data in the coordinates of the retained eigenbasis (q x p)."""
        return self.basis.T @ self.Xw


def _as_array(X) -> np.ndarray:
    if isinstance(X, (DataMatrix, CenteredData)):
        return np.asarray(X.values, dtype=float)
    arr = np.asarray(X, dtype=float)
    if arr.ndim != 2:
        raise ValueError("expected a 2-d matrix")
    return arr


def double_center(X) -> CenteredData:
    """Remove row and column means: ``(I - 11^T/n) X (I - 11^T/p)``."""
    arr = _as_array(X)
    if arr.shape[0] < 3:
        raise ValueError("double centering needs at least 3 subjects")
    if not np.all(np.isfinite(arr)):
        raise ValueError("data matrix contains non-finite entries")
    out = arr - arr.mean(axis=0, keepdims=True)
    out = out - out.mean(axis=1, keepdims=True)
    return CenteredData(out, 1)


def iterated_standardize_center(X, max_iter: int = 100, tol: float = 1e-6) -> CenteredData:
    """Alternate feature standardization and subject centering until stable.

    Each pass standardizes every feature across subjects (mean 0, variance 1)
    and then centers every subject across features. Iteration stops once a
    pass leaves feature variances, feature means and subject means within
    ``tol`` of their targets.
    """
    arr = _as_array(X).copy()
    if not np.all(np.isfinite(arr)):
        raise ValueError("data matrix contains non-finite entries")
    if np.any(arr.std(axis=0) == 0):
        raise ValueError("zero-variance feature cannot be standardized")

    def residual(a):
        return max(
            np.max(np.abs(a.var(axis=0) - 1.0)),
            np.max(np.abs(a.mean(axis=0))),
            np.max(np.abs(a.mean(axis=1))),
        )

    for it in range(1, max_iter + 1):
        sd = arr.std(axis=0)
        if np.any(sd == 0):
            raise ValueError("a feature lost all variance during centering")
        arr = (arr - arr.mean(axis=0)) / sd
        arr = arr - arr.mean(axis=1, keepdims=True)
        if residual(arr) < tol:
            return CenteredData(arr, it)
    raise ConvergenceError(
        f"no convergence in {max_iter} iterations (residual {residual(arr):.3g})"
    )


def whiten(Xc, rank_tol: float = 1e-10) -> WhitenedData:
    """Whiten the subject dimension via an economy eigendecomposition.

    Uses ``Sigma = Xc Xc^T / p = V diag(lam) V^T`` restricted to eigenvalues above
    ``rank_tol * lam_max``; ``L = V diag(lam^-1/2) V^T``.
    """
    arr = _as_array(Xc)
    n, p = arr.shape
    sigma = arr @ arr.T / p
    lam, vec = np.linalg.eigh((sigma + sigma.T) / 2)
    order = np.argsort(lam)[::-1]
    lam, vec = lam[order], vec[:, order]
    if lam[0] <= 0:
        raise ValueError("data has no variance to whiten")
    keep = lam > rank_tol * lam[0]
    q = int(keep.sum())
    V, lq = vec[:, :q], lam[:q]
    L = (V / np.sqrt(lq)) @ V.T
    L_inv = (V * np.sqrt(lq)) @ V.T
    L = (L + L.T) / 2
    L_inv = (L_inv + L_inv.T) / 2
    Xw = L @ arr
    return WhitenedData(
        Xw=Xw,
        L=L,
        L_inv=L_inv,
        retained_rank=q,
        eigenvalues=np.clip(lam, 0, None),
        basis=V,
        Xc=arr,
    )


def center_columns(X) -> CenteredData:
    """Remove feature means across subjects only, leaving subject means intact."""
    arr = _as_array(X)
    if arr.shape[0] < 3:
        raise ValueError("centering needs at least 3 subjects")
    if not np.all(np.isfinite(arr)):
        raise ValueError("data matrix contains non-finite entries")
    return CenteredData(arr - arr.mean(axis=0, keepdims=True), 1)


CENTERINGS = {"double": double_center, "column": center_columns}


def prepare(X, rank_tol: float = 1e-10, center: str = "double") -> WhitenedData:
    """Center then whiten; the common entry point for fitting.

    ``center="double"`` removes subject and feature means. ``center="column"``
    only removes feature means, which keeps components with a non-zero mean
    (for example exactly sparse ones) intact.
    """
    if center not in CENTERINGS:
        raise ValueError(f"unknown centering {center!r}")
    return whiten(CENTERINGS[center](X), rank_tol=rank_tol)
