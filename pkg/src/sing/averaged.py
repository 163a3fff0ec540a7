"""Joint fit by averaging matched subject scores from separate fits.

The matched score columns of the two separate fits are unit-normed,
sign-aligned and averaged. Each dataset's joint signal ``J = M^J S^J`` is
then refit to the averaged scores by alternating an orthogonal Procrustes
step for the components and a closed-form step for the diagonal scaling.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .lngca import LngcaFit
from .matching import greedy_match

log = logging.getLogger(__name__)


@dataclass
class AveragedFit:
    M_J: np.ndarray  # n x r_J, unit columns
    D_x: np.ndarray
    D_y: np.ndarray
    S_Jx: np.ndarray
    S_Jy: np.ndarray
    procrustes_iterations: tuple = (0, 0)
    objective_x: list = field(default_factory=list)
    objective_y: list = field(default_factory=list)

    @property
    def r_J(self) -> int:
        return self.M_J.shape[1]

    @property
    def J_x(self) -> np.ndarray:
        return self.M_J @ np.diag(self.D_x) @ self.S_Jx

    @property
    def J_y(self) -> np.ndarray:
        return self.M_J @ np.diag(self.D_y) @ self.S_Jy


def _unit_columns(M):
    norms = np.linalg.norm(M, axis=0)
    if np.any(norms == 0):
        raise ValueError("zero mixing column")
    return M / norms, norms


def align_columns(Mx_J, My_J):
    """Unit-norm both matrices and flip ``My_J`` columns to a non-negative inner product.

    Returns ``(Ax, Ay, Dx, Dy)`` with ``Mx_J = Ax diag(Dx)`` and
    ``My_J = Ay diag(Dy)``.
    """
    Mx_J = np.atleast_2d(np.asarray(Mx_J, dtype=float))
    My_J = np.atleast_2d(np.asarray(My_J, dtype=float))
    if Mx_J.shape != My_J.shape:
        raise ValueError("matched mixing matrices must have the same shape")
    Ax, nx = _unit_columns(Mx_J)
    Ay, ny = _unit_columns(My_J)
    sign = np.where(np.sum(Ax * Ay, axis=0) < 0, -1.0, 1.0)
    return Ax, Ay * sign, nx, ny * sign


def average_mixing(Mx_J, My_J) -> np.ndarray:
    """Unit-norm average of sign-aligned, unit-normed matched columns."""
    Ax, Ay, _, _ = align_columns(Mx_J, My_J)
    avg = 0.5 * (Ax + Ay)
    norms = np.linalg.norm(avg, axis=0)
    if np.any(norms < 1e-12):
        raise ValueError("matched columns cancel after sign alignment")
    return avg / norms


def refit_objective(J, M_J, D, S) -> float:
    R = J - M_J @ np.diag(D) @ S
    return float(np.sum(R * R))


def procrustes_components(J, M_J, D) -> np.ndarray:
    """``S`` with ``S S^T = p I`` minimizing ``|J - M_J diag(D) S|_F`` for fixed ``D``."""
    p = J.shape[1]
    A = J.T @ M_J @ np.diag(D)
    U, sv, Vt = np.linalg.svd(A, full_matrices=False)
    if sv[-1] <= sv[0] * 1e-12:
        raise ValueError("rank-deficient Procrustes problem")
    return np.sqrt(p) * (U @ Vt).T


def procrustes_refit(J, M_J, D0=None, tol: float = 0.1, max_iter: int = 100):
    """Alternate Procrustes and diagonal updates for ``min |J - M_J diag(D) S|``.

    ``M_J`` must have unit-norm columns. With ``S S^T = p I`` the optimal
    diagonal for fixed ``S`` is ``diag(S J^T M_J) / p``. Stops when the
    largest change in ``D`` is below ``tol``. Returns
    ``(S, D, n_iter, objective_trace)``.
    """
    J = np.asarray(J, dtype=float)
    M_J = np.asarray(M_J, dtype=float)
    if not np.allclose(np.linalg.norm(M_J, axis=0), 1.0, atol=1e-10):
        raise ValueError("M_J must have unit-norm columns")
    p = J.shape[1]
    D = np.linalg.norm(J.T @ M_J, axis=0) / np.sqrt(p) if D0 is None else np.array(D0, dtype=float)
    trace = []
    S = None
    it = 0
    for it in range(1, max_iter + 1):
        S = procrustes_components(J, M_J, D)
        D_new = np.einsum("ij,ji->i", S @ J.T, M_J) / p
        trace.append(refit_objective(J, M_J, D_new, S))
        change = np.max(np.abs(D_new - D))
        D = D_new
        if change < tol:
            break
    else:
        log.warning("Procrustes refit hit max_iter=%d", max_iter)
    return S, D, it, trace


def sing_averaged(fit_x: LngcaFit, fit_y: LngcaFit, r_J: int,
                  tol: float = 0.1, max_iter: int = 100) -> AveragedFit:
    """Averaged joint fit from two separate fits, matching their scores greedily."""
    pairs, _ = greedy_match(fit_x.M, fit_y.M)
    if r_J > len(pairs):
        raise ValueError("r_J exceeds the number of matched pairs")
    ix, iy = pairs[:r_J, 0], pairs[:r_J, 1]
    Mx_J, My_J = fit_x.M[:, ix], fit_y.M[:, iy]
    _, _, Dx0, Dy0 = align_columns(Mx_J, My_J)
    M_J = average_mixing(Mx_J, My_J)
    Jx = Mx_J @ fit_x.S[ix]
    Jy = My_J @ fit_y.S[iy]
    Sx, Dx, kx, tx = procrustes_refit(Jx, M_J, Dx0, tol, max_iter)
    Sy, Dy, ky, ty = procrustes_refit(Jy, M_J, Dy0, tol, max_iter)
    return AveragedFit(M_J, Dx, Dy, Sx, Sy, (kx, ky), tx, ty)
