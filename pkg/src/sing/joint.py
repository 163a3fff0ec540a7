"""Joint estimation of shared subject scores across two datasets.

The objective is

    F(Ux, Uy) = -sum_l jb(Ux[l] Xw) - sum_l jb(Uy[l] Yw)
                + rho * sum_{l < r_J} d(Lx_inv Ux[l], Ly_inv Uy[l])

with ``d`` the chordal distance, minimised over row-orthonormal ``Ux`` and
``Uy`` by a curvilinear search: both matrices move along Cayley curves
``U (I - tau/2 W) (I + tau/2 W)^{-1}`` with skew-symmetric ``W = U^T G^T - G U``
and ``tau = tau0 * backtrack**h`` for the smallest ``h`` that lowers ``F``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .contrast import DEFAULT_CONTRAST, ContrastConfig, jb, jb_rows_and_grad, skewness
from .lngca import LngcaFit, symmetric_orthonormalize
from .matching import greedy_match, reorder_by_match
from .metrics import iterate_change
from .preprocess import WhitenedData

log = logging.getLogger(__name__)

DRIFT_TOL = 1e-9


@dataclass(frozen=True)
class SingConfig:
    rho: float = 0.0
    rho_rule: str = "explicit"  # or "jb_sum_over_10"
    epsilon: float = 1e-6
    max_iter: int = 10000
    tau0: float = 0.01
    backtrack: float = 0.8
    max_backtracks: int = 50
    update: str = "joint"  # or "alternating"

    def __post_init__(self):
        if self.rho < 0:
            raise ValueError("rho must be non-negative")
        if self.tau0 <= 0:
            raise ValueError("tau0 must be positive")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack must lie in (0, 1)")
        if self.rho_rule not in ("explicit", "jb_sum_over_10"):
            raise ValueError(f"unknown rho rule {self.rho_rule!r}")
        if self.update not in ("joint", "alternating"):
            raise ValueError(f"unknown update scheme {self.update!r}")


@dataclass
class JointFit:
    M_J: np.ndarray  # n x r_J unit columns, from X
    M_Jy: np.ndarray  # n x r_J unit columns from Y, sign-aligned with M_J
    D_x: np.ndarray
    D_y: np.ndarray
    S_Jx: np.ndarray
    S_Jy: np.ndarray
    M_Ix: np.ndarray
    M_Iy: np.ndarray
    S_Ix: np.ndarray
    S_Iy: np.ndarray
    U_x: np.ndarray
    U_y: np.ndarray
    rho: float
    objective_trace: list = field(default_factory=list)
    converged: bool = False
    stalled: bool = False
    n_iter: int = 0
    joint_distances: np.ndarray = None
    condition_x: float = np.nan
    condition_y: float = np.nan

    @property
    def r_J(self) -> int:
        return self.M_J.shape[1]

    @property
    def M_Jx(self) -> np.ndarray:
        return self.M_J

    @property
    def J_x(self) -> np.ndarray:
        return self.M_J @ np.diag(self.D_x) @ self.S_Jx

    @property
    def J_y(self) -> np.ndarray:
        return self.M_Jy @ np.diag(self.D_y) @ self.S_Jy


@dataclass
class _Problem:
    Xw: np.ndarray
    Yw: np.ndarray
    Lx: np.ndarray  # un-whitening operators
    Ly: np.ndarray
    r_J: int
    rho: float
    contrast: ContrastConfig


def _whitened(w):
    return (w.Xw, w.L_inv) if isinstance(w, WhitenedData) else (np.asarray(w), None)


def _penalty_distances(Ux, Uy, prob: _Problem) -> np.ndarray:
    k = prob.r_J
    Bx = prob.Lx @ Ux[:k].T
    By = prob.Ly @ Uy[:k].T
    c2 = np.sum(Bx * By, axis=0) ** 2 / (np.sum(Bx * Bx, axis=0) * np.sum(By * By, axis=0))
    return np.clip(2.0 - 2.0 * c2, 0.0, 2.0)


def _penalty_terms(Ux, Uy, prob: _Problem):
    """Chordal distances of the joint columns and their gradients (n x r_J each)."""
    k = prob.r_J
    Bx = prob.Lx @ Ux[:k].T
    By = prob.Ly @ Uy[:k].T
    nx = np.linalg.norm(Bx, axis=0)
    ny = np.linalg.norm(By, axis=0)
    inner = np.sum(Bx * By, axis=0)
    c = inner / (nx * ny)
    d = np.clip(2.0 - 2.0 * c**2, 0.0, 2.0)
    # d/du_x with a_y = By / ny: -4 c (Lx a_y / nx - (u'Lx a_y) Lx^2 u / nx^3)
    ix = inner / ny
    gx = -4.0 * c * (prob.Lx @ (By / ny / nx - Bx * ix / nx**3))
    iy = inner / nx
    gy = -4.0 * c * (prob.Ly @ (Bx / nx / ny - By * iy / ny**3))
    return d, gx, gy


def penalty_gradient(u_xl, a_yl, L_inv_x, rho: float = 1.0):
    """Gradient of ``rho * d(L_inv_x u, a)`` with respect to ``u``.

    ``a_yl`` is the normalized partner direction ``Ly_inv u_y / |Ly_inv u_y|``.
    """
    u = np.asarray(u_xl, dtype=float)
    a = np.asarray(a_yl, dtype=float)
    L = np.asarray(L_inv_x, dtype=float)
    b = L @ u
    nb = np.linalg.norm(b)
    if nb == 0:
        raise ValueError("u maps to the zero vector")
    inner = b @ a
    c = inner / nb
    return -4.0 * rho * c * (L @ a / nb - inner * (L @ b) / nb**3)


def objective(Ux, Uy, Xw, Yw, L_inv_x, L_inv_y, r_J: int, rho: float,
              contrast: ContrastConfig = DEFAULT_CONTRAST) -> float:
    """Penalized objective; lower is better."""
    Ux = np.atleast_2d(Ux)
    Uy = np.atleast_2d(Uy)
    if Ux.shape[1] != Xw.shape[0] or Uy.shape[1] != Yw.shape[0]:
        raise ValueError("unmixing matrices do not match the data")
    if r_J > min(Ux.shape[0], Uy.shape[0]):
        raise ValueError("r_J exceeds the number of components")
    prob = _Problem(Xw, Yw, L_inv_x, L_inv_y, r_J, rho, contrast)
    return _objective(Ux, Uy, prob)


def _objective(Ux, Uy, prob: _Problem) -> float:
    return _objective_from_scores(Ux, Ux @ prob.Xw, Uy, Uy @ prob.Yw, prob)


def _objective_from_scores(Ux, Sx, Uy, Sy, prob: _Problem) -> float:
    value = -jb(Sx, prob.contrast).sum() - jb(Sy, prob.contrast).sum()
    if prob.r_J and prob.rho:
        value += prob.rho * _penalty_distances(Ux, Uy, prob).sum()
    return float(value)


def _gradients(Ux, Uy, prob: _Problem):
    """Euclidean gradients arranged as n x r matrices (one column per row of U)."""
    _, gx, _ = jb_rows_and_grad(Ux, prob.Xw, prob.contrast)
    _, gy, _ = jb_rows_and_grad(Uy, prob.Yw, prob.contrast)
    Gx, Gy = -gx.T, -gy.T
    if prob.r_J and prob.rho:
        _, px, py = _penalty_terms(Ux, Uy, prob)
        Gx[:, : prob.r_J] += prob.rho * px
        Gy[:, : prob.r_J] += prob.rho * py
    return Gx, Gy


def skew_direction(U, G) -> np.ndarray:
    """``W = U^T G^T - G U`` (n x n, skew-symmetric)."""
    return U.T @ G.T - G @ U


def cayley(U, W, tau: float) -> np.ndarray:
    """``U (I - tau/2 W)(I + tau/2 W)^{-1}`` via a linear solve."""
    n = W.shape[0]
    I = np.eye(n)
    A = I - 0.5 * tau * W  # transpose of (I + tau/2 W) since W is skew
    rhs = (I + 0.5 * tau * W) @ U.T
    return np.linalg.solve(A, rhs).T


class CayleyCurve:
    """The Cayley curve ``tau -> U (I - tau/2 W)(I + tau/2 W)^{-1}`` for ``W = U^T G^T - G U``.

    ``W = P Q^T`` with ``P = [U^T, -G]`` and ``Q = [G, U^T]`` has rank at most
    ``2r``, so by the Woodbury identity

        U(tau)^T = U^T + tau P (I - tau/2 Q^T P)^{-1} Q^T U^T,

    which only needs a ``2r x 2r`` solve. When data ``Z`` are given the
    projected scores ``U(tau) Z`` are updated through the same low-rank
    factor instead of a fresh ``r x n x p`` product.
    """

    def __init__(self, U, G, Z=None):
        self.U = U
        P = np.hstack([U.T, -G])
        Q = np.hstack([G, U.T])
        self.P = P
        self.QtP = Q.T @ P
        self.QtU = Q.T @ U.T
        self.S = None if Z is None else U @ Z
        self.PtZ = None if Z is None else P.T @ Z

    def at(self, tau: float):
        """``(U(tau), U(tau) @ Z)``; the second entry is None without data."""
        k = self.QtP.shape[0]
        C = np.linalg.solve(np.eye(k) - 0.5 * tau * self.QtP, self.QtU)
        U_new = self.U + tau * (self.P @ C).T
        S_new = None if self.S is None else self.S + tau * (C.T @ self.PtZ)
        return U_new, S_new


def curvilinear_step(Ux, Uy, Gx, Gy, tau: float):
    """Move both unmixing matrices along their Cayley curves by ``tau``."""
    return CayleyCurve(Ux, Gx).at(tau)[0], CayleyCurve(Uy, Gy).at(tau)[0]


def search_tau(trial, f_old: float, tau0: float = 0.01, backtrack: float = 0.8,
               max_backtracks: int = 50):
    """Largest ``tau0 * backtrack**h`` whose trial point lowers the objective.

    ``trial(tau)`` returns ``(state, f_new)``. The result is
    ``(tau, state, f_new)``, or ``None`` when no ``h <= max_backtracks``
    decreases the objective (a stall).
    """
    for h in range(max_backtracks + 1):
        tau = tau0 * backtrack**h
        try:
            state, f_new = trial(tau)
        except np.linalg.LinAlgError:
            continue
        if f_new < f_old:
            return tau, state, f_new
    return None


def select_tau(Ux, Uy, Wx, Wy, f, f_old: float, tau0: float = 0.01,
               backtrack: float = 0.8, max_backtracks: int = 50):
    """Step size for moving ``Ux`` and ``Uy`` along the Cayley curves of ``Wx``, ``Wy``.

    ``f(Ux, Uy)`` is the objective. Either skew matrix may be ``None`` to
    keep that matrix fixed. Returns ``(tau, Ux_new, Uy_new, f_new)`` or
    ``None`` on a stall.
    """
    def trial(tau):
        Vx = Ux if Wx is None else cayley(Ux, Wx, tau)
        Vy = Uy if Wy is None else cayley(Uy, Wy, tau)
        return (Vx, Vy), f(Vx, Vy)

    out = search_tau(trial, f_old, tau0, backtrack, max_backtracks)
    if out is None:
        return None
    tau, (Vx, Vy), f_new = out
    return tau, Vx, Vy, f_new


def default_rho(jb_joint_values) -> float:
    """Sum of the JB values of the joint components divided by ten."""
    values = np.asarray(jb_joint_values, dtype=float).ravel()
    if values.size == 0:
        raise ValueError("no joint JB values given")
    return float(values.sum() / 10.0)


def resolve_rho(cfg: SingConfig, Ux, Uy, wx, wy, r_J: int,
                contrast: ContrastConfig = DEFAULT_CONTRAST) -> float:
    """``cfg.rho``, or the JB-sum rule applied to the initial joint rows."""
    if cfg.rho_rule == "explicit":
        return cfg.rho
    values = np.r_[jb(Ux[:r_J] @ wx.Xw, contrast), jb(Uy[:r_J] @ wy.Xw, contrast)]
    return default_rho(values)


def initial_unmixing(fit_x: LngcaFit, fit_y: LngcaFit, r_J: int | None = None):
    """Reorder separate fits so their greedily matched score columns come first.

    Returns ``(Ux0, Uy0, pairs, distances)``.
    """
    pairs, dist = greedy_match(fit_x.M, fit_y.M)
    ox, oy = reorder_by_match(fit_x.M, fit_y.M, pairs)
    if r_J is not None and r_J > len(pairs):
        raise ValueError("r_J exceeds the number of matched pairs")
    return fit_x.U[ox], fit_y.U[oy], pairs, dist


def joint_jb_values(fit_x: LngcaFit, fit_y: LngcaFit, r_J: int,
                    contrast: ContrastConfig = DEFAULT_CONTRAST) -> np.ndarray:
    """JB values of the first ``r_J`` matched components in both datasets."""
    pairs, _ = greedy_match(fit_x.M, fit_y.M)
    pairs = pairs[:r_J]
    return np.r_[jb(fit_x.S[pairs[:, 0]], contrast), jb(fit_y.S[pairs[:, 1]], contrast)]


def _drift(U) -> float:
    return float(np.linalg.norm(U @ U.T - np.eye(U.shape[0])))


def _assemble(wx, wy, Ux, Uy, r_J: int, rho: float):
    Xw, Lx = _whitened(wx)
    Yw, Ly = _whitened(wy)
    Sx, Sy = Ux @ Xw, Uy @ Yw
    fx = np.where(skewness(Sx) < 0, -1.0, 1.0)
    fy = np.where(skewness(Sy) < 0, -1.0, 1.0)
    Ux, Sx = Ux * fx[:, None], Sx * fx[:, None]
    Uy, Sy = Uy * fy[:, None], Sy * fy[:, None]
    Mx, My = Lx @ Ux.T, Ly @ Uy.T

    D_x = np.linalg.norm(Mx[:, :r_J], axis=0)
    M_J = Mx[:, :r_J] / D_x
    ny = np.linalg.norm(My[:, :r_J], axis=0)
    sign = np.where(np.sum(M_J * My[:, :r_J], axis=0) < 0, -1.0, 1.0)
    D_y = sign * ny
    M_Jy = My[:, :r_J] / D_y
    dist = 2.0 - 2.0 * np.sum(M_J * M_Jy, axis=0) ** 2
    return dict(
        M_J=M_J, M_Jy=M_Jy, D_x=D_x, D_y=D_y,
        S_Jx=Sx[:r_J], S_Jy=Sy[:r_J], M_Ix=Mx[:, r_J:], M_Iy=My[:, r_J:],
        S_Ix=Sx[r_J:], S_Iy=Sy[r_J:], U_x=Ux, U_y=Uy,
        joint_distances=np.clip(dist, 0.0, 2.0),
        condition_x=float(np.linalg.cond(Mx)), condition_y=float(np.linalg.cond(My)),
    )


def fit_sing(wx: WhitenedData, wy: WhitenedData, init_Ux, init_Uy, r_J: int,
             cfg: SingConfig = SingConfig(),
             contrast: ContrastConfig = DEFAULT_CONTRAST,
             callback=None) -> JointFit:
    """Curvilinear search from matched separate fits.

    ``init_Ux``/``init_Uy`` are r x n unmixing matrices whose first ``r_J``
    rows are the matched joint candidates. Iteration stops when the summed
    root-PMSE change of both matrices drops below ``cfg.epsilon``, when the
    step-size search stalls, or after ``cfg.max_iter`` accepted steps.
    ``callback(k, Ux, Uy, f)`` is invoked after every accepted step.
    """
    Ux = np.array(init_Ux, dtype=float)
    Uy = np.array(init_Uy, dtype=float)
    if Ux.shape[1] != wx.n or Uy.shape[1] != wy.n:
        raise ValueError("initial unmixing matrices do not match the data")
    if r_J > min(Ux.shape[0], Uy.shape[0]):
        raise ValueError("r_J exceeds the number of components")
    rho = resolve_rho(cfg, Ux, Uy, wx, wy, r_J, contrast)
    prob = _Problem(wx.Xw, wy.Xw, wx.L_inv, wy.L_inv, r_J, rho, contrast)

    Sx, Sy = Ux @ prob.Xw, Uy @ prob.Yw
    f_cur = _objective_from_scores(Ux, Sx, Uy, Sy, prob)
    trace = [f_cur]
    converged = stalled = False
    k = 0

    def search(cx, cy, Ux, Sx, Uy, Sy, f_old):
        def trial(tau):
            Vx, Tx = (Ux, Sx) if cx is None else cx.at(tau)
            Vy, Ty = (Uy, Sy) if cy is None else cy.at(tau)
            return (Vx, Tx, Vy, Ty), _objective_from_scores(Vx, Tx, Vy, Ty, prob)

        return search_tau(trial, f_old, cfg.tau0, cfg.backtrack, cfg.max_backtracks)

    while k < cfg.max_iter:
        Gx, Gy = _gradients(Ux, Uy, prob)
        if cfg.update == "joint":
            step = search(CayleyCurve(Ux, Gx, prob.Xw), CayleyCurve(Uy, Gy, prob.Yw),
                          Ux, Sx, Uy, Sy, f_cur)
        else:
            step = search(CayleyCurve(Ux, Gx, prob.Xw), None, Ux, Sx, Uy, Sy, f_cur)
            if step is not None:
                _, (Vx, Tx, _, _), f_mid = step
                _, Gy = _gradients(Vx, Uy, prob)
                step2 = search(None, CayleyCurve(Uy, Gy, prob.Yw), Vx, Tx, Uy, Sy, f_mid)
                step = step if step2 is None else step2
        if step is None:
            stalled = True
            break
        _, (Vx, Sx, Vy, Sy), f_new = step
        k += 1
        change = iterate_change(Ux, Vx) + iterate_change(Uy, Vy)
        Ux, Uy, f_cur = Vx, Vy, f_new
        if max(_drift(Ux), _drift(Uy)) > DRIFT_TOL:
            log.warning("re-orthonormalizing after drift at iteration %d", k)
            Ux, Uy = symmetric_orthonormalize(Ux), symmetric_orthonormalize(Uy)
            Sx, Sy = Ux @ prob.Xw, Uy @ prob.Yw
            f_cur = _objective_from_scores(Ux, Sx, Uy, Sy, prob)
        trace.append(f_cur)
        if callback is not None:
            callback(k, Ux, Uy, f_cur)
        if change < cfg.epsilon:
            converged = True
            break
    if not (converged or stalled):
        log.warning("SING reached max_iter=%d without converging", cfg.max_iter)
    parts = _assemble(wx, wy, Ux, Uy, r_J, rho)
    return JointFit(rho=rho, objective_trace=trace, converged=converged,
                    stalled=stalled, n_iter=k, **parts)
