"""Separate-dataset linear non-Gaussian component analysis.

Each restart runs a symmetric fixed-point iteration on the whitened data:
every row of the unmixing matrix takes an approximate Newton step for the JB
contrast and the whole matrix is then re-orthonormalized with
``U <- (U U^T)^{-1/2} U``. A step that lowers the summed contrast is replaced
by a backtracking Riemannian gradient step, so the objective never decreases.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .contrast import DEFAULT_CONTRAST, ContrastConfig, jb, jb_rows_and_grad, skewness
from .metrics import iterate_change
from .preprocess import WhitenedData

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MultiStartConfig:
    n_restarts: int = 20
    seed: int = 0
    seeds: tuple | None = None  # explicit per-restart seeds; overrides seed/n_restarts
    max_iter: int = 500
    tol: float = 1e-6
    obj_tol: float = 1e-6  # relative objective gain that also counts as converged

    def __post_init__(self):
        if self.seeds is None and self.n_restarts < 1:
            raise ValueError("n_restarts must be >= 1")
        if self.seeds is not None and len(self.seeds) < 1:
            raise ValueError("seed list is empty")

    def restart_seeds(self) -> list:
        if self.seeds is not None:
            return list(self.seeds)
        ss = np.random.SeedSequence(self.seed)
        return [int(c.generate_state(1)[0]) for c in ss.spawn(self.n_restarts)]


@dataclass
class LngcaFit:
    U: np.ndarray  # r x n, orthonormal rows
    M: np.ndarray  # n x r subject scores, L_inv @ U.T
    S: np.ndarray  # r x p components, U @ Xw
    jb_values: np.ndarray
    objective: float
    restarts_used: int
    best_seed: int
    converged: bool = True
    n_iter: int = 0
    all_objectives: list = field(default_factory=list)

    @property
    def r(self) -> int:
        return self.S.shape[0]


def symmetric_orthonormalize(U: np.ndarray) -> np.ndarray:
    """``(U U^T)^{-1/2} U`` computed through the thin SVD."""
    A, _, Bt = np.linalg.svd(U, full_matrices=False)
    return A @ Bt


def _random_start(r: int, q: int, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return symmetric_orthonormalize(rng.standard_normal((r, q)))


def _fixed_point(Z, U, contrast, max_iter, tol, obj_tol=0.0):
    """Maximise the summed JB of ``U @ Z`` over row-orthonormal ``U`` (q-dim coords)."""
    vals, grad, kurt = jb_rows_and_grad(U, Z, contrast)
    obj = vals.sum()
    shift = 24.0 * (1.0 - contrast.alpha)
    converged = False
    t_last = 0.5
    it = 0
    for it in range(1, max_iter + 1):
        cand = symmetric_orthonormalize(grad - (shift * kurt)[:, None] * U)
        c_vals, c_grad, c_kurt = jb_rows_and_grad(cand, Z, contrast)
        if c_vals.sum() < obj:
            cand = None
            tangent = grad - 0.5 * (grad @ U.T + U @ grad.T) @ U
            norm = np.linalg.norm(tangent)
            t = min(2.0 * t_last, 0.5)
            while norm > 0 and t > 1e-10:
                trial = symmetric_orthonormalize(U + (t / norm) * tangent)
                t_vals, t_grad, t_kurt = jb_rows_and_grad(trial, Z, contrast)
                if t_vals.sum() > obj:
                    cand, c_vals, c_grad, c_kurt = trial, t_vals, t_grad, t_kurt
                    t_last = t
                    break
                t *= 0.5
            if cand is None:
                converged = True
                break
        change = iterate_change(U, cand)
        gain = (c_vals.sum() - obj) / max(abs(obj), 1e-300)
        U, vals, grad, kurt = cand, c_vals, c_grad, c_kurt
        obj = vals.sum()
        if change < tol or gain < obj_tol:
            converged = True
            break
    return U, obj, converged, it


def _assemble(wd: WhitenedData, U_red: np.ndarray, contrast: ContrastConfig):
    Z = wd.reduced
    S = U_red @ Z
    values = jb(S, contrast)
    order = np.argsort(-values, kind="stable")
    U_red, S, values = U_red[order], S[order], values[order]
    flip = np.where(skewness(S) < 0, -1.0, 1.0)
    U_red, S = U_red * flip[:, None], S * flip[:, None]
    U = U_red @ wd.basis.T
    M = wd.L_inv @ U.T
    return U, M, S, values


def fit_lngca_restarts(
    wd: WhitenedData,
    r: int,
    cfg: MultiStartConfig = MultiStartConfig(),
    contrast: ContrastConfig = DEFAULT_CONTRAST,
) -> list[LngcaFit]:
    """Run every restart and return one fit per seed, in seed order."""
    q = wd.retained_rank
    if not 1 <= r <= q:
        raise ValueError(f"r={r} must lie in [1, retained rank {q}]")
    Z = wd.reduced
    fits = []
    for seed in cfg.restart_seeds():
        U0 = _random_start(r, q, seed)
        U_red, obj, converged, n_iter = _fixed_point(
            Z, U0, contrast, cfg.max_iter, cfg.tol, cfg.obj_tol
        )
        U, M, S, values = _assemble(wd, U_red, contrast)
        fits.append(
            LngcaFit(U, M, S, values, float(values.sum()), 1, seed, converged, n_iter)
        )
    return fits


def best_of(fits: list[LngcaFit]) -> tuple[int, LngcaFit]:
    """Argmax objective; ties go to the earliest restart."""
    objectives = [f.objective for f in fits]
    idx = int(np.argmax(objectives))
    best = fits[idx]
    best.restarts_used = len(fits)
    best.all_objectives = objectives
    return idx, best


def fit_lngca(
    wd: WhitenedData,
    r: int,
    cfg: MultiStartConfig = MultiStartConfig(),
    contrast: ContrastConfig = DEFAULT_CONTRAST,
) -> LngcaFit:
    """Estimate ``r`` non-Gaussian components, keeping the best of several restarts.

    Rows of ``S`` are sorted by decreasing JB and sign-flipped to have
    non-negative skewness.
    """
    _, best = best_of(fit_lngca_restarts(wd, r, cfg, contrast))
    if not best.converged:
        log.warning("LNGCA did not converge in %d iterations", cfg.max_iter)
    return best


def fit_saturated(
    wd: WhitenedData,
    cfg: MultiStartConfig = MultiStartConfig(),
    contrast: ContrastConfig = DEFAULT_CONTRAST,
) -> LngcaFit:
    """LNGCA with as many components as the retained rank of the data."""
    return fit_lngca(wd, wd.retained_rank, cfg, contrast)


def _abs_corr(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    A = A - A.mean(axis=1, keepdims=True)
    B = B - B.mean(axis=1, keepdims=True)
    A = A / np.linalg.norm(A, axis=1, keepdims=True)
    B = B / np.linalg.norm(B, axis=1, keepdims=True)
    return np.abs(A @ B.T)


def reliability_filter(
    fits: list[LngcaFit],
    argmax_index: int,
    corr_threshold: float = 0.95,
    frac_threshold: float = 0.75,
) -> np.ndarray:
    """Components of the argmax fit that reappear across initializations.

    A component is kept when, in at least ``frac_threshold`` of the other
    fits, some component has absolute correlation above ``corr_threshold``
    with it.
    """
    if len(fits) < 2:
        raise ValueError("need at least two fits")
    for t in (corr_threshold, frac_threshold):
        if not 0 < t <= 1:
            raise ValueError("thresholds must lie in (0, 1]")
    ref = fits[argmax_index].S
    hits = np.zeros(ref.shape[0])
    others = [f for i, f in enumerate(fits) if i != argmax_index]
    for f in others:
        if f.S.shape[1] != ref.shape[1]:
            raise ValueError("fits disagree on the number of features")
        hits += _abs_corr(ref, f.S).max(axis=1) > corr_threshold
    return np.flatnonzero(hits / len(others) >= frac_threshold)


def ica_rotation(
    Z: np.ndarray,
    cfg: MultiStartConfig = MultiStartConfig(),
    contrast: ContrastConfig = DEFAULT_CONTRAST,
) -> tuple[np.ndarray, float]:
    """Orthogonal ``W`` (k x k) maximizing the summed JB of ``W @ Z``.

    ``Z`` must already be white (``Z Z^T / p = I``). Used by the PCA-based
    comparison methods; returns ``(W, objective)`` for the best restart.
    """
    Z = np.asarray(Z, dtype=float)
    k = Z.shape[0]
    best_W, best_obj = None, -np.inf
    for seed in cfg.restart_seeds():
        W, obj, _, _ = _fixed_point(Z, _random_start(k, k, seed), contrast,
                                    cfg.max_iter, cfg.tol, cfg.obj_tol)
        if obj > best_obj:
            best_W, best_obj = W, obj
    return best_W, float(best_obj)
