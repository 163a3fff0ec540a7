"""Permutation-invariant error metrics and variance decomposition."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import linear_sum_assignment

from .data_model import SignedPermutation

EXHAUSTIVE_MAX_R = 8


@dataclass(frozen=True)
class VarianceDecomposition:
    r2_joint: float
    r2_individual: float
    r2_noise: float
    snr: float

    @property
    def r2_signal(self) -> float:
        return self.r2_joint + self.r2_individual


def _unit_rms_rows(A) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    rms = np.sqrt(np.mean(A * A, axis=1, keepdims=True))
    if np.any(rms == 0):
        raise ValueError("cannot rescale an all-zero row")
    return A / rms


@lru_cache(maxsize=None)
def _all_perms(r: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(r))), dtype=np.intp).reshape(-1, r)


def _pair_costs(S: np.ndarray, S_hat: np.ndarray):
    # Optimal sign per pair is sign(<a, b>), leaving ||a||^2 + ||b||^2 - 2|<a, b>|.
    inner = S @ S_hat.T
    sq = np.sum(S * S, axis=1)[:, None] + np.sum(S_hat * S_hat, axis=1)[None, :]
    return sq - 2.0 * np.abs(inner), inner


def match_for_pmse(S, S_hat) -> SignedPermutation:
    """Signed permutation ``P`` minimising ``||S - P S_hat||_F`` on unit-RMS rows.

    Exhaustive over permutations for ``r <= 8``; Hungarian assignment beyond.
    """
    S, S_hat = _unit_rms_rows(S), _unit_rms_rows(S_hat)
    if S.shape != S_hat.shape:
        raise ValueError(f"shape mismatch {S.shape} vs {S_hat.shape}")
    r = S.shape[0]
    cost, inner = _pair_costs(S, S_hat)
    if r <= EXHAUSTIVE_MAX_R:
        perms = _all_perms(r)
        totals = cost[np.arange(r), perms].sum(axis=1)
        perm = perms[int(np.argmin(totals))]
    else:
        rows, cols = linear_sum_assignment(cost)
        perm = cols[np.argsort(rows)]
    signs = np.where(inner[np.arange(r), perm] < 0, -1.0, 1.0)
    return SignedPermutation(perm, signs)


def greedy_match_rows(S, S_hat) -> SignedPermutation:
    """Greedy absolute-correlation matching; a cheap cross-check for :func:`match_for_pmse`."""
    S, S_hat = _unit_rms_rows(S), _unit_rms_rows(S_hat)
    cost, inner = _pair_costs(S, S_hat)
    r = S.shape[0]
    perm = np.full(r, -1)
    cost = cost.copy()
    for _ in range(r):
        i, j = np.unravel_index(np.argmin(cost), cost.shape)
        perm[i] = j
        cost[i, :] = np.inf
        cost[:, j] = np.inf
    signs = np.where(inner[np.arange(r), perm] < 0, -1.0, 1.0)
    return SignedPermutation(perm, signs)


def pmse(S, S_hat, squared: bool = False) -> float:
    """Permutation- and sign-invariant error between two r x p matrices.

    Rows are rescaled to unit root-mean-square (variance one for mean-zero
    rows) before matching. Returns ``sqrt(PMSE)`` unless ``squared``.
    """
    A, B = _unit_rms_rows(S), _unit_rms_rows(S_hat)
    P = match_for_pmse(A, B)
    r, p = A.shape
    diff = A - B[P.permutation] * P.signs[:, None]
    value = float(np.sum(diff * diff) / (r * p))
    return value if squared else float(np.sqrt(value))


def iterate_change(U, V) -> float:
    """:func:`pmse` between successive iterates, with a shortcut for the usual case.

    When every diagonal pair cost is the minimum of its row the identity
    pairing is optimal (any other assignment can only add cost), so the
    matching search is skipped. The result always equals ``pmse(U, V)``.
    """
    A, B = _unit_rms_rows(U), _unit_rms_rows(V)
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch {A.shape} vs {B.shape}")
    cost, inner = _pair_costs(A, B)
    if np.all(np.diag(cost) <= cost.min(axis=1)):
        signs = np.where(np.diag(inner) < 0, -1.0, 1.0)
        diff = A - B * signs[:, None]
        return float(np.sqrt(np.sum(diff * diff) / A.size))
    return pmse(A, B)


def pmse_mixing(M, M_hat, squared: bool = False) -> float:
    """:func:`pmse` on the columns of two n x r mixing matrices."""
    return pmse(np.asarray(M).T, np.asarray(M_hat).T, squared=squared)


def mse_joint(J, J_hat, squared: bool = False) -> float:
    """Relative reconstruction error ``||J - J_hat||_F^2 / ||J||_F^2`` (root by default)."""
    J = np.asarray(J, dtype=float)
    J_hat = np.asarray(J_hat, dtype=float)
    if J.shape != J_hat.shape:
        raise ValueError(f"shape mismatch {J.shape} vs {J_hat.shape}")
    denom = np.sum(J * J)
    if denom == 0:
        raise ValueError("reference signal J is zero")
    value = float(np.sum((J - J_hat) ** 2) / denom)
    return value if squared else float(np.sqrt(value))


def variance_decomposition(X, S_J, S_I) -> VarianceDecomposition:
    """Joint / individual / noise variance fractions of ``X``.

    Signal fractions are the energies of the projections of ``X`` onto the
    row spaces of ``S_J`` and ``S_I`` (both scaled to ``S S^T = p I``); the noise
    fraction is the remainder.
    """
    X = np.asarray(X, dtype=float)
    S_J = np.atleast_2d(np.asarray(S_J, dtype=float))
    S_I = np.asarray(S_I, dtype=float).reshape(-1, X.shape[1])
    if S_J.shape[1] != X.shape[1]:
        raise ValueError("component length does not match the number of features")
    p = X.shape[1]
    total = np.sum(X * X)

    def frac(S):
        if S.shape[0] == 0:
            return 0.0
        proj = (X @ S.T) @ S / p
        return float(np.sum(proj * proj) / total)

    r2_j, r2_i = frac(S_J), frac(S_I)
    r2_n = max(1.0 - r2_j - r2_i, 0.0)
    snr = (r2_j + r2_i) / r2_n if r2_n > 0 else np.inf
    return VarianceDecomposition(r2_j, r2_i, r2_n, snr)
