"""Chordal distance, greedy score matching and the joint-rank permutation test."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class MatchResult:
    pairs: np.ndarray  # (k, 2) array of (x column, y column), ascending distance
    distances: np.ndarray
    p_values: np.ndarray
    r_J: int
    T: int
    alpha: float
    null_min: np.ndarray  # psi_min for every permutation
    non_monotone: bool = False  # a non-significant pair precedes the last significant one

    @property
    def permutation(self) -> np.ndarray:
        """Column order of ``My`` aligned with the ordered columns of ``Mx``."""
        return self.pairs[:, 1]


def chordal_distance(x, y) -> float:
    """Squared chordal distance ``||xx'/|x|^2 - yy'/|y|^2||_F^2 = 2 - 2 cos^2``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    nx, ny = x @ x, y @ y
    if nx == 0 or ny == 0:
        raise ValueError("chordal distance is undefined for a zero vector")
    d = 2.0 - 2.0 * (x @ y) ** 2 / (nx * ny)
    return float(min(max(d, 0.0), 2.0))


def chordal_matrix(A, B) -> np.ndarray:
    """Chordal distances between every column of ``A`` and every column of ``B``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    na = np.linalg.norm(A, axis=0)
    nb = np.linalg.norm(B, axis=0)
    if np.any(na == 0) or np.any(nb == 0):
        raise ValueError("zero column")
    cos = (A / na).T @ (B / nb)
    return np.clip(2.0 - 2.0 * cos**2, 0.0, 2.0)


def greedy_match(Mx, My):
    """Pair columns of ``Mx`` and ``My`` by repeatedly taking the closest pair.

    Returns ``(pairs, distances)``: ``pairs[k] = (i, j)`` is the k-th match and
    ``distances`` is non-decreasing. Ties are broken by the smallest
    ``(i, j)``.
    """
    Mx = np.asarray(Mx, dtype=float)
    My = np.asarray(My, dtype=float)
    if Mx.ndim != 2 or My.ndim != 2 or Mx.shape[1] == 0 or My.shape[1] == 0:
        raise ValueError("both mixing matrices need at least one column")
    if Mx.shape[0] != My.shape[0]:
        raise ValueError("mixing matrices have different numbers of subjects")
    D = chordal_matrix(Mx, My)
    k = min(D.shape)
    pairs = np.empty((k, 2), dtype=int)
    dist = np.empty(k)
    live = D.copy()
    for step in range(k):
        flat = int(np.argmin(live))  # row-major argmin gives the smallest (i, j) on ties
        i, j = divmod(flat, live.shape[1])
        pairs[step] = (i, j)
        dist[step] = D[i, j]
        live[i, :] = np.inf
        live[:, j] = np.inf
    return pairs, dist


def reorder_by_match(Mx, My, pairs):
    """Column orders putting matched pairs first, then the leftover columns."""
    rx, ry = Mx.shape[1], My.shape[1]
    ox = list(pairs[:, 0]) + [i for i in range(rx) if i not in set(pairs[:, 0])]
    oy = list(pairs[:, 1]) + [j for j in range(ry) if j not in set(pairs[:, 1])]
    return np.array(ox), np.array(oy)


def permutation_null(Mx, My, T: int, seed) -> np.ndarray:
    """``psi_min`` for ``T`` random row permutations of ``My``."""
    Mx = np.asarray(Mx, dtype=float)
    My = np.asarray(My, dtype=float)
    Ax = Mx / np.linalg.norm(Mx, axis=0)
    Ay = My / np.linalg.norm(My, axis=0)
    rng = np.random.default_rng(seed)
    n = Mx.shape[0]
    out = np.empty(T)
    for t in range(T):
        perm = rng.permutation(n)
        cos = Ax.T @ Ay[perm]
        out[t] = 2.0 - 2.0 * np.max(cos**2)
    return np.clip(out, 0.0, 2.0)


def joint_rank_test(Mx, My, T: int = 200, alpha: float = 0.01, seed=0) -> MatchResult:
    """Greedy-match the score columns and test each pair against permuted minima.

    The p-value of the r-th pair is the fraction of permutations whose minimum
    distance over all column pairs is smaller than the pair's distance. The
    joint rank is the largest index whose p-value is below ``alpha``.
    """
    if T < 50:
        raise ValueError("use at least 50 permutations")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    Mx = np.asarray(Mx, dtype=float)
    My = np.asarray(My, dtype=float)
    for M in (Mx, My):
        if np.any(np.ptp(M, axis=0) == 0):
            raise ValueError("constant score column")
    pairs, dist = greedy_match(Mx, My)
    null = permutation_null(Mx, My, T, seed)
    p_values = (dist[:, None] > null[None, :]).mean(axis=1)
    significant = np.flatnonzero(p_values < alpha)
    r_J = int(significant[-1] + 1) if significant.size else 0
    non_monotone = bool(significant.size and significant.size != r_J)
    return MatchResult(pairs, dist, p_values, r_J, T, alpha, null, non_monotone)
