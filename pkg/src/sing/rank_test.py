"""Sequential permutation test for the number of non-Gaussian components.

To test whether the r-th component is non-Gaussian, ``r`` components are
estimated and the JB value of the r-th (in decreasing order) is compared to
a null distribution. Each null draw removes the first ``r - 1`` components,
keeps ``n - r + 1`` random subjects, permutes the features of every retained
subject independently (destroying structure shared across subjects), and
records the JB value of a single component fitted to the result.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .contrast import DEFAULT_CONTRAST, ContrastConfig
from .lngca import MultiStartConfig, fit_lngca
from .preprocess import CenteredData, prepare, whiten

log = logging.getLogger(__name__)

FIT_CFG = MultiStartConfig(n_restarts=10)
NULL_CFG = MultiStartConfig(n_restarts=2, tol=1e-4, obj_tol=1e-4)


@dataclass
class RankTestResult:
    tested_ranks: list = field(default_factory=list)
    p_values: list = field(default_factory=list)
    selected_rank: int = 0
    T: int = 200
    alpha: float = 0.05


def _values(Xc) -> np.ndarray:
    arr = Xc.values if isinstance(Xc, CenteredData) else np.asarray(Xc, dtype=float)
    if arr.ndim != 2:
        raise ValueError("expected a 2-d matrix")
    return arr


def residual_after(Xc: np.ndarray, S: np.ndarray) -> np.ndarray:
    """``Xc - Xc S^T S / p`` for components with ``S S^T = p I``."""
    if S.shape[0] == 0:
        return Xc.copy()
    p = Xc.shape[1]
    return Xc - (Xc @ S.T) @ S / p


def permute_within_rows(A: np.ndarray, rng) -> np.ndarray:
    """Independently permute the entries of every row."""
    return rng.permuted(A, axis=1)


def _null_statistic(resid, k, seed, cfg, contrast):
    rng = np.random.default_rng(seed)
    rows = rng.choice(resid.shape[0], size=k, replace=False)
    sub = permute_within_rows(resid[rows], rng)
    fit = fit_lngca(prepare(sub), 1, MultiStartConfig(
        n_restarts=cfg.n_restarts, seed=int(rng.integers(2**31)), max_iter=cfg.max_iter,
        tol=cfg.tol, obj_tol=cfg.obj_tol), contrast)
    return float(fit.jb_values[0])


def _null_batch(args):
    resid, k, seeds, cfg, contrast = args
    return [_null_statistic(resid, k, s, cfg, contrast) for s in seeds]


def null_statistics(resid, k, T, seed, cfg=NULL_CFG, contrast=DEFAULT_CONTRAST, jobs: int = 1):
    """JB values of one-component fits to ``T`` permuted row subsets of ``resid``."""
    seeds = [int(c.generate_state(1)[0]) for c in np.random.SeedSequence(seed).spawn(T)]
    if jobs <= 1:
        return np.array(_null_batch((resid, k, seeds, cfg, contrast)))
    chunks = [seeds[i::jobs] for i in range(jobs)]
    with ProcessPoolExecutor(jobs) as ex:
        parts = list(ex.map(_null_batch, [(resid, k, c, cfg, contrast) for c in chunks]))
    out = np.empty(T)
    for i, part in enumerate(parts):
        out[i::jobs] = part
    return out


def test_rank_r(Xc, r: int, T: int = 200, seed=0, contrast: ContrastConfig = DEFAULT_CONTRAST,
                fit_cfg: MultiStartConfig = FIT_CFG, null_cfg: MultiStartConfig = NULL_CFG,
                jobs: int = 1) -> float:
    """p-value for the hypothesis that the r-th component is Gaussian.

    ``p_r`` is the fraction of null draws whose JB value exceeds that of the
    r-th estimated component.
    """
    arr = _values(Xc)
    n = arr.shape[0]
    if not 1 <= r <= n - 1:
        raise ValueError(f"r={r} must lie in [1, n - 1 = {n - 1}]")
    if T < 50:
        raise ValueError("use at least 50 permutations")
    fit = fit_lngca(whiten(arr), r, fit_cfg, contrast)
    stat = fit.jb_values[r - 1]
    resid = residual_after(arr, fit.S[: r - 1])
    null = null_statistics(resid, n - r + 1, T, seed, null_cfg, contrast, jobs)
    return float(np.mean(stat < null))


def binary_search_rank(Xc, T: int = 200, alpha: float = 0.05, seed=0,
                       contrast: ContrastConfig = DEFAULT_CONTRAST,
                       fit_cfg: MultiStartConfig = FIT_CFG,
                       null_cfg: MultiStartConfig = NULL_CFG,
                       jobs: int = 1, test=None) -> RankTestResult:
    """Bisection over ``r`` in ``[0, n - 1]`` starting at ``ceil(n / 2)``.

    A p-value below ``alpha`` means the tested component is non-Gaussian,
    so the rank is at least ``r``; otherwise it is below ``r``. ``test`` can
    replace :func:`test_rank_r` (signature ``test(r) -> p``), which is how
    the search is checked against an exhaustive sweep.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    arr = _values(Xc)
    n = arr.shape[0]
    if test is None:
        def test(r):
            child = int(np.random.SeedSequence([int(seed), r]).generate_state(1)[0])
            return test_rank_r(arr, r, T, child, contrast, fit_cfg, null_cfg, jobs)

    lo, hi = 0, n - 1
    result = RankTestResult(T=T, alpha=alpha)
    while lo < hi:
        r = min(math.ceil(n / 2), hi) if not result.tested_ranks else (lo + hi + 1) // 2
        p = test(r)
        result.tested_ranks.append(r)
        result.p_values.append(p)
        log.info("rank %d: p = %.3f", r, p)
        if p < alpha:
            lo = r
        else:
            hi = r - 1
    result.selected_rank = lo
    return result
