"""Jarque-Bera non-Gaussianity contrast and its gradient."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ContrastConfig:
    alpha: float = 0.8  # weight on squared skewness; 1 - alpha on squared excess kurtosis

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")


DEFAULT_CONTRAST = ContrastConfig()


def _check(s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if s.shape[-1] == 0:
        raise ValueError("empty vector")
    return s


def skewness(s) -> float | np.ndarray:
    """Third raw moment ``mean(s**3)``; rows are treated independently."""
    s = _check(s)
    return np.mean(s * s * s, axis=-1)


def excess_kurtosis(s) -> float | np.ndarray:
    """Fourth raw moment minus 3."""
    s = _check(s)
    s2 = s * s
    return np.mean(s2 * s2, axis=-1) - 3.0


def jb(s, cfg: ContrastConfig = DEFAULT_CONTRAST) -> float | np.ndarray:
    """``alpha * skew^2 + (1 - alpha) * kurt^2``; vectorised over rows of a matrix."""
    s = _check(s)
    p = s.shape[-1]
    s2 = s * s
    g = np.einsum("...j,...j->...", s2, s) / p
    k = np.einsum("...j,...j->...", s2, s2) / p - 3.0
    return cfg.alpha * g**2 + (1.0 - cfg.alpha) * k**2


def jb_rows_and_grad(U: np.ndarray, Z: np.ndarray, cfg: ContrastConfig = DEFAULT_CONTRAST):
    """JB values of the rows of ``U @ Z`` and their gradients with respect to ``U``.

    Gradients use moment means, i.e. they are exact derivatives of :func:`jb`.
    Returns ``(values, grad, kurt)`` where ``grad`` has the shape of ``U``.
    """
    p = Z.shape[1]
    S = U @ Z
    S2 = S * S
    S3 = S2 * S
    g = S3.mean(axis=1)
    k = (S3 * S).mean(axis=1) - 3.0
    values = cfg.alpha * g**2 + (1.0 - cfg.alpha) * k**2
    coef2 = 6.0 * cfg.alpha * g / p
    coef3 = 8.0 * (1.0 - cfg.alpha) * k / p
    grad = (coef2[:, None] * S2 + coef3[:, None] * S3) @ Z.T
    return values, grad, k


def jb_gradient(u, Xw, cfg: ContrastConfig = DEFAULT_CONTRAST, normalization: str = "sum"):
    """Gradient of ``jb(u^T Xw)`` with respect to ``u``.

    ``normalization="sum"`` returns the expression with plain sums over
    features inside the moment-weighted terms,
    ``6 a g sum_j x_j s_j^2 + 8 (1 - a) k sum_j x_j s_j^3``, which is ``p``
    times the exact derivative. ``normalization="mean"`` returns the exact
    derivative.
    """
    X = Xw.Xw if hasattr(Xw, "Xw") else np.asarray(Xw, dtype=float)
    u = np.asarray(u, dtype=float)
    if u.shape != (X.shape[0],):
        raise ValueError(f"u has shape {u.shape}, expected ({X.shape[0]},)")
    if normalization not in ("sum", "mean"):
        raise ValueError("normalization must be 'sum' or 'mean'")
    _, grad, _ = jb_rows_and_grad(u[None, :], X, cfg)
    grad = grad[0]
    return grad * X.shape[1] if normalization == "sum" else grad
