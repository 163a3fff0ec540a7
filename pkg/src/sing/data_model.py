"""Core matrix types shared across the package.

The types are thin, immutable wrappers around dense ``float64`` arrays that
check their defining constraints at construction. Algorithms work on plain
arrays internally and wrap results at module boundaries.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ORTHO_TOL = 1e-8
UNIT_NORM_TOL = 1e-10


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class DataMatrix:
    """Subjects x features matrix for one dataset."""

    values: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.values)
        if arr.ndim != 2:
            raise ValueError(f"expected a 2-d matrix, got shape {arr.shape}")
        if arr.shape[0] < 3 or arr.shape[1] < 1:
            raise ValueError(f"need n >= 3 subjects and p >= 1 features, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("data matrix contains non-finite entries")
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class ComponentMatrix:
    """Rows are component loadings of length p, scaled so that S S^T = p I."""

    values: np.ndarray
    tol: float = ORTHO_TOL

    def __post_init__(self):
        arr = _frozen(np.atleast_2d(self.values))
        r, p = arr.shape
        gram = arr @ arr.T / p
        err = np.max(np.abs(gram - np.eye(r))) if r else 0.0
        if err > self.tol:
            raise ValueError(f"rows violate S S^T = p I (max deviation {err:.3g})")
        object.__setattr__(self, "values", arr)

    @property
    def r(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class MixingMatrix:
    """n x r matrix of subject scores (one column per component)."""

    values: np.ndarray
    unit_norm: bool = False

    def __post_init__(self):
        arr = _frozen(self.values)
        if arr.ndim != 2:
            raise ValueError("mixing matrix must be 2-d")
        if arr.shape[1] and np.linalg.matrix_rank(arr) < arr.shape[1]:
            raise ValueError("mixing matrix is not of full column rank")
        if self.unit_norm:
            norms = np.linalg.norm(arr, axis=0)
            if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
                raise ValueError("columns are flagged unit-norm but are not")
        object.__setattr__(self, "values", arr)


@dataclass(frozen=True)
class UnmixingMatrix:
    """r x n matrix with orthonormal rows."""

    values: np.ndarray
    tol: float = ORTHO_TOL

    def __post_init__(self):
        arr = _frozen(np.atleast_2d(self.values))
        err = np.max(np.abs(arr @ arr.T - np.eye(arr.shape[0])))
        if err > self.tol:
            raise ValueError(f"rows are not orthonormal (max deviation {err:.3g})")
        object.__setattr__(self, "values", arr)


@dataclass(frozen=True)
class SignedPermutation:
    """Row ``i`` of the result is ``signs[i] * rows[permutation[i]]``."""

    permutation: np.ndarray
    signs: np.ndarray = field(default=None)

    def __post_init__(self):
        perm = np.asarray(self.permutation, dtype=int)
        signs = np.ones(len(perm)) if self.signs is None else np.asarray(self.signs, dtype=float)
        if sorted(perm.tolist()) != list(range(len(perm))):
            raise ValueError("permutation is not a bijection on 0..r-1")
        if signs.shape != perm.shape or not np.all(np.isin(signs, (-1.0, 1.0))):
            raise ValueError("signs must be a +-1 vector matching the permutation")
        perm.flags.writeable = False
        signs.flags.writeable = False
        object.__setattr__(self, "permutation", perm)
        object.__setattr__(self, "signs", signs)

    @classmethod
    def identity(cls, r: int) -> "SignedPermutation":
        return cls(np.arange(r), np.ones(r))

    def __len__(self):
        return len(self.permutation)

    def inverse(self) -> "SignedPermutation":
        inv = np.empty_like(self.permutation)
        inv[self.permutation] = np.arange(len(self.permutation))
        return SignedPermutation(inv, self.signs[inv])

    def as_matrix(self) -> np.ndarray:
        r = len(self)
        P = np.zeros((r, r))
        P[np.arange(r), self.permutation] = self.signs
        return P


def apply_signed_permutation(S, P: SignedPermutation):
    """Reorder and sign-flip the rows of ``S``.

    Accepts a :class:`ComponentMatrix` (returns one) or a plain array.
    """
    values = S.values if isinstance(S, ComponentMatrix) else np.asarray(S, dtype=float)
    if values.shape[0] != len(P):
        raise ValueError(f"permutation of size {len(P)} does not match {values.shape[0]} rows")
    out = values[P.permutation] * P.signs[:, None]
    if isinstance(S, ComponentMatrix):
        return ComponentMatrix(out, tol=S.tol)
    return out
