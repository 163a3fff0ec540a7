"""Ground-truth generators for the two-dataset simulation settings.

Setting 1 uses n = 48 subjects, three components for X (one individual, two
joint) on 33 x 33 images and four components for Y (two joint, two
individual) on the 4950 lower-triangular edges of a 100-node network. The
component shapes are fixed rectangles (X) and node blocks (Y) on a faint
Gaussian background; the coordinates are listed in ``X_PATCHES`` and
``Y_BLOCKS``.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .metrics import VarianceDecomposition, variance_decomposition

IMAGE_SIDE = 33
N_NODES = 100
BACKGROUND_VAR = 0.005
COMPONENT_SEED = 20240101
SPARSE_ZERO_FRACTION = 0.99

# (row slice, col slice) on the 33 x 33 grid; first entry is the individual component.
X_PATCHES = (
    ((2, 9), (2, 10)),
    ((12, 18), (18, 27)),
    ((22, 31), (6, 12)),
)
# Node ranges [start, stop) whose within-block edges are 1; first two are joint.
Y_BLOCKS = ((0, 20), (25, 45), (50, 70), (75, 95))

SNR_LEVELS = {"low": 0.2, "high": 5.0}


@dataclass
class SimulationTruth:
    X: np.ndarray
    Y: np.ndarray
    M_J: np.ndarray
    M_Ix: np.ndarray
    M_Iy: np.ndarray
    M_Nx: np.ndarray
    M_Ny: np.ndarray
    D_x: np.ndarray
    D_y: np.ndarray
    S_Jx: np.ndarray
    S_Ix: np.ndarray
    S_Jy: np.ndarray
    S_Iy: np.ndarray
    N_x: np.ndarray
    N_y: np.ndarray
    snr_x: float
    snr_y: float
    r2_x: VarianceDecomposition
    r2_y: VarianceDecomposition
    seed: int
    setting: str = "1"
    sparsity: dict = field(default_factory=dict)

    @property
    def r_J(self) -> int:
        return self.M_J.shape[1]

    @property
    def r_x(self) -> int:
        return self.r_J + self.S_Ix.shape[0]

    @property
    def r_y(self) -> int:
        return self.r_J + self.S_Iy.shape[0]

    @property
    def J_x(self) -> np.ndarray:
        return self.M_J @ np.diag(self.D_x) @ self.S_Jx

    @property
    def J_y(self) -> np.ndarray:
        return self.M_J @ np.diag(self.D_y) @ self.S_Jy

    def manifest(self) -> dict:
        return {
            "setting": self.setting,
            "seed": self.seed,
            "snr_x": self.snr_x,
            "snr_y": self.snr_y,
            "n": int(self.X.shape[0]),
            "p_x": int(self.X.shape[1]),
            "p_y": int(self.Y.shape[1]),
            "r_J": self.r_J,
            "r_x": self.r_x,
            "r_y": self.r_y,
            "r2_x": asdict(self.r2_x),
            "r2_y": asdict(self.r2_y),
            "sparsity": self.sparsity,
        }

    _MATRICES = (
        "X", "Y", "M_J", "M_Ix", "M_Iy", "M_Nx", "M_Ny",
        "S_Jx", "S_Ix", "S_Jy", "S_Iy", "N_x", "N_y",
    )

    def save(self, out_dir) -> dict:
        """Write every matrix as CSV plus ``manifest.json``; returns the manifest."""
        from .io import write_matrix

        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        files = {}
        for name in self._MATRICES:
            path = out / f"{name}.csv"
            write_matrix(path, getattr(self, name))
            files[name] = path.name
        for name in ("D_x", "D_y"):
            path = out / f"{name}.csv"
            write_matrix(path, getattr(self, name)[None, :])
            files[name] = path.name
        manifest = self.manifest()
        manifest["files"] = files
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
        return manifest


def _orthonormal_rows(A: np.ndarray) -> np.ndarray:
    U, _, Vt = np.linalg.svd(A, full_matrices=False)
    return U @ Vt


def _project_out(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Remove from the rows of A their projection on the row space of B."""
    if B.shape[0] == 0:
        return A
    Q = np.linalg.qr(B.T)[0]
    return A - (A @ Q) @ Q.T


def standardize_components(joint: np.ndarray, individual: np.ndarray, center: bool = True):
    """Center (optionally) and orthogonalize rows, joint block first; scale to S S^T = p I."""
    p = joint.shape[1]
    if center:
        joint = joint - joint.mean(axis=1, keepdims=True)
        individual = individual - individual.mean(axis=1, keepdims=True)
    joint = _orthonormal_rows(joint)
    if individual.shape[0]:
        individual = _orthonormal_rows(_project_out(individual, joint))
    return joint * np.sqrt(p), individual * np.sqrt(p)


def setting1_components():
    """Fixed true components: ``(S_x, S_y)`` with shapes 3 x 1089 and 4 x 4950.

    Row order follows the layout of the setting: for X the individual
    component comes first, for Y the two joint components come first.
    """
    rng = np.random.default_rng(COMPONENT_SEED)
    sd = np.sqrt(BACKGROUND_VAR)

    raw_x = rng.normal(0.0, sd, size=(len(X_PATCHES), IMAGE_SIDE, IMAGE_SIDE))
    for k, ((r0, r1), (c0, c1)) in enumerate(X_PATCHES):
        raw_x[k, r0:r1, c0:c1] = 1.0
    raw_x = raw_x.reshape(len(X_PATCHES), -1)

    rows, cols = np.tril_indices(N_NODES, -1)
    raw_y = rng.normal(0.0, sd, size=(len(Y_BLOCKS), rows.size))
    for k, (a, b) in enumerate(Y_BLOCKS):
        inside = (rows >= a) & (rows < b) & (cols >= a) & (cols < b)
        raw_y[k, inside] = 1.0

    S_Jx, S_Ix = standardize_components(raw_x[1:], raw_x[:1])
    S_Jy, S_Iy = standardize_components(raw_y[:2], raw_y[2:])
    return np.vstack([S_Ix, S_Jx]), np.vstack([S_Jy, S_Iy])


def sparsify_components(S: np.ndarray, threshold: float | None = None,
                        zero_fraction: float | None = SPARSE_ZERO_FRACTION):
    """Zero small entries of each row and re-normalize.

    With ``threshold`` every entry below it in absolute value is zeroed.
    Otherwise each row keeps only its ``floor((1 - zero_fraction) p)``
    largest entries in absolute value (at least one), so at least
    ``zero_fraction`` of every row is zero. Rows with overlapping supports
    are re-orthogonalized by changing each row only on its own support, and
    all rows are rescaled to ``S S^T = p I``. They are not re-centered
    because centering would fill in the zeros. Returns
    ``(S_sparse, zero_fraction_per_row)``.
    """
    S = np.atleast_2d(np.asarray(S, dtype=float))
    p = S.shape[1]
    if threshold is not None:
        if threshold < 0:
            raise ValueError("threshold must be non-negative")
        small = np.abs(S) < threshold
    elif zero_fraction is None or not 0 <= zero_fraction < 1:
        raise ValueError("zero_fraction must lie in [0, 1)")
    else:
        keep = max(1, int(np.floor((1.0 - zero_fraction) * p + 1e-9)))
        order = np.argsort(-np.abs(S), axis=1, kind="stable")
        small = np.ones(S.shape, dtype=bool)
        np.put_along_axis(small, order[:, :keep], False, axis=1)
    T = np.where(small, 0.0, S)
    if np.any(~T.any(axis=1)):
        raise ValueError("thresholding left an all-zero row")
    supports = T != 0
    for k in range(1, T.shape[0]):
        # Smallest change on row k's own support that makes it orthogonal to earlier rows.
        A = T[:k][:, supports[k]]
        if np.any(A):
            T[k, supports[k]] -= np.linalg.lstsq(A, A @ T[k, supports[k]], rcond=None)[0]
    T = T / np.sqrt(np.mean(T * T, axis=1, keepdims=True))
    return T, 1.0 - supports.mean(axis=1)


def _means(n: int):
    h, q = n // 2, n // 4
    mu1 = np.r_[np.ones(h), -np.ones(n - h)]
    mu3x = np.r_[-np.ones(q), np.ones(q), -np.ones(q), np.ones(n - 3 * q)]
    e = n // 8
    mu3y = np.tile(np.r_[-np.ones(e), np.ones(e)], 4)
    mu3y = np.r_[mu3y, np.ones(n - mu3y.size)]
    return mu1, -mu1, mu3x, mu3y, mu1.copy()


def _centered_cols(A: np.ndarray) -> np.ndarray:
    return A - A.mean(axis=0, keepdims=True)


def _noise(rng, n, r, S, signal, snr):
    p = S.shape[1]
    k = n - r - 1
    M_N = _centered_cols(rng.standard_normal((n, k)))
    N = rng.standard_normal((k, p))
    N = _project_out(N, np.vstack([S, np.ones((1, p))]))
    scale = np.sqrt(np.sum(signal**2) / (snr * np.sum((M_N @ N) ** 2)))
    return M_N * scale, N


def setting1_generate(
    snr_x: float,
    snr_y: float,
    seed: int,
    n: int = 48,
    sparse: bool = False,
    zero_fraction: float = SPARSE_ZERO_FRACTION,
) -> SimulationTruth:
    """Draw one replicate of Setting 1 (or its sparse analogue).

    With ``sparse=True`` every true component keeps only its largest
    ``1 - zero_fraction`` share of entries in absolute value (see
    :func:`sparsify_components`).

    Subject scores are Gaussian around the block means of the setting and
    are column-centered, so with mean-zero components the data come out
    exactly double-centered. Gaussian noise is orthogonal to the true
    components and rescaled so the signal/noise energy ratio equals the
    target SNR.
    """
    if snr_x <= 0 or snr_y <= 0:
        raise ValueError("SNR targets must be positive")
    rng = np.random.default_rng(seed)
    S_x, S_y = setting1_components()
    S_Ix, S_Jx = S_x[:1], S_x[1:]
    S_Jy, S_Iy = S_y[:2], S_y[2:]
    sparsity = {}
    if sparse:
        S_Jx, zx = sparsify_components(S_Jx, zero_fraction=zero_fraction)
        S_Ix, zix = sparsify_components(S_Ix, zero_fraction=zero_fraction)
        S_Jy, zy = sparsify_components(S_Jy, zero_fraction=zero_fraction)
        S_Iy, ziy = sparsify_components(S_Iy, zero_fraction=zero_fraction)
        sparsity = {
            "x": np.r_[zx, zix].round(6).tolist(),
            "y": np.r_[zy, ziy].round(6).tolist(),
        }

    mu1, mu2, mu3x, mu3y, mu4y = _means(n)
    M_J = _centered_cols(np.column_stack([mu1, mu2]) + rng.standard_normal((n, 2)))
    M_Ix = _centered_cols(mu3x[:, None] + rng.standard_normal((n, 1)))
    M_Iy = _centered_cols(np.column_stack([mu3y, mu4y]) + rng.standard_normal((n, 2)))
    D_x = np.array([1.0, 1.0])
    D_y = np.array([-5.0, 2.0])

    sig_x = M_J @ np.diag(D_x) @ S_Jx + M_Ix @ S_Ix
    sig_y = M_J @ np.diag(D_y) @ S_Jy + M_Iy @ S_Iy
    M_Nx, N_x = _noise(rng, n, 3, np.vstack([S_Jx, S_Ix]), sig_x, snr_x)
    M_Ny, N_y = _noise(rng, n, 4, np.vstack([S_Jy, S_Iy]), sig_y, snr_y)

    X = M_J @ np.diag(D_x) @ S_Jx + M_Ix @ S_Ix + M_Nx @ N_x
    Y = M_J @ np.diag(D_y) @ S_Jy + M_Iy @ S_Iy + M_Ny @ N_y
    return SimulationTruth(
        X=X, Y=Y, M_J=M_J, M_Ix=M_Ix, M_Iy=M_Iy, M_Nx=M_Nx, M_Ny=M_Ny,
        D_x=D_x, D_y=D_y, S_Jx=S_Jx, S_Ix=S_Ix, S_Jy=S_Jy, S_Iy=S_Iy,
        N_x=N_x, N_y=N_y, snr_x=snr_x, snr_y=snr_y,
        r2_x=variance_decomposition(X, S_Jx, S_Ix),
        r2_y=variance_decomposition(Y, S_Jy, S_Iy),
        seed=seed, setting="1-sparse" if sparse else "1", sparsity=sparsity,
    )


def achieved_snr(truth: SimulationTruth) -> tuple[float, float]:
    """Signal/noise energy ratios of the stored parts."""
    sx = truth.X - truth.M_Nx @ truth.N_x
    sy = truth.Y - truth.M_Ny @ truth.N_y
    return (
        float(np.sum(sx**2) / np.sum((truth.M_Nx @ truth.N_x) ** 2)),
        float(np.sum(sy**2) / np.sum((truth.M_Ny @ truth.N_y) ** 2)),
    )
