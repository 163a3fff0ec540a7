"""Benchmark harness for the two-dataset simulation.

Seven schemes are compared on every replicate: Joint ICA, mCCA+jICA,
separate fits (``rho = 0``), SING with small / medium / large ``rho``
(``0.1``, ``1`` and ``20`` times the summed JB of the matched joint
components from the separate fits) and the averaged fit. All schemes use the
true ranks ``r_x = 3``, ``r_y = 4`` and ``r_J = 2``; SING with ``rho > 0``
starts from the ``rho = 0`` solution.
"""
from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .averaged import sing_averaged
from .baselines import joint_ica, mcca_jica
from .joint import SingConfig, fit_sing, initial_unmixing, joint_jb_values
from .lngca import MultiStartConfig, fit_lngca
from .metrics import mse_joint, pmse, pmse_mixing
from .preprocess import prepare
from .simulate import SNR_LEVELS, setting1_generate

log = logging.getLogger(__name__)

SCHEMES = ("jointica", "mcca", "rho0", "small", "medium", "large", "sing-avg")
RHO_MULTIPLIERS = {"small": 0.1, "medium": 1.0, "large": 20.0}
REGIMES = {
    "low-low": (SNR_LEVELS["low"], SNR_LEVELS["low"]),
    "low-high": (SNR_LEVELS["low"], SNR_LEVELS["high"]),
    "high-low": (SNR_LEVELS["high"], SNR_LEVELS["low"]),
    "high-high": (SNR_LEVELS["high"], SNR_LEVELS["high"]),
}
METRICS = ("S_Jx", "S_Jy", "M_Jx", "M_Jy", "J_x", "J_y")
FIELDS = ("method", "regime", "rep", "metric", "value")


@dataclass(frozen=True)
class BenchmarkConfig:
    reps: int = 20
    seed: int = 0
    methods: tuple = SCHEMES
    regimes: tuple = tuple(REGIMES)
    restarts: int = 20
    sparse: bool = False
    center: str = "double"
    sing: SingConfig = field(default_factory=SingConfig)

    def __post_init__(self):
        bad = [m for m in self.methods if m not in SCHEMES]
        if bad:
            raise ValueError(f"unknown method(s) {bad}; choose from {SCHEMES}")
        bad = [r for r in self.regimes if r not in REGIMES]
        if bad:
            raise ValueError(f"unknown regime(s) {bad}; choose from {tuple(REGIMES)}")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")


def replicate_seed(seed: int, regime: str, rep: int) -> int:
    """Data seed for one replicate, independent of scheduling order."""
    idx = list(REGIMES).index(regime)
    return int(np.random.SeedSequence([seed, idx, rep]).generate_state(1)[0])


def estimates(fit) -> dict:
    """The six quantities that are scored, extracted from any fit type."""
    if hasattr(fit, "M_Jy"):  # JointFit
        return dict(S_Jx=fit.S_Jx, S_Jy=fit.S_Jy, M_Jx=fit.M_J, M_Jy=fit.M_Jy,
                    J_x=fit.J_x, J_y=fit.J_y)
    if hasattr(fit, "procrustes_iterations"):  # AveragedFit
        return dict(S_Jx=fit.S_Jx, S_Jy=fit.S_Jy, M_Jx=fit.M_J, M_Jy=fit.M_J,
                    J_x=fit.J_x, J_y=fit.J_y)
    return dict(S_Jx=fit.loadings_x, S_Jy=fit.loadings_y, M_Jx=fit.scores_x,
                M_Jy=fit.scores_y, J_x=fit.J_x, J_y=fit.J_y)


def score(truth, fit) -> dict:
    est = estimates(fit)
    return {
        "S_Jx": pmse(truth.S_Jx, est["S_Jx"]),
        "S_Jy": pmse(truth.S_Jy, est["S_Jy"]),
        "M_Jx": pmse_mixing(truth.M_J, est["M_Jx"]),
        "M_Jy": pmse_mixing(truth.M_J, est["M_Jy"]),
        "J_x": mse_joint(truth.J_x, est["J_x"]),
        "J_y": mse_joint(truth.J_y, est["J_y"]),
    }


def _column_corr(A, B) -> np.ndarray:
    A = A / np.linalg.norm(A, axis=0)
    B = B / np.linalg.norm(B, axis=0)
    return np.abs(np.sum(A * B, axis=0))


def run_replicate(regime: str, rep: int, cfg: BenchmarkConfig) -> list[dict]:
    """Fit every requested scheme on one simulated replicate; long-format rows."""
    snr_x, snr_y = REGIMES[regime]
    truth = setting1_generate(snr_x, snr_y, replicate_seed(cfg.seed, regime, rep), sparse=cfg.sparse)
    ms = MultiStartConfig(n_restarts=cfg.restarts, seed=rep)
    fits, extra = {}, {}
    methods = set(cfg.methods)
    if "jointica" in methods:
        fits["jointica"] = joint_ica(truth.X, truth.Y, truth.r_J, ms)
    if "mcca" in methods:
        fits["mcca"] = mcca_jica(truth.X, truth.Y, truth.r_x, truth.r_y, truth.r_J, ms)
    if methods & {"rho0", "small", "medium", "large", "sing-avg"}:
        wx = prepare(truth.X, center=cfg.center)
        wy = prepare(truth.Y, center=cfg.center)
        fx, fy = fit_lngca(wx, truth.r_x, ms), fit_lngca(wy, truth.r_y, ms)
        rho_hat = float(joint_jb_values(fx, fy, truth.r_J).sum())
        Ux0, Uy0, _, _ = initial_unmixing(fx, fy)
        base = fit_sing(wx, wy, Ux0, Uy0, truth.r_J, replace(cfg.sing, rho=0.0, rho_rule="explicit"))
        fits["rho0"] = base
        for name, mult in RHO_MULTIPLIERS.items():
            if name in methods:
                sc = replace(cfg.sing, rho=mult * rho_hat, rho_rule="explicit")
                fits[name] = fit_sing(wx, wy, base.U_x, base.U_y, truth.r_J, sc)
        if "sing-avg" in methods:
            fits["sing-avg"] = sing_averaged(fx, fy, truth.r_J)
        extra["rho_hat"] = rho_hat
    rows = []
    for name in cfg.methods:
        fit = fits[name]
        values = score(truth, fit)
        if hasattr(fit, "M_Jy"):
            values["joint_corr_min"] = float(_column_corr(fit.M_J, fit.M_Jy).min())
            values["converged"] = float(fit.converged)
            values["iterations"] = float(fit.n_iter)
            values["rho"] = fit.rho
        for metric, value in values.items():
            rows.append(dict(method=name, regime=regime, rep=rep, metric=metric, value=float(value)))
    return rows


def _task(args):
    regime, rep, cfg = args
    return run_replicate(regime, rep, cfg)


def run_benchmark(cfg: BenchmarkConfig, jobs: int = 1, progress=None) -> list[dict]:
    """All replicates of all regimes; identical output for any ``jobs``."""
    tasks = [(regime, rep, cfg) for regime in cfg.regimes for rep in range(cfg.reps)]
    rows = []
    if jobs <= 1:
        for t in tasks:
            rows.extend(_task(t))
            if progress:
                progress(t[0], t[1])
    else:
        with ProcessPoolExecutor(jobs) as ex:
            for part in ex.map(_task, tasks):
                rows.extend(part)
    return rows


def write_long_csv(rows: list[dict], path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=FIELDS)
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(row[k]) if k == "value" else row[k]) for k in FIELDS})
    return path


def read_long_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [dict(r, rep=int(r["rep"]), value=float(r["value"])) for r in csv.DictReader(fh)]


def values_of(rows, method: str, regime: str, metric: str) -> np.ndarray:
    """Values ordered by replicate."""
    sel = sorted((r["rep"], r["value"]) for r in rows
                 if r["method"] == method and r["regime"] == regime and r["metric"] == metric)
    return np.array([v for _, v in sel])


def medians(rows) -> dict:
    """``{(method, regime, metric): median}``."""
    keys = {(r["method"], r["regime"], r["metric"]) for r in rows}
    return {k: float(np.median(values_of(rows, *k))) for k in sorted(keys)}
