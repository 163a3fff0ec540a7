"""Command-line interface.

Subcommands: ``lngca``, ``sing``, ``simulate``, ``benchmark`` and ``evaluate``.
Every run writes its outputs and a ``manifest.json`` into one directory.
Exit codes: 0 success (possibly with warnings), 2 input error, 3
configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .averaged import sing_averaged  # noqa: F401  (re-exported for scripts)
from .experiments import REGIMES, SCHEMES, BenchmarkConfig, medians, run_benchmark, write_long_csv
from .io import digest, read_matrix, write_matrix
from .joint import SingConfig, default_rho, fit_sing, initial_unmixing, joint_jb_values
from .lngca import MultiStartConfig, fit_lngca, fit_saturated
from .matching import greedy_match, joint_rank_test
from .preprocess import prepare
from .rank_test import binary_search_rank
from .simulate import setting1_generate

log = logging.getLogger("sing")

EXIT_OK, EXIT_INPUT, EXIT_CONFIG = 0, 2, 3
JOBS_ENV = "SING_JOBS"


class InputError(Exception):
    pass


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: configuration error: {message}\n")


def _default_jobs() -> int:
    raw = os.environ.get(JOBS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{JOBS_ENV} must be an integer, got {raw!r}")


def _load(path) -> np.ndarray:
    try:
        A = read_matrix(path)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if not np.all(np.isfinite(A)):
        raise InputError(f"{path} contains non-finite values")
    return A


def _manifest(args, out: Path, inputs: dict, outputs: list, start: float, **extra) -> dict:
    config = {k: v for k, v in vars(args).items() if k not in ("func", "config")}
    man = {
        "version": __version__,
        "command": args.command,
        "config": config,
        "seeds": {"seed": getattr(args, "seed", None)},
        "inputs": {name: {"path": str(p), "sha256": digest(p)} for name, p in inputs.items()},
        "outputs": {Path(p).name: digest(p) for p in outputs},
        "wall_clock_seconds": round(time.time() - start, 3),
    }
    man.update(extra)
    (out / "manifest.json").write_text(json.dumps(man, indent=2, default=float))
    return man


def _multistart(args) -> MultiStartConfig:
    if args.restarts < 1:
        raise ConfigError("--restarts must be >= 1")
    return MultiStartConfig(n_restarts=args.restarts, seed=args.seed)


def cmd_lngca(args) -> int:
    start = time.time()
    X = _load(args.input)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        wd = prepare(X, center=args.center)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    cfg = _multistart(args)
    if args.saturated:
        fit = fit_saturated(wd, cfg)
    else:
        if args.r is None:
            raise ConfigError("give --r or --saturated")
        if not 1 <= args.r <= wd.retained_rank:
            raise ConfigError(f"--r must lie in [1, {wd.retained_rank}]")
        fit = fit_lngca(wd, args.r, cfg)
    files = [
        write_matrix(out / "U.csv", fit.U),
        write_matrix(out / "M.csv", fit.M),
        write_matrix(out / "S.csv", fit.S),
        write_matrix(out / "jb_values.csv", fit.jb_values[None, :]),
    ]
    warnings = [] if fit.converged else ["best restart did not converge"]
    _manifest(args, out, {"input": args.input}, files, start,
              converged=fit.converged, warnings=warnings, best_seed=fit.best_seed,
              n_components=fit.r, objective=fit.objective)
    return EXIT_OK


def _rank_arg(value: str, wd, args, name: str) -> int:
    if value == "saturated":
        return wd.retained_rank
    if value == "test":
        res = binary_search_rank(wd.Xc, T=args.T, alpha=args.rank_alpha, seed=args.seed, jobs=args.jobs)
        log.info("%s: selected rank %d", name, res.selected_rank)
        return max(res.selected_rank, 1)
    try:
        r = int(value)
    except ValueError:
        raise ConfigError(f"--{name} must be an integer, 'test' or 'saturated'")
    if not 1 <= r <= wd.retained_rank:
        raise ConfigError(f"--{name} must lie in [1, {wd.retained_rank}]")
    return r


def cmd_sing(args) -> int:
    start = time.time()
    X, Y = _load(args.x), _load(args.y)
    if X.shape[0] != Y.shape[0]:
        raise InputError(f"row mismatch: {X.shape[0]} subjects in X, {Y.shape[0]} in Y")
    if args.rho != "auto":
        try:
            rho = float(args.rho)
        except ValueError:
            raise ConfigError("--rho must be a non-negative number or 'auto'")
        if rho < 0:
            raise ConfigError("--rho must be non-negative")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        wx, wy = prepare(X, center=args.center), prepare(Y, center=args.center)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    ms = _multistart(args)
    files, report = [], {}

    if args.rj == "test":
        sx, sy = fit_saturated(wx, ms), fit_saturated(wy, ms)
        test = joint_rank_test(sx.M, sy.M, T=args.T, alpha=args.alpha, seed=args.seed)
        r_J = test.r_J
        report = {"pairs": test.pairs.tolist(), "distances": test.distances.tolist(),
                  "p_values": test.p_values.tolist(), "non_monotone": test.non_monotone}
    else:
        try:
            r_J = int(args.rj)
        except ValueError:
            raise ConfigError("--rj must be an integer or 'test'")
        if r_J < 0:
            raise ConfigError("--rj must be non-negative")
    if r_J == 0:
        marker = out / "NO_JOINT_STRUCTURE"
        marker.write_text("no joint structure detected\n")
        _manifest(args, out, {"x": args.x, "y": args.y}, [marker], start,
                  r_J=0, no_joint_structure=True, match_report=report)
        print("no joint structure")
        return EXIT_OK

    r_x = _rank_arg(args.rx, wx, args, "rx")
    r_y = _rank_arg(args.ry, wy, args, "ry")
    if r_J > min(r_x, r_y):
        raise ConfigError(f"r_J={r_J} exceeds min(r_x, r_y)={min(r_x, r_y)}")
    fx, fy = fit_lngca(wx, r_x, ms), fit_lngca(wy, r_y, ms)
    Ux0, Uy0, pairs, dist = initial_unmixing(fx, fy)
    rho_hat = float(joint_jb_values(fx, fy, r_J).sum())
    if args.rho == "auto":
        rho = default_rho(joint_jb_values(fx, fy, r_J))
    cfg = SingConfig(rho=rho, epsilon=args.epsilon, max_iter=args.max_iter)
    fit = fit_sing(wx, wy, Ux0, Uy0, r_J, cfg)

    for name in ("M_J", "M_Jy", "S_Jx", "S_Jy", "M_Ix", "M_Iy", "S_Ix", "S_Iy", "U_x", "U_y"):
        A = getattr(fit, name)
        if A.size:
            files.append(write_matrix(out / f"{name}.csv", A))
    files.append(write_matrix(out / "D_x.csv", fit.D_x[None, :]))
    files.append(write_matrix(out / "D_y.csv", fit.D_y[None, :]))
    files.append(write_matrix(out / "objective_trace.csv", np.asarray(fit.objective_trace)[:, None],
                              header=["objective"]))
    if report:
        (out / "match_report.json").write_text(json.dumps(report, indent=2))
        files.append(out / "match_report.json")
    warnings = [] if (fit.converged or fit.stalled) else [f"no convergence in {cfg.max_iter} iterations"]
    _manifest(args, out, {"x": args.x, "y": args.y}, files, start,
              r_J=r_J, r_x=r_x, r_y=r_y, rho=rho, rho_hat=rho_hat, converged=fit.converged,
              stalled=fit.stalled, iterations=fit.n_iter, warnings=warnings,
              joint_distances=fit.joint_distances.tolist(),
              condition_numbers=[fit.condition_x, fit.condition_y],
              initial_match_distances=dist[:r_J].tolist(), match_report=report)
    return EXIT_OK


def cmd_simulate(args) -> int:
    start = time.time()
    if args.snr_x <= 0 or args.snr_y <= 0:
        raise ConfigError("SNR values must be positive")
    truth = setting1_generate(args.snr_x, args.snr_y, args.seed, sparse=args.setting == "1-sparse")
    out = Path(args.out)
    truth.save(out)
    files = sorted(p for p in out.glob("*.csv"))
    sim = json.loads((out / "manifest.json").read_text())
    _manifest(args, out, {}, files, start, simulation=sim)
    return EXIT_OK


def cmd_benchmark(args) -> int:
    start = time.time()
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    regimes = tuple(r.strip() for r in args.regimes.split(",") if r.strip())
    try:
        cfg = BenchmarkConfig(reps=args.reps, seed=args.seed, methods=methods, regimes=regimes,
                              restarts=args.restarts, sparse=args.sparse,
                              center="column" if args.sparse else "double")
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = run_benchmark(cfg, jobs=args.jobs,
                         progress=lambda g, r: log.info("finished %s replicate %d", g, r))
    results = write_long_csv(rows, out / "results.csv")
    summary = out / "summary.csv"
    with open(summary, "w") as fh:
        fh.write("method,regime,metric,median\n")
        for (m, g, k), v in medians(rows).items():
            fh.write(f"{m},{g},{k},{v!r}\n")
    cfg_dict = asdict(cfg)
    _manifest(args, out, {}, [results, summary], start, benchmark=cfg_dict)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    """Check an output directory: component orthogonality and, with ``--truth``, recovery errors."""
    from .metrics import mse_joint, pmse, pmse_mixing

    est = Path(args.estimate)
    if not est.is_dir():
        raise InputError(f"{est} is not a directory")
    report = {}
    for name in ("S", "S_Jx", "S_Jy"):
        path = est / f"{name}.csv"
        if path.exists():
            S = _load(path)
            gram = S @ S.T / S.shape[1]
            err = float(np.max(np.abs(gram - np.eye(len(gram)))))
            report[f"{name}_orthogonality_error"] = err
            report[f"{name}_orthogonal"] = err < args.tol
    if args.truth:
        tru = Path(args.truth)
        for key, (t_name, e_name, fn) in {
            "S_Jx": ("S_Jx", "S_Jx", pmse), "S_Jy": ("S_Jy", "S_Jy", pmse),
            "M_Jx": ("M_J", "M_J", pmse_mixing), "M_Jy": ("M_J", "M_Jy", pmse_mixing),
        }.items():
            if (tru / f"{t_name}.csv").exists() and (est / f"{e_name}.csv").exists():
                report[f"sqrt_pmse_{key}"] = fn(_load(tru / f"{t_name}.csv"), _load(est / f"{e_name}.csv"))
        if all((est / f).exists() for f in ("M_J.csv", "D_x.csv", "S_Jx.csv")):
            Jx_hat = _load(est / "M_J.csv") @ np.diag(_load(est / "D_x.csv")[0]) @ _load(est / "S_Jx.csv")
            Dx = _load(tru / "D_x.csv")[0]
            Jx = _load(tru / "M_J.csv") @ np.diag(Dx) @ _load(tru / "S_Jx.csv")
            report["sqrt_mse_J_x"] = mse_joint(Jx, Jx_hat)
    print(json.dumps(report, indent=2))
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sing", description="Joint non-Gaussian component analysis of two datasets.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--config", help="JSON file of option values (a previous manifest also works)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, restarts=20):
        sp.add_argument("--restarts", type=int, default=restarts)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", required=True)

    sp = sub.add_parser("lngca", help="separate LNGCA of one matrix")
    sp.add_argument("input")
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--r", type=int)
    g.add_argument("--saturated", action="store_true")
    sp.add_argument("--center", choices=("double", "column"), default="double")
    common(sp)
    sp.set_defaults(func=cmd_lngca)

    sp = sub.add_parser("sing", help="joint fit of two matrices")
    sp.add_argument("x")
    sp.add_argument("y")
    sp.add_argument("--rho", default="auto", help="penalty weight or 'auto' (JB sum / 10)")
    sp.add_argument("--rj", default="test", help="joint rank or 'test'")
    sp.add_argument("--rx", default="test", help="components for X: integer, 'test' or 'saturated'")
    sp.add_argument("--ry", default="test", help="components for Y: integer, 'test' or 'saturated'")
    sp.add_argument("--alpha", type=float, default=0.01, help="joint-rank test level")
    sp.add_argument("--rank-alpha", type=float, default=0.05, help="signal-rank test level")
    sp.add_argument("--T", type=int, default=200, help="permutations per test")
    sp.add_argument("--epsilon", type=float, default=1e-6)
    sp.add_argument("--max-iter", type=int, default=10000)
    sp.add_argument("--center", choices=("double", "column"), default="double")
    sp.add_argument("--jobs", type=int, default=None)
    common(sp)
    sp.set_defaults(func=cmd_sing)

    sp = sub.add_parser("simulate", help="generate a simulated pair of datasets")
    sp.add_argument("--setting", choices=("1", "1-sparse"), default="1")
    sp.add_argument("--snr-x", type=float, default=0.2)
    sp.add_argument("--snr-y", type=float, default=0.2)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("benchmark", help="compare all schemes on simulated data")
    sp.add_argument("--methods", default=",".join(SCHEMES))
    sp.add_argument("--regimes", default=",".join(REGIMES))
    sp.add_argument("--reps", type=int, default=20)
    sp.add_argument("--sparse", action="store_true", help="sparse components, column centering")
    sp.add_argument("--jobs", type=int, default=None)
    common(sp)
    sp.set_defaults(func=cmd_benchmark)

    sp = sub.add_parser("evaluate", help="check outputs and score them against a truth directory")
    sp.add_argument("estimate")
    sp.add_argument("--truth")
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_evaluate)
    return p


def _apply_config(parser, args, argv):
    """Values from ``--config`` fill in options not given on the command line."""
    try:
        data = json.loads(Path(args.config).read_text())
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    if "config" in data and isinstance(data["config"], dict):
        data = data["config"]
    defaults = parser.parse_args([a for a in argv if a != "--config" and a != args.config])
    given = {k for k, v in vars(defaults).items() if k != "config"}
    explicit = set()
    for tok in argv:
        if tok.startswith("--"):
            explicit.add(tok[2:].split("=")[0].replace("-", "_"))
    for key, value in data.items():
        if key in given and key not in explicit and key not in ("command",):
            setattr(args, key, value)
    return args


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.config:
            args = _apply_config(parser, args, argv)
        if getattr(args, "jobs", 1) is None:
            args.jobs = _default_jobs()
        return args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
