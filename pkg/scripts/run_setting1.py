"""Run the seven-scheme simulation benchmark and print median errors.

Example::

    python3 scripts/run_setting1.py --reps 20 --jobs 8 --out runs/setting1
    python3 scripts/run_setting1.py --sparse --methods large --out runs/sparse
"""
import argparse
import logging
from pathlib import Path

from sing.experiments import REGIMES, SCHEMES, BenchmarkConfig, medians, run_benchmark, write_long_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--methods", default=",".join(SCHEMES))
    ap.add_argument("--regimes", default=",".join(REGIMES))
    ap.add_argument("--sparse", action="store_true")
    ap.add_argument("--out", default="runs/setting1")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    cfg = BenchmarkConfig(reps=args.reps, seed=args.seed, methods=tuple(args.methods.split(",")),
                          regimes=tuple(args.regimes.split(",")), sparse=args.sparse,
                          center="column" if args.sparse else "double")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = run_benchmark(cfg, jobs=args.jobs,
                         progress=lambda g, r: logging.info("%s rep %d done", g, r))
    write_long_csv(rows, out / "results.csv")
    med = medians(rows)
    metrics = ("S_Jx", "S_Jy", "M_Jx", "M_Jy", "J_x", "J_y")
    print(f"{'regime':<10} {'method':<9} " + " ".join(f"{m:>7}" for m in metrics))
    for regime in cfg.regimes:
        for method in cfg.methods:
            vals = " ".join(f"{med[(method, regime, m)]:7.3f}" for m in metrics)
            print(f"{regime:<10} {method:<9} {vals}")


if __name__ == "__main__":
    main()
