"""Joint-rank and signal-rank selection over simulated replicates.

For each replicate the joint rank is chosen by the permutation test on
saturated separate fits, and the signal ranks of both datasets by the
bisection permutation test.

Example::

    python3 scripts/run_rank_selection.py --reps 20 --jobs 8
"""
import argparse
import time
from collections import Counter

from sing.experiments import REGIMES, replicate_seed
from sing.lngca import MultiStartConfig, fit_saturated
from sing.matching import joint_rank_test
from sing.preprocess import double_center, prepare
from sing.rank_test import binary_search_rank
from sing.simulate import setting1_generate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--regimes", default=",".join(REGIMES))
    ap.add_argument("--T", type=int, default=200)
    ap.add_argument("--alpha-joint", type=float, default=0.01)
    ap.add_argument("--alpha-signal", type=float, default=0.01)
    ap.add_argument("--signal", action="store_true", help="also run the signal-rank test")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    for regime in args.regimes.split(","):
        joint, ranks = Counter(), Counter()
        start = time.time()
        for rep in range(args.reps):
            truth = setting1_generate(*REGIMES[regime], replicate_seed(args.seed, regime, rep))
            ms = MultiStartConfig(n_restarts=20, seed=rep)
            sx = fit_saturated(prepare(truth.X), ms)
            sy = fit_saturated(prepare(truth.Y), ms)
            joint[joint_rank_test(sx.M, sy.M, T=args.T, alpha=args.alpha_joint, seed=rep).r_J] += 1
            if args.signal:
                rx = binary_search_rank(double_center(truth.X).values, args.T, args.alpha_signal,
                                        seed=rep, jobs=args.jobs).selected_rank
                ry = binary_search_rank(double_center(truth.Y).values, args.T, args.alpha_signal,
                                        seed=rep, jobs=args.jobs).selected_rank
                ranks[(rx, ry)] += 1
        print(f"{regime}: r_J counts {dict(joint)}", end="")
        if args.signal:
            print(f", (r_x, r_y) counts {dict(ranks)}", end="")
        print(f"  [{time.time() - start:.0f} s]")


if __name__ == "__main__":
    main()
