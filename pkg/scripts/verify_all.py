"""Run every numerical check at default settings and print one line each."""

import argparse
import sys
import time

from bandit_subset import verify


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    calls = {
        "lemma1": {"seed": args.seed},
        "lemma_maxq": {"m": 4, "k": 3},
        "iid_band": {"seed": args.seed},
        "widths": {"seed": args.seed},
        "thm1": {"seed": args.seed},
        "thm2": {"seed": args.seed},
        "thm3": {"seed": args.seed, "eval_instances": 10**4},
        "thm5": {"seed": args.seed},
    }
    failed = 0
    for name, kw in calls.items():
        start = time.perf_counter()
        res = verify.RUNNERS[name](**kw)
        failed += not res.holds
        print(f"{name:>10}  {'holds' if res.holds else 'FAILS'}  ({time.perf_counter() - start:.1f}s)")
    sys.exit(1 if failed else 0)


if __name__ == "__main__":
    main()
