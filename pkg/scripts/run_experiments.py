"""Run the four experiments and write CSVs, manifests and summaries.

    python scripts/run_experiments.py --scale 10 --seed 11 --out-dir results
"""

import argparse
import time

from bandit_subset import evaluation as ev


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=11)
    parser.add_argument("--scale", type=int, default=10)
    parser.add_argument("--out-dir", default="results")
    parser.add_argument("--only", nargs="*", choices=tuple(ev.RUNNERS), default=list(ev.RUNNERS))
    args = parser.parse_args()

    for name in args.only:
        cfg = ev.make_config(name, seed=args.seed, scale=args.scale, workers=ev.default_workers(),
                             output_dir=args.out_dir)
        start = time.perf_counter()
        result = ev.run_experiment(cfg)
        ev.write_outputs(result, args.out_dir)
        print(f"{name}: {len(result.rows)} rows in {time.perf_counter() - start:.1f}s")
        for row in ev.summarize(result.rows):
            print(f"  {row['method']:>15} {row['param']:>6} {row['mean']:.4f} +- {row['standard_error']:.4f}")


if __name__ == "__main__":
    main()
