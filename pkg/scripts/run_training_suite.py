#!/usr/bin/env python3
"""Train the k-window suite and aggregate learning curves.

Defaults reproduce the main comparison (k = 1, 2, 8, 16; 5 seeds;
400 episodes each). Expect hours at full scale; use --seeds/--episodes
to shrink for a smoke run.
"""

import argparse
import sys
from pathlib import Path

from flapfoil.harness import final_gait_summary, run_training_suite, write_curve_csv


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--k", default="1,2,8,16",
                    help="comma list of reward-window sizes")
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--episodes", type=int, default=400)
    ap.add_argument("--master-seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="out/suite")
    args = ap.parse_args()

    k_values = [int(tok) for tok in args.k.split(",")]
    out = Path(args.out)
    result = run_training_suite(
        k_values,
        n_seeds=args.seeds,
        episodes=args.episodes,
        master_seed=args.master_seed,
        out_dir=out,
        workers=args.workers,
    )
    for rec in result.records:
        tag = "FAILED" if rec.failed else f"{len(rec.rows)} episodes"
        print(f"{rec.run_id}: {tag}")

    write_curve_csv(result.curve, out / "curves.csv")
    print(f"curves -> {out / 'curves.csv'}")

    for gait in final_gait_summary(result.records):
        print(f"{gait.run_id}: amp={gait.median_amp_deg:.2f} deg "
              f"f={gait.median_freq_hz:.3f} Hz St={gait.st:.3f}")
    return 0 if any(not r.failed for r in result.records) else 1


if __name__ == "__main__":
    sys.exit(main())
