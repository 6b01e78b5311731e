#!/usr/bin/env python3
"""Score how well k-window returns track episode efficiency.

Rolls random-policy episodes, then for each window size k regresses the
(min-max normalised) cumulative k-window return against the long-horizon
efficiency across episodes. R^2 near 1 means the shaped signal ranks
gaits the same way the true objective does.
"""

import argparse
import sys

import numpy as np

from flapfoil.harness import TAG_MISMATCH
from flapfoil.mdp import EpisodeConfig, rollout_random
from flapfoil.reward import mismatch_analysis


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--episodes", type=int, default=10)
    # slowest admissible gait fits ~17 beats in 60 s, so k > 16 can
    # outrun a random episode
    ap.add_argument("--k", default="1,2,4,8,12,16")
    ap.add_argument("--duration", type=float, default=60.0)
    ap.add_argument("--master-seed", type=int, default=0)
    ap.add_argument("--out", default="out/mismatch.csv")
    args = ap.parse_args()
    if args.episodes < 2:
        ap.error("need at least 2 episodes to fit R^2")

    k_list = [int(tok) for tok in args.k.split(",")]
    cfg = EpisodeConfig(horizon_s=args.duration, n_history=1,
                        warmup_repeats=2, k_window=1)
    records = [
        rollout_random(cfg, [args.master_seed, TAG_MISMATCH, ep],
                       args.duration, episode=ep)
        for ep in range(args.episodes)
    ]
    results = mismatch_analysis(records, k_list)
    results.to_csv(args.out)
    print(f"{args.episodes} episodes -> {args.out}")
    for k in results.k_list:
        r2 = results.r_squared[k]
        bar = "#" * int(np.clip(r2, 0, 1) * 40)
        flag = "  (degenerate)" if results.degenerate[k] else ""
        print(f"k={k:>3d}  R^2={r2:7.4f}  {bar}{flag}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
