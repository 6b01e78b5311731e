#!/usr/bin/env python3
"""Map steady-gait thrust and efficiency over the amplitude/Strouhal grid.

Runs the open-loop sinusoidal sweep (no learning) and prints the
efficiency-optimal point. Noise off by default so the landscape is the
clean surrogate response; add --noise to average noisy repeats instead.
"""

import argparse
import sys

import numpy as np

from flapfoil.harness import default_amp_grid, default_st_grid, run_sinusoidal_sweep
from flapfoil.hydro import SurrogateParams


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=1)
    ap.add_argument("--duration", type=float, default=60.0)
    ap.add_argument("--noise", action="store_true")
    ap.add_argument("--master-seed", type=int, default=0)
    ap.add_argument("--out", default="out/sweep.csv")
    args = ap.parse_args()

    params = SurrogateParams()
    if not args.noise:
        params = SurrogateParams(sigma_t=0.0, sigma_m=0.0, sigma_u=0.0)

    points = run_sinusoidal_sweep(
        default_amp_grid(),
        default_st_grid(),
        repeats=args.repeats,
        duration_s=args.duration,
        params=params,
        master_seed=args.master_seed,
        out_path=args.out,
    )
    print(f"{len(points)} grid points -> {args.out}")

    etas = np.array([p.eta if not p.degenerate else -np.inf for p in points])
    best = points[int(np.argmax(etas))]
    print(f"best eta: amp={best.amp_deg:g} deg St={best.st:g} "
          f"(f={best.freq_hz:.3f} Hz) eta={best.eta:.4f} C_T={best.c_t:.4f}")
    n_pos = sum(1 for p in points if not p.degenerate and p.c_t > 0)
    print(f"{n_pos} points with positive thrust")
    return 0


if __name__ == "__main__":
    sys.exit(main())
