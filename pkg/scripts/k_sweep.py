"""Sweep the lattice modulus at fixed depth; write sweep CSV to stdout or a path."""
import argparse
import sys

import numpy as np

from gpestab.sweep import SweepPlan, records_to_csv, run_sweep

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--V0", type=float, default=-1.0)
ap.add_argument("--points", type=int, default=19)
ap.add_argument("--workers", type=int, default=1)
ap.add_argument("--out")
args = ap.parse_args()

ks = tuple(float(k) for k in np.linspace(0.05, 0.95, args.points))
plan = SweepPlan(axes=(("k", ks),), fixed={"V0": args.V0, "g1": 1.0}, n_points=128, workers=args.workers)
text = records_to_csv(run_sweep(plan), f"k sweep V0={args.V0}")
if args.out:
    open(args.out, "w").write(text)
else:
    sys.stdout.write(text)
