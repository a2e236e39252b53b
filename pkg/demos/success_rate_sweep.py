"""Monte-Carlo success rate of the Beurling-LASSO against separation.

A desk-scale version of the two-spike experiment: 20 trials per point,
N = 101, 60 dB. Writes sweep.csv next to this script and prints the
located transition next to gamma*.

    python3 demos/success_rate_sweep.py [--psf triangular] [--trials 50]
"""
import argparse
import os

import resolimit as rl
from resolimit.harness import SweepSpec, parse_grid, run_sweep

ap = argparse.ArgumentParser()
ap.add_argument("--psf", default="sinc")
ap.add_argument("--trials", type=int, default=20)
ap.add_argument("--workers", type=int, default=1)
args = ap.parse_args()

psf = rl.psf_from_shorthand(args.psf)
ref = rl.gamma_star(psf).gamma_star
spec = SweepSpec(psf, N=101, snr_db=60, trials=args.trials,
                 separations=parse_grid("0.8:0.05:2.0"), gamma_star_ref=ref)
res = run_sweep(spec, workers=args.workers)

for s, r in zip(res.separations, res.rates):
    print(f"{s:5.2f} {r:5.2f} {'#' * int(round(40 * r))}")
tr = res.transition
print(f"\ntransition {tr.value:.2f} (interpolated {tr.interpolated:.3f}), gamma* {ref:.4f}, "
      f"{res.elapsed_s:.0f}s")

out = os.path.join(os.path.dirname(os.path.abspath(__file__)), "sweep.csv")
res.to_csv(out)
print(f"wrote {out}")
