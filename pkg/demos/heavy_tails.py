"""Small Monte Carlo: how much CQR gains over LS as tails get heavier.

Run: python3 demos/heavy_tails.py [reps]
"""
import sys

from semicqr.simbench import SimConfig, run_monte_carlo

reps = int(sys.argv[1]) if len(sys.argv) > 1 else 20
for dist in ("normal", "t3", "mixture"):
    rep = run_monte_carlo(SimConfig(example=1, reps=reps, dist=dist, methods=("LS", "CQR9")))
    m = rep.metrics["CQR9"]
    print(f"{dist:>8}: MSE(LS)/MSE(CQR9) = {[round(float(v), 2) for v in m['rmse']]}, "
          f"mean ASE(LS)/ASE(CQR9) = {m['rase_mean']:.2f}")
