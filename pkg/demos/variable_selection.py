"""One-step sparse CQR with BIC on the sparse simulation design.

Run: python3 demos/variable_selection.py
"""
import numpy as np

from semicqr import _composite, bic_select
from semicqr.simbench import BETA2, gen_example2

data = gen_example2(200, "normal", np.random.default_rng(3))
taus = np.arange(1, 10) / 10
curves, _, _, _ = _composite.stage1(data, taus, 0.2, "epanechnikov")
beta0, _ = _composite.stage2(data, curves, taus)
res = bic_select(data, curves, beta0, 9)

print("true beta:        ", BETA2)
print("unpenalized beta: ", np.round(beta0, 3))
print("selected beta:    ", np.round(res.beta, 3))
print(f"lambda={res.lam:.4g}  df={res.df}  BIC={res.bic:.4f}")
print("\nlambda path (largest first):")
for p in res.path[::7]:
    print(f"  lambda={p.lam:9.4g}  df={p.df}  BIC={p.bic:8.4f}")
