"""Asymptotic efficiency of CQR relative to least squares.

ARE for beta is sigma^2 / R2(q); ARE for the curves is its 4/5 power.

Run: python3 demos/efficiency_table.py
"""
from semicqr import are_report, bandwidth_cqr, get_distribution
from semicqr.efficiency import BUILTIN_DISTRIBUTIONS

qs = [1, 5, 9, 19, 99]
print(f"{'error':<10}" + "".join(f"{'q=' + str(q):>10}" for q in qs))
for name in BUILTIN_DISTRIBUTIONS:
    rows = are_report(get_distribution(name), qs)
    print(f"{name:<10}" + "".join(f"{r.are_beta:>10.3f}" for r in rows))

n = get_distribution("normal")
print("\nnormal errors: CQR9 bandwidth for an LS bandwidth of 0.128 ->",
      round(bandwidth_cqr(0.128, n, 9), 4))
