"""The check-loss LP engine: exact optima, weights and L1 penalties.

Run: python3 demos/lp_engine.py
"""
import numpy as np

from semicqr import PinballProblem, brute_force_oracle, solve

# The median of 1, 2, 3 is the minimizer of the absolute loss.
print("median:", solve(PinballProblem(np.ones((3, 1)), [1, 2, 3], 0.5)).coefficients)

# Row weights act like repeated rows.
sol = solve(PinballProblem(np.ones((3, 1)), [1, 2, 3], 0.5, weight=[1, 2, 1]))
print("weighted median:", sol.coefficients, "objective", sol.objective)

# A small random problem compared with enumeration of every basic solution.
rng = np.random.default_rng(1)
X = np.column_stack([np.ones(20), rng.standard_normal((20, 2))])
y = X @ [1.0, 2.0, -1.0] + rng.standard_t(2, 20)
P = PinballProblem(X, y, tau=rng.uniform(0.1, 0.9, 20))
print("solver objective:", solve(P).objective, " oracle:", brute_force_oracle(P).objective)

# L1 penalties: coordinates that the penalty removes are exact zeros.
for pen in (0.0, 2.0, 8.0, 20.0):
    b = solve(PinballProblem(X, y, 0.5, penalty=[0.0, pen, pen])).coefficients
    print(f"penalty {pen:5.1f}: coefficients {b}  exact zeros: {int(np.sum(b == 0.0))}")
