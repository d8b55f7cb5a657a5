"""Selling 5 shares at price 2 when every trade costs k = 0.2.

Price is a GBM (mu=2, sigma=1) discounted at beta=4, and each sale of zeta
shares moves the price to p * exp(-0.5 zeta). The fixed cost makes the seller
bunch the position into a few discrete sales.
"""

# %%
import numpy as np

from optexec import (
    Grid2D, ImpactModel, ImpulseProblem, MarketModel, SimConfig,
    immediate_trades, liquidation_value, simulate_impulse, solve_impulse,
)

model = MarketModel.gbm(2.0, 1.0, 4.0)
impact = ImpactModel.exponential(0.5)
problem = ImpulseProblem(model, impact, 0.2, Grid2D(10.0, 10.0, 200, 200))
values, policy, report = solve_impulse(problem)
print(f"solved in {report.wall_time:.2f}s, residual {report.residual:.1e}")

# %% value at the starting point against selling everything in one smooth sweep
v = problem.grid.interpolate(values, 5.0, 2.0)
print(f"V(5, 2) = {v:.4f}   W(5, 2) = {float(liquidation_value(impact, 5.0, 2.0)):.4f}")

# %% the trades taken at time zero
x, p = 5.0, 2.0
for n, (xa, pa, z) in enumerate(immediate_trades(problem, policy, (x, p)), 1):
    print(f"trade {n}: at x={xa:.3f}, p={pa:.3f} sell {z:.3f}")

# %% what is left is held until the price climbs into the trade region again
frac = policy.trade[1:, 1:].mean()
print(f"fraction of the grid in the trade region: {frac:.2f}")

# %% a simulation of the same policy should land close to V
res = simulate_impulse(problem, policy, (5.0, 2.0), SimConfig.for_model(model, n_paths=20_000, dt=1e-3))
print(f"simulated {res.mean:.4f} +- {res.half_width_95:.4f} over {res.n_paths} paths")
print(f"gap to solver: {100 * abs(res.mean - v) / v:.2f}% of V")
