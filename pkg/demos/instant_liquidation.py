"""When trading is free and the drift is strong enough, sell everything at once.

With k = 0 the best strategy on this GBM market is to split the whole position
into infinitesimal sales immediately, so both solvers should reproduce
W(x, p) = (p / lam) (1 - exp(-lam x)). Without impact the value is x p.
"""

# %%
import warnings

import numpy as np

from optexec import (
    Grid2D, ImpactModel, ImpulseProblem, MarketModel, SingularProblem,
    liquidation_value, solve_impulse, solve_singular,
)

model = MarketModel.gbm(2.0, 1.0, 4.0)
impact = ImpactModel.exponential(0.5)


def sup_error(values, grid):
    x, p = grid.mesh()
    w = liquidation_value(impact, x, p)
    return np.max(np.abs(values[1:, 1:-1] - w[1:, 1:-1]) / w[1:, 1:-1])


# %% both solvers against W as the grid is refined.
# The impulse solver warns that k = 0 carries no uniqueness guarantee; here W is known.
warnings.filterwarnings("ignore", "impulse solve with k = 0")
print(" n    impulse   singular")
for n in (50, 100, 200, 400):
    g = Grid2D(10.0, 10.0, n, n)
    vi, _, _ = solve_impulse(ImpulseProblem(model, impact, 0.0, g))
    vs, pol, _ = solve_singular(SingularProblem(model, impact, g))
    print(f"{n:4d}  {sup_error(vi, g):8.4%}  {sup_error(vs, g):8.4%}")

# %% the error roughly halves with each doubling, a first-order scheme.
# Every interior node is in the trade region.
print("continue nodes:", int((~pol.trade[1:, 1:]).sum()))

# %% no impact: selling is free of consequences, so V = x p
g = Grid2D(10.0, 10.0, 200, 200)
v0, _, _ = solve_singular(SingularProblem(model, ImpactModel.none(), g))
print(f"no impact V(5, 2) = {g.interpolate(v0, 5.0, 2.0):.6f}")
