"""Selling at a constant rate u instead of optimally.

The closed-form revenue of a constant-rate sale is compared with simulation,
then u is pushed up to show the revenue approaching immediate liquidation W.
"""

# %%
from optexec import (
    ImpactModel, MarketModel, SimConfig, constant_rate_revenue,
    liquidation_value, simulate_constant_rate,
)

model = MarketModel.gbm(2.0, 1.0, 4.0)
impact = ImpactModel.exponential(0.5)
y0 = (5.0, 2.0)

# %% closed form against simulation at u = 1
exact = constant_rate_revenue(model, impact, y0, 1.0)
res = simulate_constant_rate(model, impact, y0, 1.0, SimConfig.for_model(model, n_paths=100_000, dt=1e-3))
print(f"closed form {exact:.7f}, simulated {res.mean:.5f} +- {res.half_width_95:.5f}")

# %% faster selling approaches W from below
w = float(liquidation_value(impact, *y0))
for u in (1, 4, 16, 64, 256, 4096):
    r = constant_rate_revenue(model, impact, y0, float(u))
    print(f"u = {u:5d}  revenue {r:.5f}  gap to W {100 * (w - r) / w:6.2f}%")
