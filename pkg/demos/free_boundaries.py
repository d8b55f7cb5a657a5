"""Where to wait and where to sell, for arithmetic and mean-reverting prices.

Uses the bundled configurations: an arithmetic Brownian price (mu=4,
sigma=0.5) and an OU price pulled to m=5 at rate 4, both with exponential
impact lam=0.5 and beta=1. The seller holds while the price is low and
sells once it crosses a free boundary p*(x).
"""

# %%
from pathlib import Path

from optexec.cli import solve
from optexec.config import load_config

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
solved = {name: solve(load_config(CONFIGS / f"{stem}.ini")) for name, stem in (("ABM", "fig2"), ("OU", "fig4"))}

# %% value at the probe
for name, (problem, v, pol, rep, ok) in solved.items():
    print(f"{name}: V(5, 2) = {problem.grid.interpolate(v, 5.0, 2.0):.4f}  ({rep.wall_time:.2f}s)")

# %% free boundary: the price above which selling starts, for a few inventories
print("   x    p*_ABM   p*_OU")
fb = {name: dict(map(tuple, s[2].free_boundary)) for name, s in solved.items()}
for x in (0.5, 1.0, 2.5, 5.0, 10.0):
    row = [min(fb[n].items(), key=lambda kv: abs(kv[0] - x))[1] for n in fb]
    print(f"{x:5.1f}  {row[0]:7.3f}  {row[1]:7.3f}")

# %% coarse picture of the OU regions, x across and p upwards ('#' = sell).
# The boundary falls as the inventory grows.
problem, _, pol, _, _ = solved["OU"]
for j in range(200, -1, -20):
    print(f"p={problem.grid.p[j]:4.1f} " + "".join("#" if pol.trade[i, j] else "." for i in range(0, 201, 8)))
