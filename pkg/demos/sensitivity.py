"""How the value at (5, 2) reacts to the market parameters.

Runs the bundled sweep configurations through the same path the command
line uses, so each table matches what `optexec --config configs/fig3_*.ini`
writes to sweep.csv.
"""

# %%
from pathlib import Path

from optexec.cli import solve
from optexec.config import load_config

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def sweep(name):
    cfg = load_config(CONFIGS / f"{name}.ini")
    key, values = cfg.sweep()
    print(f"\n{name}: {key}")
    for v in values:
        point = cfg.with_value(key, v)
        problem, values_, _, report, ok = solve(point)
        print(f"  {v:8.3g}  V = {problem.grid.interpolate(values_, *point.probe):8.4f}"
              + ("" if ok else "  (not converged)"))


# %% arithmetic prices: stronger impact and heavier discounting both hurt,
# more drift helps, and volatility has a sweet spot
for name in ("fig3_lambda", "fig3_beta", "fig3_mu", "fig3_sigma"):
    sweep(name)

# %% mean-reverting prices: a faster pull towards a mean above the current
# price makes waiting more valuable
for name in ("fig5_alpha", "fig5_mean"):
    sweep(name)
