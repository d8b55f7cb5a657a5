"""Optimal execution under permanent price impact: impulse and singular control solvers."""

__version__ = "0.1.0"

from .analytic import constant_rate_revenue, discounted_rate_integral, growth_bound, no_impact_value
from .grid import Closure, Grid2D, build_generator, upper_boundary_closure
from .impact import ImpactModel, liquidation_value, marginal_impact, post_trade_price
from .impulse import ImpulseProblem, NotConverged, immediate_trades, solve_impulse
from .market import MarketModel, psi
from .montecarlo import SimConfig, simulate_constant_rate, simulate_impulse, simulate_singular_boundary
from .singular import SingularProblem, solve_singular
