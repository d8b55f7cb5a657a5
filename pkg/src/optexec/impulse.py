"""Impulse control with fixed cost: iterated optimal stopping on the grid.

The value solves ``min{beta V - A V, V - M V} = 0`` with the intervention
operator ``M V(x, p) = max_zeta V(x - zeta, alpha(zeta, p)) + zeta alpha(zeta, p) - k``.
Trade sizes run over the ladder ``zeta = m * hx``, so a trade from row ``i``
lands on row ``i - m`` exactly and only the price needs interpolating.

Since every non-zero trade lands on a lower row, the obstacle of row ``i``
is final once the rows below are solved. Each outer pass therefore sweeps the
rows in increasing inventory, solving the row's optimal stopping problem
against the intervention obstacle built from the current iterate.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._rows import TOP_EXTRAPOLATE, TOP_FIXED, TOP_ZERO_OR_OBSTACLE, RowProblem
from .grid import BoundaryRule, Closure, Grid2D, build_generator
from .impact import ImpactModel, liquidation_value, post_trade_price
from .market import MarketModel


class NotConverged(RuntimeError):
    """Iteration budget exhausted; carries the last iterate."""

    def __init__(self, message, residual, values, policy=None, report=None):
        super().__init__(message)
        self.residual = residual
        self.values = values
        self.policy = policy
        self.report = report


class InvalidRelaxation(ValueError):
    pass


def check_omega(omega: float) -> None:
    if not 0.0 < omega < 2.0:
        raise InvalidRelaxation(f"relaxation factor must lie in (0, 2), got {omega}")


@dataclass(frozen=True)
class ImpulseProblem:
    model: MarketModel
    impact: ImpactModel
    k: float
    grid: Grid2D

    def __post_init__(self):
        if self.k < 0:
            raise ValueError(f"fixed cost must be non-negative, got {self.k}")


@dataclass
class ImpulsePolicy:
    zeta_star: np.ndarray
    trade: np.ndarray

    @property
    def region(self) -> np.ndarray:
        return np.where(self.trade, "trade", "continue")


@dataclass
class SolveReport:
    iterations: int = 0
    outer_stops: int = 0
    residual: float = float("inf")
    wall_time: float = 0.0
    policy_iterations: int = 0
    qvi_residual: float = float("nan")
    converged: bool = False
    flags: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "outer_stops": self.outer_stops,
            "residual": self.residual,
            "wall_time": self.wall_time,
            "policy_iterations": self.policy_iterations,
            "qvi_residual": self.qvi_residual,
            "converged": self.converged,
            "flags": list(self.flags),
        }


class TradeLadder:
    """Precomputed landing points of every ladder trade from every price node.

    For ladder step ``m`` the trade is ``zeta = m hx`` and lands at price
    ``alpha(zeta, p_j)``, which falls between nodes ``lo[m, j]`` and
    ``lo[m, j] + 1`` with weight ``w[m, j]`` on the upper node.
    """

    def __init__(self, grid: Grid2D, impact: ImpactModel):
        self.grid = grid
        m = np.arange(grid.nx + 1)[:, None]
        zeta = m * grid.hx
        landing = np.asarray(post_trade_price(impact, zeta, grid.p[None, :]), dtype=float)
        landing = np.broadcast_to(landing, (grid.nx + 1, grid.n_p + 1))
        f = np.clip(landing / grid.hp, 0.0, grid.n_p)
        lo = np.minimum(np.floor(f).astype(np.int64), grid.n_p - 1)
        self.lo = lo
        self.w = f - lo
        self.revenue = zeta * landing

    def candidates(self, values: np.ndarray, i: int, k: float) -> np.ndarray:
        """Values of all non-zero ladder trades from row ``i``; shape ``(i, n_p + 1)``."""
        ms = np.arange(1, i + 1)
        rows = (i - ms)[:, None]
        lo = self.lo[ms]
        w = self.w[ms]
        landed = (1.0 - w) * values[rows, lo] + w * values[rows, lo + 1]
        return landed + self.revenue[ms] - k

    def best(self, values: np.ndarray, i: int, k: float, tie_tol: float = 1e-12):
        """Best non-zero trade from row ``i``: value and smallest maximising size."""
        if i == 0:
            n = values.shape[1]
            return np.full(n, -np.inf), np.zeros(n)
        cand = self.candidates(values, i, k)
        top = cand.max(axis=0)
        hit = cand >= top - tie_tol * (1.0 + np.abs(top))
        m_star = np.argmax(hit, axis=0) + 1
        return top, m_star * self.grid.hx


def intervention_operator(phi: np.ndarray, problem: ImpulseProblem, node, ladder: TradeLadder | None = None):
    """``M phi`` at one node over the full ladder ``{0, hx, ..., x_i}``.

    Returns ``(value, zeta_star)`` with the smallest maximising trade size.
    """
    i, j = node
    ladder = ladder or TradeLadder(problem.grid, problem.impact)
    stay = phi[i, j] - problem.k
    if i == 0:
        return float(stay), 0.0
    cand = ladder.candidates(phi, i, problem.k)[:, j]
    values = np.concatenate([[stay], cand])
    top = values.max()
    m = int(np.argmax(values >= top - 1e-12 * (1.0 + abs(top))))
    return float(top), m * problem.grid.hx


def _row_template(problem: ImpulseProblem):
    grid = problem.grid
    gen = build_generator(problem.model, grid)
    n = grid.n_p
    cdiag = problem.model.beta - gen.diag
    cdiag[0] = cdiag[-1] = 1.0
    oa = np.ones(n + 1)
    ob = np.zeros(n + 1)
    return gen, gen.down, cdiag, gen.up, oa, ob


def _top_mode(closure: Closure) -> int:
    return {
        Closure.DIRICHLET_W: TOP_FIXED,
        Closure.EXTRAPOLATE: TOP_EXTRAPOLATE,
        Closure.INTERVENE: TOP_ZERO_OR_OBSTACLE,
    }[closure]


def qvi_residuals(values: np.ndarray, problem: ImpulseProblem, ladder: TradeLadder | None = None):
    """Both factors of the discrete QVI at every node.

    Returns ``(pde, intervention)`` where ``pde = (beta - A) V`` and
    ``intervention = V - M V`` (the ladder includes ``zeta = 0``). Entries on
    the boundary rows and the top closure row are zero.
    """
    grid = problem.grid
    ladder = ladder or TradeLadder(grid, problem.impact)
    gen = build_generator(problem.model, grid)
    pde = problem.model.beta * values - gen.apply(values)
    gap = np.zeros_like(values)
    for i in range(1, grid.nx + 1):
        best, _ = ladder.best(values, i, problem.k)
        mv = np.maximum(values[i] - problem.k, best)
        gap[i] = values[i] - mv
    pde[0] = 0.0
    gap[0] = 0.0
    pde[:, [0, -1]] = 0.0
    gap[:, [0, -1]] = 0.0
    return pde, gap


def extract_regions(values: np.ndarray, problem: ImpulseProblem, tol_region: float | None = None,
                    ladder: TradeLadder | None = None) -> ImpulsePolicy:
    """Trade where the best non-zero trade attains the value within ``tol_region``."""
    grid = problem.grid
    ladder = ladder or TradeLadder(grid, problem.impact)
    if tol_region is None:
        tol_region = 1e-9 * (1.0 + float(np.max(np.abs(values))))
    zeta = np.zeros(grid.shape)
    trade = np.zeros(grid.shape, dtype=bool)
    for i in range(1, grid.nx + 1):
        best, z = ladder.best(values, i, problem.k)
        hit = best >= values[i] - tol_region
        hit[0] = False
        trade[i] = hit
        zeta[i] = np.where(hit, z, 0.0)
    return ImpulsePolicy(zeta_star=zeta, trade=trade)


def solve_impulse(problem: ImpulseProblem, tol: float = 1e-7, max_outer: int = 50,
                  max_inner: int = 20000, omega: float = 1.5, tol_region: float | None = None):
    """Solve the impulse QVI; returns ``(values, policy, report)``.

    Each row is relaxed by projected SOR (``omega``, ``max_inner`` sweeps,
    stopping at sup-norm change ``tol``) and then finished exactly by policy
    iteration on its active set. Outer passes stop when a full pass changes
    the field by at most ``tol``.
    """
    check_omega(omega)
    t0 = time.perf_counter()
    grid = problem.grid
    report = SolveReport()
    if problem.k == 0:
        report.flags.append("k = 0: uniqueness not guaranteed; prefer the singular solver")
        warnings.warn("impulse solve with k = 0 has no uniqueness guarantee", stacklevel=2)

    ladder = TradeLadder(grid, problem.impact)
    gen, cdown, cdiag, cup, oa, ob = _row_template(problem)
    top_mode = _top_mode(grid.closure)
    rule = BoundaryRule(grid.closure, grid, problem.impact)
    top = rule.top_values() if top_mode == TOP_FIXED else np.zeros(grid.nx + 1)

    x, p = grid.mesh()
    values = np.asarray(liquidation_value(problem.impact, x, p), dtype=float)
    values = rule.apply(values)

    change = np.inf
    for outer in range(1, max_outer + 1):
        previous = values.copy()
        for i in range(1, grid.nx + 1):
            best, _ = ladder.best(values, i, problem.k)
            row = RowProblem(cdown, cdiag, cup, oa, ob, best, top_mode, float(top[i]))
            values[i], sweeps, pit, ok = row.solve(values[i], omega, tol, max_inner)
            if not ok:
                report.flags.append(f"row {i}: projected SOR did not settle")
            report.iterations += sweeps
            report.policy_iterations += pit
        change = float(np.max(np.abs(values - previous)))
        report.outer_stops = outer
        if change <= tol:
            break

    report.residual = change
    pde, gap = qvi_residuals(values, problem, ladder)
    inner = (slice(1, None), slice(1, -1))
    scale = 1.0 + np.abs(values[inner])
    report.qvi_residual = float(np.max(np.abs(np.minimum(pde[inner], gap[inner])) / scale))
    policy = extract_regions(values, problem, tol_region, ladder)
    report.wall_time = time.perf_counter() - t0
    report.converged = change <= tol
    if not report.converged:
        raise NotConverged(
            f"impulse solve stopped after {max_outer} passes with change {change:.3e}",
            change, values, policy, report,
        )
    return values, policy, report


def immediate_trades(problem: ImpulseProblem, policy: ImpulsePolicy, y0, max_trades: int | None = None):
    """Trades executed at time zero from ``y0`` under nearest-node lookup.

    Returns a list of ``(x, p, zeta)`` before each trade; the state after the
    last one lies in the continuation region (or has no shares left).
    """
    grid = problem.grid
    x, p = (float(v) for v in y0)
    max_trades = max_trades or grid.nx + 1
    out = []
    for _ in range(max_trades):
        i, j = grid.nearest(x, p)
        if x <= 0 or not policy.trade[i, j]:
            break
        zeta = min(float(policy.zeta_star[i, j]), x)
        out.append((x, p, zeta))
        p = float(post_trade_price(problem.impact, zeta, p))
        x = max(x - zeta, 0.0)
    return out
