"""Singular control without fixed cost.

Solves ``min{beta V - A V, gamma(p) V_p + V_x - p} = 0``. Selling moves the
state towards smaller ``x`` and ``p``, so the gradient constraint uses
backward differences in both directions. Written as a lower obstacle, the
binding constraint at node ``(i, j)`` reads

    V(i, j) = (c_j V(i, j-1) + V(i-1, j) / hx + p_j) / (c_j + 1 / hx),

with ``c_j = gamma(p_j) / hp``, a convex combination of the two backward
neighbours plus the revenue ``p_j / (c_j + 1/hx)`` of the shares sold on the
way. A row therefore only needs the row below it.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ._rows import TOP_EXTRAPOLATE, TOP_FIXED, TOP_OBSTACLE, RowProblem
from .grid import BoundaryRule, Closure, Grid2D, build_generator
from .impact import ImpactModel, liquidation_value, marginal_impact
from .impulse import NotConverged, SolveReport, check_omega
from .market import MarketModel


class DegenerateStencil(RuntimeError):
    pass


@dataclass(frozen=True)
class SingularProblem:
    model: MarketModel
    impact: ImpactModel
    grid: Grid2D


@dataclass
class SingularPolicy:
    trade: np.ndarray
    free_boundary: np.ndarray

    @property
    def region(self) -> np.ndarray:
        return np.where(self.trade, "trade", "continue")


def _coefficients(problem: SingularProblem):
    grid = problem.grid
    c = np.asarray(marginal_impact(problem.impact, grid.p), dtype=float) / grid.hp
    if not np.all(np.isfinite(c)):
        raise DegenerateStencil("marginal impact is not finite on the grid")
    return c


def directional_residual(values: np.ndarray, problem: SingularProblem, node=None):
    """``gamma(p) D_p^- V + D_x^- V - p`` with backward differences.

    Returns the value at ``node`` if given, else the full field (zero on the
    ``x = 0`` row and ``p = 0`` column).
    """
    grid = problem.grid
    gamma = np.asarray(marginal_impact(problem.impact, grid.p), dtype=float)
    if node is not None:
        i, j = node
        if i < 1 or j < 1:
            raise DegenerateStencil(f"node {node} has no backward neighbours")
        dp = (values[i, j] - values[i, j - 1]) / grid.hp
        dx = (values[i, j] - values[i - 1, j]) / grid.hx
        return float(gamma[j] * dp + dx - grid.p[j])
    out = np.zeros_like(values, dtype=float)
    dp = (values[1:, 1:] - values[1:, :-1]) / grid.hp
    dx = (values[1:, 1:] - values[:-1, 1:]) / grid.hx
    out[1:, 1:] = gamma[None, 1:] * dp + dx - grid.p[None, 1:]
    return out


def vi_residuals(values: np.ndarray, problem: SingularProblem):
    """``((beta - A) V, directional residual)`` on the full grid."""
    gen = build_generator(problem.model, problem.grid)
    pde = problem.model.beta * values - gen.apply(values)
    pde[0] = 0.0
    pde[:, [0, -1]] = 0.0
    return pde, directional_residual(values, problem)


def extract_free_boundary(policy_trade: np.ndarray, grid: Grid2D) -> np.ndarray:
    """Lowest continue-to-trade switch in every inventory column, as ``(x, p_star)`` rows.

    The switch is placed midway between the last continue node and the first
    trade node. Empty when either region is empty on the interior.
    """
    trade = np.asarray(policy_trade, dtype=bool)
    interior = trade[1:, 1:-1]
    if interior.all() or not interior.any():
        return np.empty((0, 2))
    points = []
    for i in range(1, grid.nx + 1):
        col = trade[i, 1:]
        hits = np.flatnonzero(col)
        if hits.size == 0:
            continue
        j = hits[0] + 1
        points.append((grid.x[i], grid.p[j] - 0.5 * grid.hp))
    return np.asarray(points, dtype=float).reshape(-1, 2)


def solve_singular(problem: SingularProblem, tol: float = 1e-7, max_iter: int = 200000,
                   omega: float = 1.5, tol_region: float | None = None):
    """Solve the singular-control VI; returns ``(values, policy, report)``.

    Rows are solved in increasing inventory. Each row is relaxed by projected
    SOR (at most ``max_iter`` sweeps, stopping at sup-norm change ``tol``) and
    finished exactly by policy iteration on the set where the constraint binds.
    """
    check_omega(omega)
    t0 = time.perf_counter()
    grid = problem.grid
    model = problem.model
    report = SolveReport()

    gen = build_generator(model, grid)
    cdiag = model.beta - gen.diag
    cdiag[0] = cdiag[-1] = 1.0
    c = _coefficients(problem)
    oa = c + 1.0 / grid.hx
    ob = c

    top_mode = {
        Closure.DIRICHLET_W: TOP_FIXED,
        Closure.EXTRAPOLATE: TOP_EXTRAPOLATE,
        Closure.INTERVENE: TOP_OBSTACLE,
    }[grid.closure]
    rule = BoundaryRule(grid.closure, grid, problem.impact)
    top = rule.top_values() if top_mode == TOP_FIXED else np.zeros(grid.nx + 1)

    x, p = grid.mesh()
    values = rule.apply(np.asarray(liquidation_value(problem.impact, x, p), dtype=float))
    change = 0.0
    for i in range(1, grid.nx + 1):
        orhs = values[i - 1] / grid.hx + grid.p
        row = RowProblem(gen.down, cdiag, gen.up, oa, ob, orhs, top_mode, float(top[i]))
        new, sweeps, pit, ok = row.solve(values[i], omega, tol, max_iter)
        if not ok:
            report.flags.append(f"row {i}: projected SOR did not settle")
        change = max(change, float(np.max(np.abs(new - values[i]))))
        values[i] = new
        report.iterations += sweeps
        report.policy_iterations += pit
    report.outer_stops = 1

    pde, slack = vi_residuals(values, problem)
    inner = (slice(1, None), slice(1, -1))
    scale = 1.0 + np.abs(values[inner])
    report.qvi_residual = float(np.max(np.abs(np.minimum(pde[inner], slack[inner])) / scale))
    report.residual = report.qvi_residual

    if tol_region is None:
        tol_region = 1e-5 * grid.p_max
    trade = slack <= tol_region
    trade[0, :] = False
    trade[:, 0] = False
    policy = SingularPolicy(trade=trade, free_boundary=extract_free_boundary(trade, grid))

    report.wall_time = time.perf_counter() - t0
    report.converged = report.qvi_residual <= max(tol, 1e-9)
    if not report.converged:
        raise NotConverged(
            f"singular solve left a VI residual of {report.qvi_residual:.3e}",
            report.qvi_residual, values, policy, report,
        )
    return values, policy, report
