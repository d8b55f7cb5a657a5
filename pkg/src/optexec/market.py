"""Unperturbed price processes and the increasing solution of ``A u = beta u``.

Three families are supported, all written as ``dP = mu(P) dt + sigma(P) dB``:

* ``GBM``: ``mu(p) = mu * p``, ``sigma(p) = sigma * p``
* ``ABM``: ``mu(p) = mu``, ``sigma(p) = sigma``
* ``OU``:  ``mu(p) = rate * (mean - p)``, ``sigma(p) = sigma``

Prices are absorbed at zero.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


class ProcessKind(str, enum.Enum):
    GBM = "gbm"
    ABM = "abm"
    OU = "ou"


class BoundaryClass(str, enum.Enum):
    ABSORBING = "absorbing"
    NATURAL = "natural"


class InvalidModel(ValueError):
    """Raised for parameter combinations outside a model's domain."""


class NoIncreasingRoot(InvalidModel):
    pass


@dataclass(frozen=True)
class MarketModel:
    kind: ProcessKind
    mu: float = 0.0
    sigma: float = 1.0
    beta: float = 1.0
    ou_rate: float = 0.0
    ou_mean: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ProcessKind(self.kind))
        if not self.beta > 0:
            raise InvalidModel(f"beta must be positive, got {self.beta}")
        if not self.sigma > 0:
            raise InvalidModel(f"sigma must be positive, got {self.sigma}")
        if self.kind is ProcessKind.GBM and self.beta <= self.mu:
            raise InvalidModel(
                f"GBM value is infinite unless beta > mu (beta={self.beta}, mu={self.mu})"
            )
        if self.kind is ProcessKind.OU:
            if not self.ou_rate > 0:
                raise InvalidModel(f"OU rate must be positive, got {self.ou_rate}")
            if self.ou_mean < 0:
                raise InvalidModel(f"OU mean must be non-negative, got {self.ou_mean}")

    @classmethod
    def gbm(cls, mu, sigma, beta):
        return cls(ProcessKind.GBM, mu=mu, sigma=sigma, beta=beta)

    @classmethod
    def abm(cls, mu, sigma, beta):
        return cls(ProcessKind.ABM, mu=mu, sigma=sigma, beta=beta)

    @classmethod
    def ou(cls, rate, mean, sigma, beta):
        return cls(ProcessKind.OU, sigma=sigma, beta=beta, ou_rate=rate, ou_mean=mean)

    def drift(self, p):
        return drift(self, p)

    def volatility(self, p):
        return volatility(self, p)

    def supermartingale_shift(self) -> float:
        """Smallest ``c >= 0`` making ``exp(-beta t) (P_t + c)`` a supermartingale.

        Gives the certified bound ``sup_tau E[exp(-beta tau) P_tau] <= p + c``.
        """
        if self.kind is ProcessKind.GBM:
            return 0.0
        if self.kind is ProcessKind.ABM:
            return max(self.mu, 0.0) / self.beta
        return self.ou_rate * self.ou_mean / self.beta


def drift(model: MarketModel, p):
    p = np.asarray(p, dtype=float)
    if model.kind is ProcessKind.GBM:
        out = model.mu * p
    elif model.kind is ProcessKind.ABM:
        out = np.full_like(p, model.mu)
    else:
        out = model.ou_rate * (model.ou_mean - p)
    return out[()] if out.ndim == 0 else out


def volatility(model: MarketModel, p):
    p = np.asarray(p, dtype=float)
    if model.kind is ProcessKind.GBM:
        out = model.sigma * p
    else:
        out = np.full_like(p, model.sigma)
    return out[()] if out.ndim == 0 else out


def boundary_class(model: MarketModel) -> BoundaryClass:
    if model.kind is ProcessKind.GBM:
        return BoundaryClass.NATURAL
    return BoundaryClass.ABSORBING


def gbm_exponent(mu: float, sigma: float, beta: float) -> float:
    """Root ``nu > 1`` of ``sigma^2 nu (nu - 1) / 2 + mu nu - beta = 0``."""
    a = 0.5 * sigma**2
    b = mu - a
    disc = b * b + 4.0 * a * beta
    nu = (-b + math.sqrt(disc)) / (2.0 * a)
    # the quadratic is mu - beta at nu = 1, so a root above 1 needs beta > mu
    if not (mu - beta < 0 and nu > 1.0):
        raise NoIncreasingRoot(f"no root above 1 (mu={mu}, beta={beta})")
    return nu


class PsiKind(str, enum.Enum):
    POWER_LAW = "power_law"
    NUMERIC = "numeric"


@dataclass(frozen=True)
class PsiFunction:
    """Increasing solution of ``A psi = beta psi``, unique up to a positive factor.

    ``POWER_LAW`` is ``p**exponent`` (unnormalised). ``NUMERIC`` holds a table on
    ``p`` normalised to one at the midpoint of the requested grid and is
    linearly interpolated in between.
    """

    kind: PsiKind
    exponent: float = float("nan")
    p: np.ndarray | None = None
    values: np.ndarray | None = None

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        if self.kind is PsiKind.POWER_LAW:
            out = np.power(p, self.exponent)
        else:
            out = np.interp(p, self.p, self.values)
        return out[()] if out.ndim == 0 else out


def generator_bands(model: MarketModel, nodes: np.ndarray):
    """Upwind three-point coefficients of ``A`` at the interior of ``nodes``.

    Returns ``(down, diag, up)`` arrays of length ``len(nodes) - 2`` such that
    ``(A u)_j = down u_{j-1} + diag u_j + up u_{j+1}``. Works on non-uniform
    nodes; off-diagonals are non-negative.
    """
    nodes = np.asarray(nodes, dtype=float)
    hm = nodes[1:-1] - nodes[:-2]
    hp = nodes[2:] - nodes[1:-1]
    pj = nodes[1:-1]
    mu = np.asarray(drift(model, pj), dtype=float)
    s2 = np.asarray(volatility(model, pj), dtype=float) ** 2
    diff_down = s2 / (hm * (hm + hp))
    diff_up = s2 / (hp * (hm + hp))
    down = diff_down + np.maximum(-mu, 0.0) / hm
    up = diff_up + np.maximum(mu, 0.0) / hp
    return down, -(down + up), up


def psi(model: MarketModel, p_grid, refine: int = 1) -> PsiFunction:
    """Increasing eigenfunction of the generator for ``model``.

    GBM gives the closed-form power law. ABM and OU use the solution of the
    upwind discrete equation with ``u(0) = 0`` (absorption at zero), on a mesh
    that contains ``p_grid`` and is ``refine`` times finer between its points.
    """
    p_grid = np.asarray(p_grid, dtype=float)
    if p_grid.ndim != 1 or p_grid.size < 2:
        raise ValueError("p_grid must be a 1-d array with at least two points")
    if np.any(np.diff(p_grid) <= 0) or p_grid[0] <= 0:
        raise ValueError("p_grid must be strictly increasing and positive")

    if model.kind is ProcessKind.GBM:
        return PsiFunction(PsiKind.POWER_LAW, exponent=gbm_exponent(model.mu, model.sigma, model.beta))

    knots = np.concatenate([[0.0], p_grid])
    pieces = [np.linspace(a, b, refine + 1)[:-1] for a, b in zip(knots[:-1], knots[1:])]
    nodes = np.concatenate(pieces + [knots[-1:]])

    down, diag, up = generator_bands(model, nodes)
    # (beta - A) u = 0 with u(0) = 0 fixes u up to scale. March upwards from
    # u_1 = 1: each step gives u_{j+1} - u_j = (beta u_j + down_j (u_j - u_{j-1})) / up_j,
    # so the iterate stays positive and increasing. The increasing mode
    # dominates going up, which keeps the recurrence stable; rescale to avoid
    # overflow (OU grows like exp(rate (p - mean)^2 / sigma^2)).
    u = np.zeros(nodes.size)
    u[1] = 1.0
    for j in range(1, nodes.size - 1):
        k = j - 1
        u[j + 1] = u[j] + (model.beta * u[j] + down[k] * (u[j] - u[j - 1])) / up[k]
        if u[j + 1] > 1e250:
            u[: j + 2] *= 1e-250
    values = u[(np.arange(p_grid.size) + 1) * refine]
    p_ref = 0.5 * (p_grid[0] + p_grid[-1])
    scale = np.interp(p_ref, p_grid, values)
    with np.errstate(over="ignore"):
        values = values / scale
    return PsiFunction(PsiKind.NUMERIC, p=p_grid.copy(), values=values)
