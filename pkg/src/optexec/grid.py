"""Uniform state-space grid and the upwind discrete price generator."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .impact import ImpactModel, liquidation_value
from .market import MarketModel, generator_bands


class Closure(str, enum.Enum):
    """Rule for the truncation row ``p = p_max``.

    ``DIRICHLET_W`` pins the value to the immediate-liquidation value,
    ``EXTRAPOLATE`` imposes a zero second difference, and ``INTERVENE`` makes
    the top row trade-only: intervention value (or zero, if larger) for the
    impulse problem, binding gradient constraint for the singular problem.
    """

    DIRICHLET_W = "dirichlet_w"
    EXTRAPOLATE = "extrapolate"
    INTERVENE = "intervene"


@dataclass(frozen=True)
class Grid2D:
    x_max: float
    p_max: float
    nx: int
    n_p: int
    closure: Closure = Closure.INTERVENE

    def __post_init__(self):
        object.__setattr__(self, "closure", Closure(self.closure))
        if not (self.x_max > 0 and self.p_max > 0):
            raise ValueError("truncation bounds must be positive")
        if self.nx < 16 or self.n_p < 16:
            raise ValueError(f"need at least 16 cells per axis, got nx={self.nx}, np={self.n_p}")

    @classmethod
    def for_query(cls, x_query, p_query, nx=200, n_p=200, closure=Closure.INTERVENE):
        """Default truncation around a query point: ``2 x_query`` by ``5 p_query``."""
        return cls(2.0 * x_query, 5.0 * p_query, nx, n_p, closure)

    @property
    def hx(self) -> float:
        return self.x_max / self.nx

    @property
    def hp(self) -> float:
        return self.p_max / self.n_p

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.nx + 1) * self.hx

    @property
    def p(self) -> np.ndarray:
        return np.arange(self.n_p + 1) * self.hp

    @property
    def shape(self):
        return (self.nx + 1, self.n_p + 1)

    def mesh(self):
        return np.meshgrid(self.x, self.p, indexing="ij")

    def refined(self, factor: int = 2) -> "Grid2D":
        return Grid2D(self.x_max, self.p_max, self.nx * factor, self.n_p * factor, self.closure)

    def nearest(self, x, p):
        """Nearest-node indices, clipped to the grid."""
        i = np.clip(np.rint(np.asarray(x) / self.hx), 0, self.nx).astype(np.int64)
        j = np.clip(np.rint(np.asarray(p) / self.hp), 0, self.n_p).astype(np.int64)
        return i, j

    def index_of(self, x, p):
        """Indices of a point that must lie on the grid."""
        i, j = self.nearest(x, p)
        if not (np.isclose(i * self.hx, x) and np.isclose(j * self.hp, p)):
            raise ValueError(f"({x}, {p}) is not a grid node")
        return int(i), int(j)

    def interpolate(self, values: np.ndarray, x, p):
        """Bilinear interpolation of a node field at ``(x, p)``."""
        fx = np.clip(np.asarray(x, dtype=float) / self.hx, 0, self.nx)
        fp = np.clip(np.asarray(p, dtype=float) / self.hp, 0, self.n_p)
        i0 = np.minimum(np.floor(fx).astype(np.int64), self.nx - 1)
        j0 = np.minimum(np.floor(fp).astype(np.int64), self.n_p - 1)
        wx = fx - i0
        wp = fp - j0
        out = (
            (1 - wx) * (1 - wp) * values[i0, j0]
            + wx * (1 - wp) * values[i0 + 1, j0]
            + (1 - wx) * wp * values[i0, j0 + 1]
            + wx * wp * values[i0 + 1, j0 + 1]
        )
        return out[()] if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class DiscreteGenerator:
    """Per-node stencil of ``A`` along ``p``; zero rows at ``j = 0`` and ``j = n_p``."""

    down: np.ndarray
    diag: np.ndarray
    up: np.ndarray

    def apply(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        out = np.zeros_like(values)
        out[..., 1:-1] = (
            self.down[1:-1] * values[..., :-2]
            + self.diag[1:-1] * values[..., 1:-1]
            + self.up[1:-1] * values[..., 2:]
        )
        return out

    @property
    def monotone(self) -> bool:
        return bool(np.all(self.down >= 0) and np.all(self.up >= 0) and np.all(self.diag <= 0))


def build_generator(model: MarketModel, grid: Grid2D) -> DiscreteGenerator:
    """Second differences for diffusion, drift upwinded by its sign."""
    down, diag, up = (np.zeros(grid.n_p + 1) for _ in range(3))
    down[1:-1], diag[1:-1], up[1:-1] = generator_bands(model, grid.p)
    return DiscreteGenerator(down, diag, up)


@dataclass(frozen=True)
class BoundaryRule:
    policy: Closure
    grid: Grid2D
    impact: ImpactModel | None = field(default=None)

    def top_values(self) -> np.ndarray:
        """Dirichlet data along ``p = p_max`` (only for ``DIRICHLET_W``)."""
        if self.policy is not Closure.DIRICHLET_W:
            raise ValueError(f"{self.policy.value} closure has no fixed top values")
        if self.impact is None:
            raise ValueError("DIRICHLET_W closure needs an impact model")
        out = np.asarray(liquidation_value(self.impact, self.grid.x, self.grid.p_max), dtype=float)
        out[0] = 0.0
        return out

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Enforce the zero edges and the top closure on a copy of ``values``.

        ``INTERVENE`` depends on the solver and is left untouched here.
        """
        v = np.array(values, dtype=float)
        v[0, :] = 0.0
        v[:, 0] = 0.0
        if self.policy is Closure.DIRICHLET_W:
            v[:, -1] = self.top_values()
        elif self.policy is Closure.EXTRAPOLATE:
            v[1:, -1] = 2.0 * v[1:, -2] - v[1:, -3]
        return v


def upper_boundary_closure(grid: Grid2D, policy=None, impact: ImpactModel | None = None) -> BoundaryRule:
    return BoundaryRule(Closure(policy or grid.closure), grid, impact)
