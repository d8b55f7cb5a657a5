"""One-dimensional obstacle problems along a row of constant inventory.

Both solvers reduce to rows of the form

    min{ (beta - A) v,  a_j v_j - b_j v_{j-1} - r_j } = 0,   v_0 = 0,

where the second operator is the (possibly neighbour-dependent) obstacle:
``a = 1, b = 0, r = g`` for an intervention obstacle ``g``, or the binding
gradient constraint for the singular problem. Rows are relaxed by projected
SOR and then finished exactly by policy iteration on the active set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.linalg import solve_banded

TOP_FIXED = 0
TOP_EXTRAPOLATE = 1
TOP_ZERO_OR_OBSTACLE = 2
TOP_OBSTACLE = 3


@njit(cache=True)
def _psor(v, cdown, cdiag, cup, oa, ob, orhs, top_mode, omega, tol, max_sweeps):
    n = v.size - 1
    for sweep in range(max_sweeps):
        change = 0.0
        for j in range(1, n):
            gs = (cdown[j] * v[j - 1] + cup[j] * v[j + 1]) / cdiag[j]
            new = v[j] + omega * (gs - v[j])
            obst = (ob[j] * v[j - 1] + orhs[j]) / oa[j]
            if obst > new:
                new = obst
            d = abs(new - v[j])
            if d > change:
                change = d
            v[j] = new
        if top_mode != TOP_FIXED:
            new = (ob[n] * v[n - 1] + orhs[n]) / oa[n]
            if top_mode == TOP_EXTRAPOLATE:
                other = 2.0 * v[n - 1] - v[n - 2]
                if other > new:
                    new = other
            elif top_mode == TOP_ZERO_OR_OBSTACLE:
                if new < 0.0:
                    new = 0.0
            d = abs(new - v[n])
            if d > change:
                change = d
            v[n] = new
        if change <= tol:
            return sweep + 1
    return max_sweeps


@dataclass
class RowProblem:
    """Coefficients of one row; all arrays are indexed by node ``j = 0..n``."""

    cdown: np.ndarray
    cdiag: np.ndarray
    cup: np.ndarray
    oa: np.ndarray
    ob: np.ndarray
    orhs: np.ndarray
    top_mode: int
    top_value: float = 0.0

    @property
    def n(self) -> int:
        return self.cdiag.size - 1

    def candidates(self, v: np.ndarray):
        """Values implied at each node by the continuation and obstacle rows."""
        n = self.n
        cont = np.full(n + 1, -np.inf)
        cont[1:n] = (self.cdown[1:n] * v[: n - 1] + self.cup[1:n] * v[2:]) / self.cdiag[1:n]
        obst = np.full(n + 1, -np.inf)
        obst[1:] = (self.ob[1:] * v[:-1] + self.orhs[1:]) / self.oa[1:]
        if self.top_mode == TOP_FIXED:
            cont[n] = self.top_value
            obst[n] = -np.inf
        elif self.top_mode == TOP_EXTRAPOLATE:
            cont[n] = 2.0 * v[n - 1] - v[n - 2]
        elif self.top_mode == TOP_ZERO_OR_OBSTACLE:
            cont[n] = 0.0
        return cont, obst

    def residuals(self, v: np.ndarray):
        """Row residuals ``(continuation, obstacle)`` in the unscaled form."""
        n = self.n
        rc = np.zeros(n + 1)
        rc[1:n] = (
            self.cdiag[1:n] * v[1:n] - self.cdown[1:n] * v[: n - 1] - self.cup[1:n] * v[2:]
        )
        ro = np.zeros(n + 1)
        ro[1:] = self.oa[1:] * v[1:] - self.ob[1:] * v[:-1] - self.orhs[1:]
        return rc, ro

    def _solve_policy(self, active: np.ndarray) -> np.ndarray:
        n = self.n
        ab = np.zeros((4, n))  # unknowns v_1..v_n, bands (l=2, u=1)
        rhs = np.zeros(n)
        diag, upper, lower, lower2 = ab[1], ab[0], ab[2], ab[3]

        cont = ~active[1:n]
        diag[:-1] = np.where(cont, self.cdiag[1:n], self.oa[1:n])
        upper[1:] = np.where(cont, -self.cup[1:n], 0.0)
        lower[:-2] = np.where(cont[1:], -self.cdown[2:n], -self.ob[2:n])
        rhs[:-1] = np.where(cont, 0.0, self.orhs[1:n])

        if self.top_mode == TOP_FIXED or (not active[n] and self.top_mode == TOP_ZERO_OR_OBSTACLE):
            diag[-1] = 1.0
            rhs[-1] = self.top_value if self.top_mode == TOP_FIXED else 0.0
        elif active[n] or self.top_mode == TOP_OBSTACLE:
            diag[-1] = self.oa[n]
            lower[-2] = -self.ob[n]
            rhs[-1] = self.orhs[n]
        else:
            diag[-1] = 1.0
            lower[-2] = -2.0
            lower2[-3] = 1.0
        v = np.zeros(n + 1)
        v[1:] = solve_banded((2, 1), ab, rhs)
        return v

    def howard(self, v: np.ndarray, max_iter: int | None = None):
        """Policy iteration from the active set implied by ``v``; exact on return."""
        n = self.n
        max_iter = max_iter or n + 10
        cont, obst = self.candidates(v)
        active = obst > cont
        if self.top_mode == TOP_OBSTACLE:
            active[n] = True
        for it in range(1, max_iter + 1):
            v = self._solve_policy(active)
            cont, obst = self.candidates(v)
            scale = 1e-13 * (1.0 + np.abs(v))
            new = np.where(obst > cont + scale, True, np.where(cont > obst + scale, False, active))
            new[0] = False
            if self.top_mode == TOP_FIXED:
                new[n] = False
            elif self.top_mode == TOP_OBSTACLE:
                new[n] = True
            if np.array_equal(new, active):
                return v, it
            active = new
        return v, max_iter

    def psor(self, v: np.ndarray, omega: float, tol: float, max_sweeps: int) -> int:
        """Projected SOR sweeps in place; returns the number of sweeps used."""
        return int(_psor(
            v, self.cdown, self.cdiag, self.cup, self.oa, self.ob, self.orhs,
            self.top_mode, omega, tol, max_sweeps,
        ))

    def solve(self, v0: np.ndarray, omega: float, tol: float, max_sweeps: int):
        """Exact solve by policy iteration, certified by projected SOR sweeps.

        The sweeps must stop moving the iterate (sup-norm change ``<= tol``)
        within ``max_sweeps``; if they do not, policy iteration is restarted
        from the relaxed iterate once. Returns ``(v, sweeps, policy_iters, ok)``.
        """
        v = np.array(v0, dtype=float)
        v[0] = 0.0
        if self.top_mode == TOP_FIXED:
            v[-1] = self.top_value
        v, policy_iters = self.howard(v)
        sweeps = self.psor(v, omega, tol, max_sweeps)
        if sweeps > 1:
            v, more = self.howard(v)
            policy_iters += more
            extra = self.psor(v, omega, tol, max_sweeps)
            sweeps += extra
            return v, sweeps, policy_iters, extra < max_sweeps
        return v, sweeps, policy_iters, True
