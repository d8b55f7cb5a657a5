"""Closed-form reference values used to validate the solvers."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .impact import ImpactKind, ImpactModel
from .market import InvalidModel, MarketModel, ProcessKind, PsiFunction


class Validity(str, enum.Enum):
    EXACT = "exact"
    CONDITIONS_NOT_MET = "conditions_not_met"


@dataclass(frozen=True)
class OracleResult:
    value: float
    validity: Validity
    condition_note: str = ""

    @property
    def exact(self) -> bool:
        return self.validity is Validity.EXACT


def no_impact_value(model: MarketModel, y, k: float) -> OracleResult:
    """Value of selling without impact, ``sup_tau E[exp(-beta tau) (x P_tau - k)^+]``.

    Known in closed form only for GBM with ``beta > mu`` and ``k = 0``, where
    ``exp(-beta t) P_t`` is a supermartingale and selling at once is optimal.
    """
    x, p = y
    if k < 0:
        raise ValueError("transaction cost must be non-negative")
    if x == 0:
        return OracleResult(0.0, Validity.EXACT, "no shares")
    if model.kind is ProcessKind.GBM and k == 0:
        return OracleResult(float(x * p), Validity.EXACT, "GBM with beta > mu and k = 0")
    return OracleResult(
        float("nan"),
        Validity.CONDITIONS_NOT_MET,
        "no closed form; solve numerically with impact kind 'none'",
    )


def discounted_rate_integral(rate: float, horizon: float) -> float:
    """``int_0^horizon exp(rate t) dt`` with a series branch near ``rate = 0``."""
    z = rate * horizon
    if abs(z) < 1e-6:
        return horizon * (1.0 + z / 2.0 + z * z / 6.0)
    return math.expm1(z) / rate


def constant_rate_revenue(model: MarketModel, im: ImpactModel, y, u: float) -> float:
    """Expected discounted revenue of selling at constant speed ``u`` (GBM, exponential impact)."""
    if model.kind is not ProcessKind.GBM or im.kind is not ImpactKind.EXPONENTIAL:
        raise InvalidModel("constant-rate closed form needs GBM prices and exponential impact")
    if not u > 0:
        raise InvalidModel(f"selling rate must be positive, got {u}")
    x, p = y
    if x < 0 or p < 0:
        raise InvalidModel("state must be non-negative")
    if x == 0:
        return 0.0
    rate = model.mu - im.lam * u - model.beta
    return p * u * discounted_rate_integral(rate, x / u)


def growth_bound(psi: PsiFunction, C: float, y):
    """Upper-bound certificate ``C x psi(p)`` for the no-impact value."""
    if not C > 0:
        raise ValueError("C must be positive")
    x, p = y
    return C * np.asarray(x, dtype=float) * psi(p)
