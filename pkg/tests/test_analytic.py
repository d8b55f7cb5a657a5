import math

import numpy as np
import pytest

from optexec.analytic import (
    Validity, constant_rate_revenue, discounted_rate_integral, growth_bound, no_impact_value,
)
from optexec.impact import ImpactModel, liquidation_value
from optexec.market import InvalidModel, MarketModel, psi

GBM = MarketModel.gbm(2, 1, 4)
EXP = ImpactModel.exponential(0.5)
W52 = 4 * (1 - math.exp(-2.5))


def test_no_impact_value():
    r = no_impact_value(GBM, (5, 2), 0.0)
    assert r.validity is Validity.EXACT and r.value == 10.0
    assert no_impact_value(GBM, (0, 3), 0.0).value == 0.0
    r = no_impact_value(MarketModel.abm(4, 0.5, 1), (5, 2), 0.0)
    assert r.validity is Validity.CONDITIONS_NOT_MET and math.isnan(r.value)
    assert not no_impact_value(GBM, (5, 2), 0.1).exact


def test_constant_rate_u1():
    v = constant_rate_revenue(GBM, EXP, (5, 2), 1.0)
    assert v == pytest.approx(0.8 * (1 - math.exp(-12.5)), rel=1e-14)
    assert abs(v - 0.7999970) <= 1e-6


def test_constant_rate_large_u_tends_to_w():
    assert abs(constant_rate_revenue(GBM, EXP, (5, 2), 1e6) - W52) <= 1e-3


def test_constant_rate_ladder_monotone():
    us = 2.0 ** np.arange(21)
    vals = np.array([constant_rate_revenue(GBM, EXP, (5, 2), u) for u in us])
    assert np.all(np.diff(vals) > 0)
    assert np.all(vals < W52)
    # O(1/u) approach: the scaled gap settles
    gap_u = (W52 - vals[-3:]) * us[-3:]
    assert np.ptp(gap_u) < 1e-3 * gap_u[-1]


def test_constant_rate_zero_inventory():
    assert constant_rate_revenue(GBM, EXP, (0.0, 2.0), 3.0) == 0.0
    assert constant_rate_revenue(GBM, EXP, (1e-12, 2.0), 3.0) == pytest.approx(2e-12, rel=1e-6)


def test_constant_rate_preconditions():
    with pytest.raises(InvalidModel):
        constant_rate_revenue(MarketModel.abm(1, 1, 1), EXP, (5, 2), 1.0)
    with pytest.raises(InvalidModel):
        constant_rate_revenue(GBM, ImpactModel.linear(0.5), (5, 2), 1.0)
    with pytest.raises(InvalidModel):
        constant_rate_revenue(GBM, EXP, (5, 2), 0.0)


def test_removable_singularity():
    horizon = 5.0
    assert discounted_rate_integral(0.0, horizon) == horizon
    lo, hi = discounted_rate_integral(-1e-8, horizon), discounted_rate_integral(1e-8, horizon)
    assert lo == pytest.approx(hi, rel=1e-6)
    assert lo == pytest.approx(horizon, rel=1e-6)
    # both branches agree where they meet
    z = 1e-6 / horizon
    assert discounted_rate_integral(z * 0.999, horizon) == pytest.approx(
        math.expm1(z * 0.999 * horizon) / (z * 0.999), rel=1e-12)


def test_growth_bound():
    f = psi(GBM, np.linspace(0.1, 10, 10))
    assert growth_bound(f, 1.0, (0.0, 2.0)) == 0.0
    assert growth_bound(f, 1.0, (5.0, 2.0)) == pytest.approx(5 * 2 ** ((-3 + math.sqrt(41)) / 2), rel=1e-12)
    assert growth_bound(f, 1.0, (5.0, 2.0)) == pytest.approx(16.2626, abs=1e-4)
    p = np.linspace(0.1, 10, 50)
    assert np.all(np.diff(growth_bound(f, 1.0, (5.0, p))) > 0)
    with pytest.raises(ValueError):
        growth_bound(f, 0.0, (1.0, 1.0))


def test_constant_rate_below_w_on_grid():
    for x in (0.5, 2.0, 5.0):
        for p in (0.5, 2.0, 8.0):
            assert constant_rate_revenue(GBM, EXP, (x, p), 50.0) <= liquidation_value(EXP, x, p)
