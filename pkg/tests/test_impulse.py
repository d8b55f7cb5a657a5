import numpy as np
import pytest

from conftest import EXP, FIG1, grid, impulse
from optexec.impact import ImpactModel, liquidation_value, post_trade_price
from optexec.impulse import (
    ImpulseProblem, InvalidRelaxation, NotConverged, TradeLadder, extract_regions,
    immediate_trades, intervention_operator, qvi_residuals, solve_impulse,
)

TOL = 1e-5


def w_field(g, im=EXP):
    x, p = g.mesh()
    return np.asarray(liquidation_value(im, x, p))


def test_intervention_on_w_recovers_w():
    g = grid(50)
    prob = ImpulseProblem(FIG1, EXP, 0.0, g)
    w = w_field(g)
    lad = TradeLadder(g, EXP)
    for i, j in [(10, 10), (25, 4), (50, 30)]:
        val, _ = intervention_operator(w, prob, (i, j), lad)
        assert val == pytest.approx(w[i, j])
        best, _ = lad.best(w, i, 0.0)
        assert best[j] <= w[i, j] + 1e-12
        assert best[j] == pytest.approx(w[i, j], rel=0.05)


def test_intervention_at_zero_inventory():
    g = grid(20)
    phi = np.random.default_rng(0).random(g.shape)
    val, z = intervention_operator(phi, ImpulseProblem(FIG1, EXP, 0.3, g), (0, 7))
    assert val == pytest.approx(phi[0, 7] - 0.3) and z == 0.0


def test_intervention_zero_field_large_k_brute_force():
    g = grid(20)
    k = g.x_max * g.p_max
    prob = ImpulseProblem(FIG1, EXP, k, g)
    i, j = 12, 9
    zetas = np.arange(i + 1) * g.hx
    cand = zetas * post_trade_price(EXP, zetas, g.p[j]) - k
    val, z = intervention_operator(np.zeros(g.shape), prob, (i, j))
    assert val == pytest.approx(cand.max()) and val <= 0
    assert z == zetas[np.argmax(cand >= cand.max() - 1e-12 * (1 + abs(cand.max())))]
    # at p = 0 every candidate is -k and the smallest size wins
    assert intervention_operator(np.zeros(g.shape), prob, (i, 0)) == (-k, 0.0)


def test_special_case_matches_w(special_impulse):
    prob, v, pol, rep = special_impulse
    w = w_field(prob.grid)
    err = np.max(np.abs(v[1:, 1:-1] - w[1:, 1:-1]) / w[1:, 1:-1])
    assert err <= 0.02
    assert pol.trade[1:, 1:].all()
    assert "uniqueness" in rep.flags[0]


def test_k_zero_warns():
    prob = ImpulseProblem(FIG1, EXP, 0.0, grid(16))
    with pytest.warns(UserWarning, match="uniqueness"):
        solve_impulse(prob)


def test_no_impact_value():
    prob, v, *_ = impulse(impact=ImpactModel.none(), k=0.0)
    assert prob.grid.interpolate(v, 5, 2) == pytest.approx(10.0, rel=0.02)


def test_fig1_three_trades(fig1):
    prob, v, pol, rep = fig1
    trades = immediate_trades(prob, pol, (5, 2))
    assert len(trades) == 3
    x, p, z = trades[-1]
    i, j = prob.grid.nearest(x - z, float(post_trade_price(EXP, z, p)))
    assert not pol.trade[i, j]


def test_fig1_policy_shape(fig1):
    prob, v, pol, rep = fig1
    x, _ = prob.grid.mesh()
    assert np.all(pol.zeta_star >= 0) and np.all(pol.zeta_star <= x + 1e-12)
    assert np.all(pol.zeta_star[~pol.trade] == 0)
    assert pol.trade.any() and (~pol.trade[1:, 1:-1]).any()
    assert not pol.trade[0].any()
    assert set(np.unique(pol.region)) == {"trade", "continue"}


def test_fig1_qvi_residual(fig1):
    prob, v, pol, rep = fig1
    pde, gap = qvi_residuals(v, prob)
    s = TOL * (1 + np.abs(v))
    inner = (slice(1, None), slice(1, -1))
    assert np.all(pde[inner] >= -s[inner]) and np.all(gap[inner] >= -s[inner])
    assert np.all(np.abs(np.minimum(pde, gap))[inner] <= s[inner])
    assert rep.converged and rep.qvi_residual < TOL


def test_fig1_monotone_in_state(fig1):
    _, v, *_ = fig1
    assert np.all(v >= 0)
    assert np.all(np.diff(v, axis=0) >= -1e-9)
    assert np.all(np.diff(v, axis=1) >= -1e-9)


def test_monotone_in_k(fig1):
    _, v2, *_ = fig1
    _, v4, *_ = impulse(k=0.4)
    assert np.all(v4 <= v2 + 1e-9)


def test_huge_k_never_trades():
    prob, v, pol, _ = impulse(k=1e3, n=40)
    assert not pol.trade.any()
    assert np.all(v == 0)


@pytest.mark.parametrize("closure", ["dirichlet_w", "extrapolate"])
def test_other_closures_converge(closure):
    prob, v, pol, rep = impulse(n=100, closure=closure)
    assert rep.converged
    assert len(immediate_trades(prob, pol, (5, 2))) == 3


def test_invalid_relaxation():
    with pytest.raises(InvalidRelaxation):
        solve_impulse(ImpulseProblem(FIG1, EXP, 0.2, grid(16)), omega=2.0)


def test_not_converged_carries_iterate():
    with pytest.raises(NotConverged) as info:
        solve_impulse(ImpulseProblem(FIG1, EXP, 0.2, grid(16)), max_outer=1)
    assert info.value.values.shape == (17, 17)
    assert info.value.report.outer_stops == 1


def test_negative_k_rejected():
    with pytest.raises(ValueError):
        ImpulseProblem(FIG1, EXP, -0.1, grid(16))


def test_extract_regions_tolerance(fig1):
    prob, v, pol, _ = fig1
    loose = extract_regions(v, prob, tol_region=1e-3)
    assert np.all(loose.trade >= pol.trade)
