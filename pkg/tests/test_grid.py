import numpy as np
import pytest
from hypothesis import given, strategies as st

from optexec.grid import BoundaryRule, Closure, Grid2D, build_generator, upper_boundary_closure
from optexec.impact import ImpactModel, liquidation_value
from optexec.market import MarketModel

MODELS = [MarketModel.gbm(2, 1, 4), MarketModel.abm(4, 0.5, 1), MarketModel.abm(-3, 1, 1),
          MarketModel.ou(4, 5, 0.5, 1)]


def test_nodes_and_spacing():
    g = Grid2D(10, 5, 20, 40)
    assert g.hx == 0.5 and g.hp == 0.125
    assert g.shape == (21, 41)
    assert g.x[-1] == 10 and g.p[-1] == 5
    x, p = g.mesh()
    assert x.shape == g.shape and x[3, 0] == 1.5 and p[0, 8] == 1.0


def test_grid_rejects_coarse_or_degenerate():
    with pytest.raises(ValueError):
        Grid2D(10, 10, 15, 20)
    with pytest.raises(ValueError):
        Grid2D(0, 10, 20, 20)


def test_for_query_defaults():
    g = Grid2D.for_query(5, 2)
    assert (g.x_max, g.p_max, g.closure) == (10, 10, Closure.INTERVENE)


def test_index_and_interpolate():
    g = Grid2D(10, 10, 20, 20)
    assert g.index_of(5.0, 2.0) == (10, 4)
    with pytest.raises(ValueError):
        g.index_of(5.1, 2.0)
    x, p = g.mesh()
    field = 3 * x - 2 * p + 1
    assert g.interpolate(field, 3.3, 7.1) == pytest.approx(3 * 3.3 - 2 * 7.1 + 1)


@pytest.mark.parametrize("model", MODELS)
def test_generator_monotone_and_kills_constants(model):
    gen = build_generator(model, Grid2D(10, 10, 20, 50))
    assert gen.monotone
    out = gen.apply(np.ones(51))
    assert np.allclose(out, 0.0, atol=1e-10)


def test_generator_linear_and_quadratic():
    g = Grid2D(10, 10, 20, 50)
    gen = build_generator(MarketModel.abm(4, 0.5, 1), g)
    assert np.allclose(gen.apply(g.p)[1:-1], 4.0)
    gen = build_generator(MarketModel(kind="gbm", mu=0.0, sigma=1.0, beta=1.0), g)
    assert np.allclose(gen.apply(g.p ** 2)[1:-1], g.p[1:-1] ** 2, rtol=1e-12)


@pytest.mark.parametrize("model", MODELS)
def test_generator_consistency_order(model):
    def err(n):
        g = Grid2D(1, 4, 16, n)
        p = g.p
        f = np.exp(p / 2)
        df, d2f = f / 2, f / 4
        exact = model.drift(p) * df + 0.5 * model.volatility(p) ** 2 * d2f
        inner = slice(1, -1)
        sel = (p[inner] > 0.5) & (p[inner] < 3.5)
        # upwinded drift is first order, so the ratio sits near 2
        return np.max(np.abs(build_generator(model, g).apply(f)[inner] - exact[inner])[sel])
    ratio = err(64) / err(128)
    assert ratio >= 1.8


@given(j=st.integers(1, 48), bump=st.floats(0.0, 5.0))
def test_gauss_seidel_update_monotone_in_neighbours(j, bump):
    model = MarketModel.ou(4, 5, 0.5, 1)
    gen = build_generator(model, Grid2D(10, 10, 20, 50))
    v = np.linspace(0, 1, 51)
    upd = lambda w: (gen.down[j] * w[j - 1] + gen.up[j] * w[j + 1]) / (model.beta - gen.diag[j])
    w = v.copy()
    w[j - 1] += bump
    w[j + 1] += bump
    assert upd(w) >= upd(v)


def test_boundary_rules():
    g = Grid2D(10, 10, 20, 20, "dirichlet_w")
    im = ImpactModel.exponential(0.5)
    rule = upper_boundary_closure(g, impact=im)
    top = rule.top_values()
    assert top[0] == 0.0
    assert top[4] == pytest.approx(liquidation_value(im, g.x[4], 10.0))
    v = rule.apply(np.ones(g.shape))
    assert np.all(v[0] == 0) and np.all(v[:, 0] == 0)
    assert np.allclose(v[1:, -1], top[1:])

    x, p = g.mesh()
    lin = BoundaryRule(Closure.EXTRAPOLATE, g).apply(x * p)
    assert np.allclose(lin[1:, -1], (x * p)[1:, -1])
    with pytest.raises(ValueError):
        BoundaryRule(Closure.INTERVENE, g, im).top_values()
