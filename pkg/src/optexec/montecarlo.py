"""Monte Carlo estimates of discounted revenue under a given selling policy.

Paths are simulated in fixed-size blocks. Block ``b`` draws its randomness
from ``SeedSequence(seed, spawn_key=(b,))``, so results do not depend on how
blocks are distributed over worker processes. Between trades GBM prices move
by exact log-normal steps and ABM/OU prices by their exact Gaussian
transitions, with a Brownian-bridge test for absorption at zero inside a step.

The infinite horizon is truncated at ``cfg.horizon``. ``e^{-beta t} (P_t + c)``
is a supermartingale for the shift ``c`` returned by
:meth:`MarketModel.supermartingale_shift`, so ``X (P + c)`` bounds the revenue
still obtainable from a state. Paths whose discounted bound falls below
``drop_tol`` are stopped early, and every stopped path adds its bound to
``tail_bound``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from numba import njit

from .impact import ImpactKind, ImpactModel
from .market import MarketModel, ProcessKind

BLOCK = 4096
CHUNK = 256

_KIND = {ProcessKind.GBM: 0, ProcessKind.ABM: 1, ProcessKind.OU: 2}
_IMPACT = {ImpactKind.EXPONENTIAL: 0, ImpactKind.LINEAR: 1, ImpactKind.NONE: 2}


class InvalidPolicy(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    n_paths: int = 100_000
    dt: float = 2.5e-4
    horizon: float = 6.25
    seed: int = 0
    antithetic: bool = False
    drop_tol: float = 1e-12

    def __post_init__(self):
        if self.n_paths < 100:
            raise ValueError(f"need at least 100 paths, got {self.n_paths}")
        if not (self.dt > 0 and self.horizon > 0):
            raise ValueError("dt and horizon must be positive")
        if self.antithetic and self.n_paths % 2:
            raise ValueError("antithetic sampling needs an even number of paths")

    @classmethod
    def for_model(cls, model: MarketModel, **kw):
        """Defaults scaled by the discount rate: ``dt = 1e-3 / beta``, ``T = 25 / beta``."""
        kw.setdefault("dt", 1e-3 / model.beta)
        kw.setdefault("horizon", 25.0 / model.beta)
        return cls(**kw)

    def check(self, model: MarketModel):
        if model.beta * self.horizon < 20.0:
            raise ValueError(
                f"horizon {self.horizon} too short: beta * T = {model.beta * self.horizon:.3g} < 20"
            )


@dataclass(frozen=True)
class SimResult:
    mean: float
    half_width_95: float
    n_paths: int
    tail_bound: float
    seed: int

    def as_dict(self) -> dict:
        return asdict(self)


# --- numba kernels ---------------------------------------------------------


@njit(cache=True)
def _alpha(ik, lam, zeta, p):
    if ik == 0:
        return p * math.exp(-lam * zeta)
    if ik == 1:
        q = p - lam * zeta
        return q if q > 0.0 else 0.0
    return p


@njit(cache=True)
def _liquidate(ik, lam, q, p):
    """Revenue of selling ``q`` shares by infinitesimal pieces from price ``p``."""
    if ik == 0:
        return -p * math.expm1(-lam * q) / lam
    if ik == 1:
        if lam * q <= p:
            return p * q - 0.5 * lam * q * q
        return 0.5 * p * p / lam
    return p * q


@njit(cache=True)
def _step_price(pk, mu, sigma, rate, mean, p, dt, z, u):
    """Exact transition of the unperturbed price; returns 0 on absorption."""
    if p <= 0.0:
        return 0.0
    if pk == 0:
        return p * math.exp((mu - 0.5 * sigma * sigma) * dt + sigma * math.sqrt(dt) * z)
    if pk == 1:
        q = p + mu * dt + sigma * math.sqrt(dt) * z
        var = sigma * sigma * dt
    else:
        e = math.exp(-rate * dt)
        var = sigma * sigma * (1.0 - e * e) / (2.0 * rate)
        q = mean + (p - mean) * e + math.sqrt(var) * z
    if q <= 0.0:
        return 0.0
    if u < math.exp(-2.0 * p * q / var):
        return 0.0
    return q


@njit(cache=True)
def _segment_mean(a, b):
    """Mean over a step of the log-linear interpolant between ``a`` and ``b``."""
    if a <= 0.0 or b <= 0.0:
        return 0.5 * (a + b)
    d = math.log(b / a)
    if abs(d) < 1e-6:
        return 0.5 * (a + b) * (1.0 + d * d / 24.0)
    return (b - a) / d


@njit(cache=True)
def _nearest(v, h, n):
    k = int(math.floor(v / h + 0.5))
    if k < 0:
        return 0
    if k > n:
        return n
    return k


@njit(cache=True)
def _policy_chunk(X, P, rev, tail, done, t0, step0, Z, U, trade, zeta, hx, hp, nx, n_p,
                  mode, k, u_cap, pk, mu, sigma, rate, mean, ik, lam, beta, shift,
                  dt, n_steps, drop_tol):
    """Advance every live path through ``Z.shape[1]`` steps.

    ``mode`` 0 applies impulse trades ``zeta`` while the node is flagged;
    ``mode`` 1 sells in chunks of at most ``hx`` while flagged, up to
    ``u_cap * dt`` shares per step. Returns the number of live paths.
    """
    n_paths = X.size
    live = 0
    for m in range(n_paths):
        if done[m]:
            continue
        x = X[m]
        p = P[m]
        r = rev[m]
        finished = False
        for s in range(Z.shape[1]):
            step = step0 + s
            t = t0 + s * dt
            disc = math.exp(-beta * t)
            if mode == 0:
                for _ in range(nx + 2):
                    i = _nearest(x, hx, nx)
                    j = _nearest(p, hp, n_p)
                    if not trade[i, j]:
                        break
                    q = zeta[i, j]
                    if q > x:
                        q = x
                    if q <= 0.0:
                        break
                    p = _alpha(ik, lam, q, p)
                    r += disc * (q * p - k)
                    x -= q
                    if x <= 1e-12:
                        x = 0.0
                        break
            else:
                budget = u_cap * dt
                while budget > 0.0 and x > 0.0:
                    i = _nearest(x, hx, nx)
                    j = _nearest(p, hp, n_p)
                    if not trade[i, j]:
                        break
                    q = min(hx, budget, x)
                    r += disc * _liquidate(ik, lam, q, p)
                    p = _alpha(ik, lam, q, p)
                    x -= q
                    budget -= q
                    if x <= 1e-12:
                        x = 0.0
            if x <= 0.0 or p <= 0.0:
                finished = True
                break
            bound = disc * x * (p + shift)
            if bound <= drop_tol or step >= n_steps:
                tail[m] = bound
                finished = True
                break
            uu = U[m, s] if U.shape[0] > 1 else 1.0
            p = _step_price(pk, mu, sigma, rate, mean, p, dt, Z[m, s], uu)
            if p <= 0.0:
                finished = True
                break
        X[m] = x
        P[m] = p
        rev[m] = r
        if finished:
            done[m] = True
        else:
            live += 1
    return live


@njit(cache=True)
def _constant_rate_chunk(X, P, rev, tail, done, t0, step0, Z, u, pk, mu, sigma, rate, mean,
                         ik, lam, beta, shift, dt, n_steps, drop_tol):
    """Sell ``u`` shares per unit time until the inventory is gone.

    Revenue integrates ``e^{-beta t} P_t u`` step by step with a log-linear
    interpolant (exact for the deterministic part), fractional last step.
    """
    n_paths = X.size
    live = 0
    exact = pk == 0 and ik == 0
    full_decay = math.exp(-beta * dt)
    for m in range(n_paths):
        if done[m]:
            continue
        x = X[m]
        p = P[m]
        r = rev[m]
        finished = False
        disc = math.exp(-beta * t0)
        for s in range(Z.shape[1]):
            step = step0 + s
            bound = disc * x * (p + shift)
            if bound <= drop_tol or step >= n_steps:
                tail[m] = bound
                finished = True
                break
            h = dt
            if x < u * dt:
                h = x / u
            z = Z[m, s]
            decay = full_decay if h == dt else math.exp(-beta * h)
            if exact:
                incr = (mu - lam * u - 0.5 * sigma * sigma) * h + sigma * math.sqrt(h) * z
                q = p * math.exp(incr)
                d = incr - beta * h
                seg = disc * p * (math.expm1(d) / d if abs(d) > 1e-8 else 1.0 + 0.5 * d)
            else:
                if pk == 0:
                    dr, vol = mu * p, sigma * p
                elif pk == 1:
                    dr, vol = mu, sigma
                else:
                    dr, vol = rate * (mean - p), sigma
                g = lam * p if ik == 0 else (lam if ik == 1 else 0.0)
                q = p + (dr - g * u) * h + vol * math.sqrt(h) * z
                if q < 0.0:
                    q = 0.0
                seg = _segment_mean(disc * p, disc * decay * q)
            r += h * u * seg
            p = q
            x -= u * h
            disc *= decay
            if x <= 1e-12 or p <= 0.0:
                finished = True
                break
        X[m] = x
        P[m] = p
        rev[m] = r
        if finished:
            done[m] = True
        else:
            live += 1
    return live


# --- block driver ------------------------------------------------------------


def _draws(rng, shape, antithetic, bridge):
    n, steps = shape
    half = n // 2 if antithetic else n
    z = rng.standard_normal((half, steps))
    u = rng.random((half, steps)) if bridge else np.ones((1, 1))
    if antithetic:
        z = np.concatenate([z, -z])
        if bridge:
            u = np.concatenate([u, u])
    return z, u


def _run_block(args):
    block, n, seed, antithetic, spec = args
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))
    X = np.full(n, spec["x0"], dtype=float)
    P = np.full(n, spec["p0"], dtype=float)
    rev = np.zeros(n)
    tail = np.zeros(n)
    done = np.zeros(n, dtype=np.bool_)
    dt, n_steps = spec["dt"], spec["n_steps"]
    step0 = 0
    while True:
        Z, U = _draws(rng, (n, CHUNK), antithetic, spec["bridge"])
        if spec["mode"] == 2:
            live = _constant_rate_chunk(
                X, P, rev, tail, done, step0 * dt, step0, Z, spec["u"], *spec["market"],
                spec["ik"], spec["lam"], spec["beta"], spec["shift"], dt, n_steps, spec["drop_tol"],
            )
        else:
            live = _policy_chunk(
                X, P, rev, tail, done, step0 * dt, step0, Z, U, spec["trade"], spec["zeta"],
                spec["hx"], spec["hp"], spec["nx"], spec["np"], spec["mode"], spec["k"],
                spec["u_cap"], *spec["market"], spec["ik"], spec["lam"], spec["beta"],
                spec["shift"], dt, n_steps, spec["drop_tol"],
            )
        step0 += CHUNK
        if live == 0:
            return rev, tail


def _simulate(spec: dict, cfg: SimConfig, jobs: int = 1) -> SimResult:
    sizes = [BLOCK] * (cfg.n_paths // BLOCK)
    if cfg.n_paths % BLOCK:
        sizes.append(cfg.n_paths % BLOCK)
    tasks = [(b, n, cfg.seed, cfg.antithetic, spec) for b, n in enumerate(sizes)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_run_block, tasks))
    else:
        parts = [_run_block(t) for t in tasks]
    rev = np.concatenate([r for r, _ in parts])
    tail = np.concatenate([t for _, t in parts])
    if cfg.antithetic:
        samples = np.concatenate([
            0.5 * (r[: r.size // 2] + r[r.size // 2:]) for r, _ in parts
        ])
    else:
        samples = rev
    sd = float(np.std(samples, ddof=1)) if samples.size > 1 else 0.0
    return SimResult(
        mean=float(np.mean(rev)),
        half_width_95=1.959963984540054 * sd / math.sqrt(samples.size),
        n_paths=int(rev.size),
        tail_bound=float(np.mean(tail)),
        seed=int(cfg.seed),
    )


def _base_spec(model: MarketModel, impact: ImpactModel, y0, cfg: SimConfig) -> dict:
    cfg.check(model)
    x0, p0 = (float(v) for v in y0)
    if x0 < 0 or p0 < 0:
        raise ValueError("initial state must be non-negative")
    shift = model.supermartingale_shift()
    scale = max(x0 * (p0 + shift), 1e-300)
    return {
        "x0": x0, "p0": p0, "dt": float(cfg.dt),
        "n_steps": int(math.ceil(cfg.horizon / cfg.dt - 1e-9)),
        "market": (_KIND[model.kind], float(model.mu), float(model.sigma),
                   float(model.ou_rate), float(model.ou_mean)),
        "ik": 2 if impact.trivial else _IMPACT[impact.kind], "lam": float(impact.lam or 0.0),
        "beta": float(model.beta), "shift": float(shift),
        "drop_tol": cfg.drop_tol * scale,
        "bridge": model.kind is not ProcessKind.GBM,
    }


def _policy_spec(spec, grid, trade, zeta):
    trade = np.ascontiguousarray(trade, dtype=np.bool_)
    if trade.shape != grid.shape:
        raise InvalidPolicy(f"policy shape {trade.shape} does not match grid {grid.shape}")
    spec.update(trade=trade, zeta=np.ascontiguousarray(zeta, dtype=float), hx=grid.hx,
                hp=grid.hp, nx=grid.nx, np=grid.n_p)
    return spec


def simulate_impulse(problem, policy, y0, cfg: SimConfig, jobs: int = 1) -> SimResult:
    """Discounted revenue of the impulse policy ``(trade, zeta_star)`` from ``y0``.

    The policy is read at the nearest grid node. Several trades may happen
    at one instant; each pays the fixed cost.
    """
    spec = _base_spec(problem.model, problem.impact, y0, cfg)
    if np.shape(policy.zeta_star) != problem.grid.shape:
        raise InvalidPolicy("trade sizes do not match the problem grid")
    spec = _policy_spec(spec, problem.grid, policy.trade, policy.zeta_star)
    spec.update(mode=0, k=float(problem.k), u_cap=0.0)
    return _simulate(spec, cfg, jobs)


def simulate_constant_rate(model: MarketModel, impact: ImpactModel, y0, u: float, cfg: SimConfig,
                           jobs: int = 1) -> SimResult:
    """Sell at the constant speed ``u`` until the inventory is gone."""
    if not u > 0:
        raise ValueError(f"selling rate must be positive, got {u}")
    spec = _base_spec(model, impact, y0, cfg)
    spec.update(mode=2, u=float(u), bridge=False)
    return _simulate(spec, cfg, jobs)


def simulate_singular_boundary(problem, policy, y0, cfg: SimConfig, u_cap: float = 1e4,
                               jobs: int = 1) -> SimResult:
    """Sell at rate ``u_cap`` while inside the trade region, otherwise wait.

    Each step sells up to ``u_cap * dt`` shares in pieces of at most one
    inventory cell, rechecking the region after every piece. The result
    estimates a lower bound for the singular value.
    """
    if not u_cap > 0:
        raise ValueError("u_cap must be positive")
    spec = _base_spec(problem.model, problem.impact, y0, cfg)
    spec = _policy_spec(spec, problem.grid, policy.trade, np.zeros(problem.grid.shape))
    spec.update(mode=1, k=0.0, u_cap=float(u_cap))
    return _simulate(spec, cfg, jobs)
