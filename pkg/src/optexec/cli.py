"""Command-line front end.

    python -m optexec --config PATH [--out DIR] [--jobs N] [--seed S]

Exit codes: 0 ok, 1 config error, 2 not converged, 3 validation failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .impulse import ImpulseProblem, NotConverged, solve_impulse
from .montecarlo import simulate_impulse, simulate_singular_boundary
from .singular import solve_singular

log = logging.getLogger("optexec")

EXIT_OK, EXIT_CONFIG, EXIT_NOT_CONVERGED, EXIT_VALIDATION = 0, 1, 2, 3


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _g(v) -> str:
    return "%.9g" % v


def solve(cfg: RunConfig):
    """Solve the configured problem. Returns ``(problem, values, policy, report, converged)``."""
    problem = cfg.problem()
    opts = cfg.solver_options()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            if isinstance(problem, ImpulseProblem):
                values, policy, report = solve_impulse(problem, **opts)
            else:
                values, policy, report = solve_singular(problem, **opts)
            return problem, values, policy, report, True
        except NotConverged as exc:
            return problem, exc.values, exc.policy, exc.report, False


def value_csv(problem, values, policy) -> str:
    grid = problem.grid
    x, p = grid.mesh()
    region = np.where(policy.trade, "trade", "continue")
    impulse = isinstance(problem, ImpulseProblem)
    lines = ["x,p,V,region,zeta_star" if impulse else "x,p,V,region"]
    for idx in np.ndindex(grid.shape):
        row = f"{_g(x[idx])},{_g(p[idx])},{_g(values[idx])},{region[idx]}"
        if impulse:
            row += f",{_g(policy.zeta_star[idx])}"
        lines.append(row)
    return "\n".join(lines) + "\n"


def regions_csv(problem, policy) -> str:
    grid = problem.grid
    x, p = grid.mesh()
    region = np.where(policy.trade, "trade", "continue")
    lines = ["x,p,region"] + [f"{_g(x[i])},{_g(p[i])},{region[i]}" for i in np.ndindex(grid.shape)]
    return "\n".join(lines) + "\n"


def free_boundary_csv(policy) -> str:
    lines = ["x,p_star"] + [f"{_g(a)},{_g(b)}" for a, b in policy.free_boundary]
    return "\n".join(lines) + "\n"


def run_solve(cfg: RunConfig, out: Path) -> int:
    problem, values, policy, report, ok = solve(cfg)
    _atomic_write(out / "value.csv", value_csv(problem, values, policy))
    _atomic_write(out / "regions.csv", regions_csv(problem, policy))
    if not isinstance(problem, ImpulseProblem):
        _atomic_write(out / "free_boundary.csv", free_boundary_csv(policy))
    doc = {
        "report": report.as_dict(),
        "V_at_probe": float(problem.grid.interpolate(values, *cfg.probe)),
        "probe": list(cfg.probe),
        "warning": None if ok else "not converged; files hold the last iterate",
        "config": cfg.echo(),
        "version": __version__,
    }
    _atomic_write(out / "report.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
    if not ok:
        log.warning("solver did not converge (residual %.3e)", report.residual)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def run_simulate(cfg: RunConfig, out: Path, jobs: int = 1) -> int:
    problem, values, policy, report, ok = solve(cfg)
    sim_cfg = cfg.sim(problem.model)
    y0 = cfg.probe
    if isinstance(problem, ImpulseProblem):
        res = simulate_impulse(problem, policy, y0, sim_cfg, jobs=jobs)
    else:
        u_cap = cfg.get_float("sim", "u_cap", 1e4)
        res = simulate_singular_boundary(problem, policy, y0, sim_cfg, u_cap=u_cap, jobs=jobs)
    doc = res.as_dict()
    doc["V_at_probe"] = float(problem.grid.interpolate(values, *y0))
    doc["solver_converged"] = ok
    _atomic_write(out / "simulation.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


def _sweep_point(args):
    cfg, key, value = args
    cfg = cfg.with_value(key, value)
    try:
        problem, values, policy, report, ok = solve(cfg)
    except (ValueError, RuntimeError) as exc:
        return value, float("nan"), 0, float("nan"), f"error: {exc}"
    probe = float(problem.grid.interpolate(values, *cfg.probe))
    return value, probe, report.iterations, report.residual, "ok" if ok else "not_converged"


def run_sweep(cfg: RunConfig, out: Path, jobs: int = 1) -> int:
    key, values = cfg.sweep()
    tasks = [(cfg, key, v) for v in values]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_point, tasks))
    else:
        rows = [_sweep_point(t) for t in tasks]
    lines = ["parameter_value,V_at_probe,iterations,residual,status"]
    lines += [f"{_g(v)},{_g(p)},{it},{_g(r)},{st}" for v, p, it, r, st in rows]
    _atomic_write(out / "sweep.csv", "\n".join(lines) + "\n")
    return EXIT_OK if all(r[-1] == "ok" for r in rows) else EXIT_NOT_CONVERGED


def run_validate(cfg: RunConfig, out: Path, jobs: int = 1) -> int:
    from .validation import battery

    grid = cfg.grid()
    t0 = time.perf_counter()
    checks = battery(
        n=grid.nx,
        seed=cfg.get_int("sim", "seed", 0),
        n_paths=cfg.get_int("sim", "paths", 100_000),
    )
    doc = {
        "passed": all(c.passed for c in checks),
        "wall_time": time.perf_counter() - t0,
        "checks": [c.as_dict() for c in checks],
        "version": __version__,
    }
    _atomic_write(out / "validate.json", json.dumps(doc, indent=2, default=float) + "\n")
    for c in checks:
        log.info("%-32s %s", c.name, "pass" if c.passed else "FAIL")
    return EXIT_OK if doc["passed"] else EXIT_VALIDATION


RUNNERS = {"solve": run_solve, "simulate": run_simulate, "sweep": run_sweep, "validate": run_validate}


def build_parser():
    ap = argparse.ArgumentParser(prog="optexec", description="Optimal execution solvers.")
    ap.add_argument("--config", required=True, help="INI config, or a report.json to re-run")
    ap.add_argument("--out", default=None, help="output directory (default: output.dir or ./out)")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps and simulation")
    ap.add_argument("--seed", type=int, default=None, help="override sim.seed")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_value("sim.seed", args.seed)
        cfg.validate()
        kind = cfg.run_kind
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out or cfg.raw("output", "dir", "out"))
    runner = RUNNERS[kind]
    if kind == "solve":
        return runner(cfg, out)
    return runner(cfg, out, jobs=max(1, args.jobs))


if __name__ == "__main__":
    sys.exit(main())
