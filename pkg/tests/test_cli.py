import csv
import json
import math
import re
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from optexec.cli import main
from optexec.config import ConfigError, load_config, parse_config

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def small(name, tmp_path, n=100, extra=""):
    text = (CONFIGS / name).read_text()
    text = re.sub(r"nx = \d+", f"nx = {n}", text)
    text = re.sub(r"np = \d+", f"np = {n}", text)
    path = tmp_path / name
    path.write_text(text + extra)
    return path


def read_csv(path, header):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == header
    return rows[1:]


def test_fig1_solve(tmp_path):
    out = tmp_path / "out"
    assert main(["--config", str(CONFIGS / "fig1.ini"), "--out", str(out)]) == 0
    rows = read_csv(out / "value.csv", ["x", "p", "V", "region", "zeta_star"])
    assert len(rows) == 201 * 201
    assert all(math.isfinite(float(r[i])) for r in rows for i in (0, 1, 2, 4))
    # row-major in x then p
    assert [float(r[1]) for r in rows[:3]] == [0.0, 0.05, 0.1] and float(rows[201][0]) == 0.05
    regions = {r[2] for r in read_csv(out / "regions.csv", ["x", "p", "region"])}
    assert regions == {"trade", "continue"}
    rep = json.loads((out / "report.json").read_text())
    assert rep["report"]["converged"] and rep["version"]
    assert rep["config"]["solver"]["k"] == "0.2"
    assert not (out / "free_boundary.csv").exists()


def test_missing_lambda(tmp_path, capsys):
    text = (CONFIGS / "fig1.ini").read_text().replace("lambda = 0.5\n", "")
    path = tmp_path / "bad.ini"
    path.write_text(text)
    assert main(["--config", str(path), "--out", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err
    assert "impact.lambda" in err
    line = int(re.search(r"bad\.ini:(\d+):", err).group(1))
    assert text.splitlines()[line - 1].strip() == "[impact]"


def test_config_errors_are_anchored():
    text = "[model]\nkind = gbm\nmu = two\nsigma = 1\n[impact]\nkind = exp\nlambda = 0.5\n" \
           "[solver]\nkind = impulse\nbeta = 4\nk = 0.2\n"
    with pytest.raises(ConfigError, match=r"<config>:3: model.mu must be a number"):
        parse_config(text).validate()
    with pytest.raises(ConfigError, match="beta > mu"):
        parse_config(text.replace("two", "5")).validate()
    with pytest.raises(ConfigError, match="sweep.values must be sorted"):
        parse_config(text.replace("two", "1") + "[run]\nkind = sweep\n[sweep]\nparameter = solver.k\n"
                     "values = 0.2, 0.1\n").validate()
    with pytest.raises(ConfigError, match="grid"):
        parse_config(text.replace("two", "1") + "[grid]\nnx = 4\n").validate()


def test_fig2_free_boundary(tmp_path):
    out = tmp_path / "out"
    assert main(["--config", str(small("fig2.ini", tmp_path)), "--out", str(out)]) == 0
    rows = read_csv(out / "free_boundary.csv", ["x", "p_star"])
    assert len(rows) > 0
    read_csv(out / "value.csv", ["x", "p", "V", "region"])


def test_echo_round_trip(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["--config", str(small("fig4.ini", tmp_path)), "--out", str(a)]) == 0
    assert main(["--config", str(a / "report.json"), "--out", str(b)]) == 0
    assert (a / "value.csv").read_bytes() == (b / "value.csv").read_bytes()
    again = load_config(a / "report.json")
    assert again.echo() == json.loads((a / "report.json").read_text())["config"]


def test_not_converged_exit_code(tmp_path):
    path = small("fig1.ini", tmp_path, n=40)
    path.write_text(path.read_text().replace("max_outer = 50", "max_outer = 1"))
    out = tmp_path / "out"
    assert main(["--config", str(path), "--out", str(out)]) == 2
    rep = json.loads((out / "report.json").read_text())
    assert rep["warning"] and not rep["report"]["converged"]
    assert (out / "value.csv").exists()


def test_sweep_lambda_decreasing_and_jobs_invariant(tmp_path):
    path = small("fig3_lambda.ini", tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["--config", str(path), "--out", str(a)]) == 0
    assert main(["--config", str(path), "--out", str(b), "--jobs", "2"]) == 0
    assert (a / "sweep.csv").read_bytes() == (b / "sweep.csv").read_bytes()
    rows = read_csv(a / "sweep.csv", ["parameter_value", "V_at_probe", "iterations", "residual", "status"])
    v = np.array([float(r[1]) for r in rows])
    assert np.all(np.diff(v) < 0) and all(r[4] == "ok" for r in rows)


def test_sweep_records_failed_point(tmp_path):
    path = small("fig3_beta.ini", tmp_path, n=40)
    path.write_text(path.read_text().replace("[model]\nkind = abm", "[model]\nkind = gbm")
                    .replace("mu = 4", "mu = 0.8"))
    out = tmp_path / "o"
    assert main(["--config", str(path), "--out", str(out)]) == 2
    rows = read_csv(out / "sweep.csv", ["parameter_value", "V_at_probe", "iterations", "residual", "status"])
    assert rows[0][4].startswith("error") and rows[-1][4] == "ok"


def test_simulate_and_seed_override(tmp_path):
    path = small("fig1_simulate.ini", tmp_path, n=100)
    path.write_text(path.read_text().replace("paths = 100000", "paths = 2000\ndt = 0.004"))
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["--config", str(path), "--out", str(a), "--seed", "5"]) == 0
    assert main(["--config", str(path), "--out", str(b), "--seed", "5", "--jobs", "2"]) == 0
    da = json.loads((a / "simulation.json").read_text())
    assert da == json.loads((b / "simulation.json").read_text())
    assert da["seed"] == 5 and {"mean", "half_width_95", "n_paths", "tail_bound"} <= set(da)


def test_validate_coarse_grid_names_failures(tmp_path):
    path = tmp_path / "v.ini"
    path.write_text("[run]\nkind = validate\n[grid]\nnx = 16\nnp = 16\n[sim]\npaths = 500\n")
    out = tmp_path / "o"
    assert main(["--config", str(path), "--out", str(out)]) == 3
    doc = json.loads((out / "validate.json").read_text())
    failing = [c["name"] for c in doc["checks"] if not c["passed"]]
    assert failing and not doc["passed"]
    assert "special_case_impulse" in failing


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "optexec", "--config", str(tmp_path / "missing.ini")],
                         capture_output=True, text=True)
    assert out.returncode == 1 and "cannot read config" in out.stderr


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.ini")))
def test_bundled_configs_validate(name):
    load_config(CONFIGS / name).validate()
