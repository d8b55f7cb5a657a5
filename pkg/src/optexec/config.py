"""INI run configurations: parsing, validation and problem construction."""

from __future__ import annotations

import configparser
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .grid import Closure, Grid2D
from .impact import ImpactModel
from .impulse import ImpulseProblem
from .market import InvalidModel, MarketModel
from .montecarlo import SimConfig
from .singular import SingularProblem

RUN_KINDS = ("solve", "simulate", "sweep", "validate")


class ConfigError(ValueError):
    """Invalid configuration; ``str()`` is anchored to a source line."""

    def __init__(self, message, source="<config>", line=None, key=None):
        self.source = source
        self.line = line
        self.key = key
        where = f"{source}:{line}" if line else source
        super().__init__(f"{where}: {message}")


def _line_index(text: str):
    sections, keys = {}, {}
    current = None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"^\[([^\]]+)\]", line)
        if m:
            current = m.group(1).strip().lower()
            sections.setdefault(current, n)
            continue
        m = re.match(r"^([^=:#;\s][^=:]*?)\s*[=:]", line)
        if m and current:
            keys.setdefault((current, m.group(1).strip().lower()), n)
    return sections, keys, len(text.splitlines())


@dataclass
class RunConfig:
    """Raw ``section -> key -> string`` values plus line anchors for errors."""

    data: dict
    source: str = "<config>"
    sections: dict = field(default_factory=dict)
    keys: dict = field(default_factory=dict)
    n_lines: int = 0

    # -- raw access -----------------------------------------------------
    def _anchor(self, section, key=None):
        if key is not None and (section, key) in self.keys:
            return self.keys[section, key]
        return self.sections.get(section, self.n_lines or None)

    def error(self, message, section, key=None):
        name = f"{section}.{key}" if key else section
        return ConfigError(message, self.source, self._anchor(section, key), name)

    def has(self, section, key) -> bool:
        return key in self.data.get(section, {})

    def raw(self, section, key, default=None, required=False):
        if self.has(section, key):
            return self.data[section][key].strip()
        if required:
            where = f"section [{section}]" if section in self.data else f"missing section [{section}]"
            raise self.error(f"missing required key {section}.{key} ({where})", section, key)
        return default

    def get_float(self, section, key, default=None, required=False):
        value = self.raw(section, key, None, required)
        if value is None:
            return default
        try:
            return float(value)
        except ValueError:
            raise self.error(f"{section}.{key} must be a number, got {value!r}", section, key) from None

    def get_int(self, section, key, default=None, required=False):
        value = self.raw(section, key, None, required)
        if value is None:
            return default
        try:
            return int(value)
        except ValueError:
            raise self.error(f"{section}.{key} must be an integer, got {value!r}", section, key) from None

    def get_bool(self, section, key, default=False):
        value = self.raw(section, key)
        if value is None:
            return default
        v = value.lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise self.error(f"{section}.{key} must be a boolean, got {value!r}", section, key)

    def get_choice(self, section, key, choices, default=None, required=False):
        value = self.raw(section, key, default, required)
        if value is None:
            return None
        value = value.lower()
        if value not in choices:
            raise self.error(
                f"{section}.{key} must be one of {', '.join(choices)}, got {value!r}", section, key
            )
        return value

    # -- derived objects -------------------------------------------------
    @property
    def run_kind(self) -> str:
        return self.get_choice("run", "kind", RUN_KINDS, default="solve")

    @property
    def solver_kind(self) -> str:
        return self.get_choice("solver", "kind", ("impulse", "singular"), required=True)

    @property
    def probe(self):
        return (self.get_float("run", "probe_x", 5.0), self.get_float("run", "probe_p", 2.0))

    def beta(self) -> float:
        b = self.get_float("solver", "beta")
        if b is None:
            b = self.get_float("model", "beta")
        if b is None:
            raise self.error("missing required key solver.beta", "solver", "beta")
        return b

    def model(self) -> MarketModel:
        kind = self.get_choice("model", "kind", ("gbm", "abm", "ou"), required=True)
        sigma = self.get_float("model", "sigma", required=True)
        try:
            if kind == "ou":
                return MarketModel.ou(
                    self.get_float("model", "ou_rate", required=True),
                    self.get_float("model", "ou_mean", required=True),
                    sigma, self.beta(),
                )
            mu = self.get_float("model", "mu", required=True)
            return MarketModel.gbm(mu, sigma, self.beta()) if kind == "gbm" else MarketModel.abm(mu, sigma, self.beta())
        except InvalidModel as exc:
            raise self.error(f"invalid [model]: {exc}", "model") from None

    def impact(self) -> ImpactModel:
        kind = self.get_choice("impact", "kind", ("exp", "linear", "none"), required=True)
        if kind == "none":
            return ImpactModel.none()
        lam = self.get_float("impact", "lambda", required=True)
        try:
            return ImpactModel.exponential(lam) if kind == "exp" else ImpactModel.linear(lam)
        except ValueError as exc:
            raise self.error(str(exc), "impact", "lambda") from None

    def grid(self, refine: int = 1) -> Grid2D:
        px, pp = self.probe
        closure = self.get_choice("grid", "closure", tuple(c.value for c in Closure), default="intervene")
        try:
            g = Grid2D(
                self.get_float("grid", "x_max", 2.0 * px),
                self.get_float("grid", "p_max", 5.0 * pp),
                self.get_int("grid", "nx", 200),
                self.get_int("grid", "np", 200),
                closure,
            )
        except ValueError as exc:
            raise self.error(f"invalid [grid]: {exc}", "grid") from None
        return g.refined(refine) if refine > 1 else g

    def problem(self, refine: int = 1):
        model, impact, grid = self.model(), self.impact(), self.grid(refine)
        if self.solver_kind == "impulse":
            k = self.get_float("solver", "k", required=True)
            if k < 0:
                raise self.error("solver.k must be non-negative", "solver", "k")
            return ImpulseProblem(model, impact, k, grid)
        return SingularProblem(model, impact, grid)

    def solver_options(self) -> dict:
        opts = {
            "tol": self.get_float("solver", "tol", 1e-7),
            "omega": self.get_float("solver", "omega", 1.5),
            "tol_region": self.get_float("solver", "tol_region"),
        }
        if self.solver_kind == "impulse":
            opts["max_outer"] = self.get_int("solver", "max_outer", 50)
            opts["max_inner"] = self.get_int("solver", "max_inner", 20000)
        else:
            opts["max_iter"] = self.get_int("solver", "max_iter", 200000)
        return opts

    def sim(self, model: MarketModel | None = None) -> SimConfig:
        model = model or self.model()
        try:
            return SimConfig.for_model(
                model,
                n_paths=self.get_int("sim", "paths", 100_000),
                dt=self.get_float("sim", "dt", 1e-3 / model.beta),
                horizon=self.get_float("sim", "horizon", 25.0 / model.beta),
                seed=self.get_int("sim", "seed", 0),
                antithetic=self.get_bool("sim", "antithetic", False),
            )
        except ValueError as exc:
            raise self.error(str(exc), "sim") from None

    def sweep(self):
        key = self.raw("sweep", "parameter", required=True)
        if "." not in key:
            raise self.error(f"sweep.parameter must look like section.key, got {key!r}", "sweep", "parameter")
        text = self.raw("sweep", "values", required=True)
        try:
            values = [float(v) for v in re.split(r"[,\s]+", text) if v]
        except ValueError:
            raise self.error(f"sweep.values must be numbers, got {text!r}", "sweep", "values") from None
        if not values:
            raise self.error("sweep.values is empty", "sweep", "values")
        if values != sorted(values):
            raise self.error("sweep.values must be sorted", "sweep", "values")
        return key.lower(), values

    # -- copies and echo --------------------------------------------------
    def with_value(self, dotted: str, value) -> "RunConfig":
        section, key = dotted.split(".", 1)
        data = {s: dict(kv) for s, kv in self.data.items()}
        data.setdefault(section, {})[key] = _fmt(value)
        return RunConfig(data, self.source, self.sections, self.keys, self.n_lines)

    def echo(self) -> dict:
        return {s: dict(kv) for s, kv in self.data.items()}

    def to_ini(self) -> str:
        parser = configparser.ConfigParser(interpolation=None)
        parser.read_dict(self.data)
        lines = []
        for section in parser.sections():
            lines.append(f"[{section}]")
            lines.extend(f"{k} = {v}" for k, v in parser[section].items())
            lines.append("")
        return "\n".join(lines)

    def validate(self):
        """Build every object the chosen run kind needs, raising on the first problem."""
        kind = self.run_kind
        if kind == "validate":
            self.grid()
            return self
        self.problem()
        self.solver_options()
        if kind == "simulate":
            self.sim()
        if kind == "sweep":
            # individual points may still fail; they are recorded per point
            self.sweep()
        return self


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError(str(exc).splitlines()[0], source, line) from None
    sections, keys, n_lines = _line_index(text)
    data = {s.lower(): {k.lower(): v for k, v in parser[s].items()} for s in parser.sections()}
    return RunConfig(data, source, sections, keys, n_lines)


def load_config(path) -> RunConfig:
    """Read an INI file, or the config echoed inside a ``report.json``."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    if path.suffix == ".json":
        try:
            echoed = json.loads(text)["config"]
        except (ValueError, KeyError, TypeError):
            raise ConfigError("JSON file has no 'config' echo", str(path)) from None
        return RunConfig({s: {k: str(v) for k, v in kv.items()} for s, kv in echoed.items()}, str(path))
    return parse_config(text, str(path))
