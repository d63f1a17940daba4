"""Versioned JSON run configuration with field-level validation."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass
class ParamsConfig:
    n: int = 3
    lam: float = 0.0
    gamma: float = 2.0
    mass: float = 1.0


@dataclass
class OdeConfig:
    t_end: float = 1e6
    rel_tol: float = 1e-10
    abs_tol: float = 1e-13


@dataclass
class SeedConfig:
    shape: str = "zero"
    amplitude: float = 0.0


@dataclass
class SolverConfig:
    num_nodes: int = 128
    t_end: float = 1e4
    rel_tol: float = 1e-7
    abs_tol: float = 1e-11
    cfl_safety: float = 0.5
    stepper: str = "adaptive"
    fixed_dt: float | None = None
    outputs_per_decade: int = 60
    collect_energies: bool = True
    seed: SeedConfig = field(default_factory=SeedConfig)


@dataclass
class OutputsConfig:
    directory: str = "runs/run"
    checkpoint_every: int = 20


@dataclass
class AcceptanceConfig:
    exponent_slack: float = 0.1
    ratio_threshold: float = 10.0
    preservation_tol: float = 1e-8
    check_rates: str = "auto"   # "auto" | "always" | "never"


@dataclass
class RunConfig:
    params: ParamsConfig = field(default_factory=ParamsConfig)
    ode: OdeConfig = field(default_factory=OdeConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    outputs: OutputsConfig = field(default_factory=OutputsConfig)
    acceptance: AcceptanceConfig = field(default_factory=AcceptanceConfig)
    rng_seed: int = 1234

    def to_dict(self) -> dict:
        out = asdict(self)
        out["schema_version"] = SCHEMA_VERSION
        # JSON uses the equation's name for the damping exponent
        out["params"]["lambda"] = out["params"].pop("lam")
        return out

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


_SEED_SHAPES = ("zero", "parabolic", "quartic", "random")
_STEPPERS = ("adaptive", "rk4")
_CHECK_RATES = ("auto", "always", "never")


def _require(cond: bool, path: str, message: str):
    if not cond:
        raise ConfigError(f"{path}: {message}")


def _number(raw, path: str, lo=None, hi=None, lo_strict=None) -> float:
    if not isinstance(raw, (int, float)) or isinstance(raw, bool):
        raise ConfigError(f"{path}: expected a number, got {raw!r}")
    value = float(raw)
    if lo is not None:
        _require(value >= lo, path, f"must be >= {lo}")
    if lo_strict is not None:
        _require(value > lo_strict, path, f"must be > {lo_strict}")
    if hi is not None:
        _require(value <= hi, path, f"must be <= {hi}")
    return value


def _integer(raw, path: str, lo=None) -> int:
    if not isinstance(raw, int) or isinstance(raw, bool):
        raise ConfigError(f"{path}: expected an integer, got {raw!r}")
    if lo is not None:
        _require(raw >= lo, path, f"must be >= {lo}")
    return raw


def _choice(raw, path: str, options) -> str:
    _require(isinstance(raw, str) and raw in options, path,
             f"must be one of {list(options)}, got {raw!r}")
    return raw


def _section(data: dict, name: str) -> dict:
    raw = data.get(name, {})
    _require(isinstance(raw, dict), name, "expected an object")
    return raw


def parse_config(data: dict) -> RunConfig:
    """Validate a parsed JSON document into a RunConfig."""
    if not isinstance(data, dict):
        raise ConfigError("top level: expected a JSON object")
    version = data.get("schema_version", SCHEMA_VERSION)
    _require(version == SCHEMA_VERSION, "schema_version",
             f"unsupported version {version!r} (expected {SCHEMA_VERSION})")
    known = {"schema_version", "params", "ode", "solver", "outputs",
             "acceptance", "rng_seed"}
    for key in data:
        _require(key in known, key, "unknown configuration section")

    cfg = RunConfig()
    p = _section(data, "params")
    if "n" in p:
        cfg.params.n = _integer(p["n"], "params.n")
        _require(cfg.params.n in (2, 3), "params.n", "must be 2 or 3")
    if "lambda" in p:
        cfg.params.lam = _number(p["lambda"], "params.lambda", lo=0.0)
        _require(cfg.params.lam < 1.0, "params.lambda", "must be < 1")
    if "gamma" in p:
        cfg.params.gamma = _number(p["gamma"], "params.gamma", lo_strict=1.0)
    if "mass" in p:
        cfg.params.mass = _number(p["mass"], "params.mass", lo_strict=0.0)

    o = _section(data, "ode")
    if "t_end" in o:
        cfg.ode.t_end = _number(o["t_end"], "ode.t_end", lo=1.0, hi=1e8)
    if "rel_tol" in o:
        cfg.ode.rel_tol = _number(o["rel_tol"], "ode.rel_tol", lo_strict=0.0, hi=1e-3)
    if "abs_tol" in o:
        cfg.ode.abs_tol = _number(o["abs_tol"], "ode.abs_tol", lo_strict=0.0, hi=1e-3)

    s = _section(data, "solver")
    if "num_nodes" in s:
        cfg.solver.num_nodes = _integer(s["num_nodes"], "solver.num_nodes", lo=16)
    if "t_end" in s:
        cfg.solver.t_end = _number(s["t_end"], "solver.t_end", lo_strict=0.0)
    if "rel_tol" in s:
        cfg.solver.rel_tol = _number(s["rel_tol"], "solver.rel_tol", lo_strict=0.0, hi=1e-3)
    if "abs_tol" in s:
        cfg.solver.abs_tol = _number(s["abs_tol"], "solver.abs_tol", lo_strict=0.0, hi=1e-3)
    if "cfl_safety" in s:
        cfg.solver.cfl_safety = _number(s["cfl_safety"], "solver.cfl_safety",
                                        lo_strict=0.0, hi=1.0)
    if "stepper" in s:
        cfg.solver.stepper = _choice(s["stepper"], "solver.stepper", _STEPPERS)
    if "fixed_dt" in s and s["fixed_dt"] is not None:
        cfg.solver.fixed_dt = _number(s["fixed_dt"], "solver.fixed_dt", lo_strict=0.0)
    if "outputs_per_decade" in s:
        cfg.solver.outputs_per_decade = _integer(
            s["outputs_per_decade"], "solver.outputs_per_decade", lo=4)
    if "collect_energies" in s:
        _require(isinstance(s["collect_energies"], bool),
                 "solver.collect_energies", "expected a boolean")
        cfg.solver.collect_energies = s["collect_energies"]
    seed = s.get("seed", {})
    _require(isinstance(seed, dict), "solver.seed", "expected an object")
    if "shape" in seed:
        cfg.solver.seed.shape = _choice(seed["shape"], "solver.seed.shape", _SEED_SHAPES)
    if "amplitude" in seed:
        cfg.solver.seed.amplitude = _number(seed["amplitude"],
                                            "solver.seed.amplitude", lo=0.0)

    out = _section(data, "outputs")
    if "directory" in out:
        _require(isinstance(out["directory"], str) and out["directory"],
                 "outputs.directory", "expected a nonempty string")
        cfg.outputs.directory = out["directory"]
    if "checkpoint_every" in out:
        cfg.outputs.checkpoint_every = _integer(
            out["checkpoint_every"], "outputs.checkpoint_every", lo=1)

    a = _section(data, "acceptance")
    if "exponent_slack" in a:
        cfg.acceptance.exponent_slack = _number(
            a["exponent_slack"], "acceptance.exponent_slack", lo_strict=0.0)
    if "ratio_threshold" in a:
        cfg.acceptance.ratio_threshold = _number(
            a["ratio_threshold"], "acceptance.ratio_threshold", lo_strict=0.0)
    if "preservation_tol" in a:
        cfg.acceptance.preservation_tol = _number(
            a["preservation_tol"], "acceptance.preservation_tol", lo_strict=0.0)
    if "check_rates" in a:
        cfg.acceptance.check_rates = _choice(a["check_rates"],
                                             "acceptance.check_rates", _CHECK_RATES)

    if "rng_seed" in data:
        cfg.rng_seed = _integer(data["rng_seed"], "rng_seed", lo=0)

    _require(cfg.ode.t_end >= cfg.solver.t_end, "ode.t_end",
             "must cover solver.t_end")
    if cfg.solver.stepper == "rk4":
        _require(cfg.solver.fixed_dt is not None, "solver.fixed_dt",
                 "required when solver.stepper is 'rk4'")
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") \
            from None
    return parse_config(data)
