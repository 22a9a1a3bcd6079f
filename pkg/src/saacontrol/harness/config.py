"""Study configuration: INI-style file with fixed sections, plus ``section.key=value`` overrides."""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from ..dynamics import ControlGrid, ProblemDef
from ..problems import OscillatorConfig, VaccinationConfig, make_oscillator, make_vaccination
from ..regularizer import RegularizerSpec
from ..sampling import ParameterBox
from ..solver import SolverOptions

__all__ = ["StudyConfig", "ConfigError", "load_config", "apply_overrides", "build_problem", "BuiltProblem"]

PROBLEMS = ("oscillator", "vaccination")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class StudyConfig:
    problem: str = "oscillator"
    # None means "use the problem's default"
    alpha: float | None = None
    beta: float | None = None
    lo: float | None = None
    hi: float | None = None
    sigma: float | None = None
    t_final: float | None = None
    q: int = 50
    steps_per_interval: int = 1
    solver: SolverOptions = field(default_factory=SolverOptions)
    n_grid: tuple = (4, 8, 16, 32, 64, 128, 256)
    replications: int = 50
    n_ref: int = 4096
    seed: int = 20240501
    threads: int = 1
    out: str = "out"

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}; expected one of {PROBLEMS}")
        grid = tuple(int(n) for n in self.n_grid)
        if not grid or any(n < 1 for n in grid) or list(grid) != sorted(set(grid)):
            raise ConfigError("n_grid must be strictly ascending positive integers")
        object.__setattr__(self, "n_grid", grid)
        if self.replications < 2:
            raise ConfigError("replications must be at least 2")
        if self.n_ref <= max(grid):
            raise ConfigError("n_ref must exceed max(n_grid)")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    def problem_key(self) -> str:
        """Hash of everything that determines the reference problem."""
        d = {k: v for k, v in self.to_dict().items() if k not in ("n_grid", "replications", "threads", "out")}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n_grid"] = list(self.n_grid)
        return d


# section -> {key: (StudyConfig field or "solver.<field>", parser)}
def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _grid(s: str) -> tuple:
    return tuple(int(t) for t in s.replace(",", " ").split())


SCHEMA = {
    "problem": {"name": ("problem", str), "sigma": ("sigma", float), "t_final": ("t_final", float)},
    "regularizer": {"alpha": ("alpha", float), "beta": ("beta", float), "lo": ("lo", float), "hi": ("hi", float)},
    "discretization": {"q": ("q", int), "steps_per_interval": ("steps_per_interval", int), "t_final": ("t_final", float)},
    "solver": {
        "tol": ("solver.tol", float),
        "max_iters": ("solver.max_iters", int),
        "step_mode": ("solver.step_mode", str),
        "step_size": ("solver.step_size", float),
        "shrink": ("solver.shrink", float),
        "growth": ("solver.growth", float),
        "acceleration": ("solver.acceleration", _bool),
    },
    "study": {
        "n_grid": ("n_grid", _grid),
        "replications": ("replications", int),
        "n_ref": ("n_ref", int),
        "seed": ("seed", int),
        "threads": ("threads", int),
        "out": ("out", str),
    },
}


def _apply(cfg: StudyConfig, section: str, key: str, raw: str) -> StudyConfig:
    if section not in SCHEMA:
        raise ConfigError(f"unknown config section [{section}]")
    if key not in SCHEMA[section]:
        raise ConfigError(f"unknown key {key!r} in section [{section}]")
    target, parse = SCHEMA[section][key]
    try:
        value = parse(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {section}.{key}: {exc}") from exc
    try:
        if target.startswith("solver."):
            return replace(cfg, solver=replace(cfg.solver, **{target[7:]: value}))
        return replace(cfg, **{target: value})
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{section}.{key}: {exc}") from exc


def load_config(path=None, overrides=(), base: StudyConfig | None = None) -> StudyConfig:
    cfg = base or StudyConfig()
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        text = Path(path).read_text()
        try:
            parser.read_string(text, source=str(path))
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from exc
        for section in parser.sections():
            for key, raw in parser.items(section):
                cfg = _apply(cfg, section, key, raw)
    return apply_overrides(cfg, overrides)


def apply_overrides(cfg: StudyConfig, overrides) -> StudyConfig:
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        lhs, raw = item.split("=", 1)
        section, key = lhs.strip().split(".", 1)
        cfg = _apply(cfg, section, key, raw.strip())
    return cfg


@dataclass(frozen=True, eq=False)
class BuiltProblem:
    problem: ProblemDef
    spec: RegularizerSpec
    grid: ControlGrid
    box: ParameterBox
    settings: dict


def build_problem(cfg: StudyConfig) -> BuiltProblem:
    """Instantiate the configured benchmark with overrides applied."""
    if cfg.problem == "oscillator":
        kw = {"q": cfg.q, "steps_per_interval": cfg.steps_per_interval}
        for name in ("alpha", "beta", "t_final"):
            if getattr(cfg, name) is not None:
                kw[name] = getattr(cfg, name)
        if cfg.sigma is not None:
            raise ConfigError("sigma applies only to the vaccination problem")
        pcfg = OscillatorConfig(**kw)
        problem = make_oscillator(pcfg)
    else:
        kw = {"q": cfg.q, "steps_per_interval": cfg.steps_per_interval}
        for name in ("alpha", "beta", "t_final", "sigma"):
            if getattr(cfg, name) is not None:
                kw[name] = getattr(cfg, name)
        pcfg = VaccinationConfig(**kw)
        problem = make_vaccination(pcfg)
    spec = pcfg.regularizer
    if cfg.lo is not None or cfg.hi is not None:
        lo = spec.lo if cfg.lo is None else np.full(spec.m, cfg.lo)
        hi = spec.hi if cfg.hi is None else np.full(spec.m, cfg.hi)
        try:
            spec = RegularizerSpec(spec.alpha, spec.beta, lo, hi)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    settings = {f.name: getattr(pcfg, f.name) for f in fields(pcfg)}
    settings.update(lo=spec.lo.tolist(), hi=spec.hi.tolist())
    return BuiltProblem(problem, spec, pcfg.grid, pcfg.box, settings)
