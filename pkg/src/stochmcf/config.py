"""Run configuration: YAML parsing, validation and canonical serialization.

Every violated constraint is collected before anything is raised, so a bad
file is reported in one pass. :func:`serialize` emits the fully defaulted
mapping with sorted keys; ``serialize(parse(serialize(parse(text))))`` is a
fixed point.
"""

from dataclasses import asdict, dataclass, field
from typing import Optional

import yaml

from . import grid
from .coefficients import GridCoefficients
from .errors import ConfigError, StochMCFError
from .geometry import build_chart, curve_from_spec
from .norms import sobolev_violations
from .profiles import noise_from_spec
from .solver import SCHEMES

EXPERIMENTS = ("simulate", "converge", "contraction", "kernel-bound", "ensemble")


@dataclass
class SolverSpec:
    N: int = 256
    dt: float = 1e-5
    scheme: str = "ito-euler-maruyama"
    K: int = 10
    T: float = 0.2
    seed: int = 0
    wz_delta: Optional[float] = None
    c_cfl: float = 0.25


@dataclass
class NormSpec:
    p: float = 6.0
    alpha: float = 0.2
    alpha1: float = 0.2
    delta: float = 0.1


@dataclass
class OutputSpec:
    dir: str = "out"
    snapshot_stride: int = 0
    json: bool = False
    frames: bool = False


@dataclass
class RunConfig:
    experiment: str = "simulate"
    curve: dict = field(default_factory=lambda: {"kind": "circle", "radius": 1.0, "center": [0.0, 0.0], "phase": 0.0})
    L: float = 0.4
    noise: dict = field(default_factory=lambda: {"g": {"kind": "const", "gamma": 0.0}, "psi": {"kind": "const-on-tube", "value": 1.0}})
    solver: SolverSpec = field(default_factory=SolverSpec)
    norms: NormSpec = field(default_factory=NormSpec)
    output: OutputSpec = field(default_factory=OutputSpec)
    # experiment-specific blocks; missing keys take the defaults below
    ensemble: dict = field(default_factory=lambda: {"members": 8, "workers": 1})
    converge: dict = field(default_factory=lambda: {"Ns": [64, 128, 256], "space_dt": 1e-5, "space_T": 0.05, "time_N": 512, "dts": [1e-5, 5e-6, 2.5e-6], "time_T": 0.1})
    contraction: dict = field(default_factory=lambda: {"N": 64, "dt": 1e-4, "Ts": [0.02, 0.01, 0.005], "pairs": 10, "seeds": 50})
    kernel_bound: dict = field(default_factory=lambda: {"N": 256, "t_min": 1e-3, "t_max": 1e-1, "method": "spectral", "K2": 0.2})

    def to_dict(self):
        return asdict(self)


_SECTIONS = {"solver": SolverSpec, "norms": NormSpec, "output": OutputSpec}
_BLOCKS = ("ensemble", "converge", "contraction", "kernel_bound")


def _coerce(cls, raw, name, errors):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        errors.append(f"section '{name}' must be a mapping")
        return cls()
    known = cls.__dataclass_fields__
    for k in raw:
        if k not in known:
            errors.append(f"unknown key '{name}.{k}'")
    kw = {}
    for k, f in known.items():
        if k not in raw:
            continue
        v = raw[k]
        default = f.default
        try:
            if isinstance(default, bool):
                if not isinstance(v, bool):
                    raise TypeError
                kw[k] = v
            elif isinstance(default, int):
                if isinstance(v, bool) or int(v) != v:
                    raise TypeError
                kw[k] = int(v)
            elif isinstance(default, float) or default is None:
                kw[k] = None if v is None else float(v)
            else:
                kw[k] = str(v)
        except (TypeError, ValueError):
            errors.append(f"'{name}.{k}' has invalid value {v!r}")
    return cls(**kw)


def _validate(cfg, errors):
    s = cfg.solver
    if cfg.experiment not in EXPERIMENTS:
        errors.append(f"experiment must be one of {', '.join(EXPERIMENTS)} (got {cfg.experiment!r})")
    if s.scheme not in SCHEMES:
        errors.append(f"scheme must be one of {', '.join(SCHEMES)} (got {s.scheme!r})")
    if s.N < 4:
        errors.append(f"N>=4 required (got {s.N})")
    if not s.dt > 0:
        errors.append("dt>0 required")
    if not s.T > 0:
        errors.append("T>0 required")
    if s.K < 1:
        errors.append("K>=1 required")
    if not 0 < s.c_cfl <= 0.25:
        errors.append("c_cfl in (0,1/4] required")
    if not cfg.L > 0:
        errors.append("L>0 required")


def _validate_rest(cfg, errors):
    n = cfg.norms
    errors.extend(sobolev_violations(n.p, n.alpha, n.alpha1, n.delta))
    if cfg.output.snapshot_stride < 0:
        errors.append("output.snapshot_stride>=0 required")


def _check_model(cfg, errors):
    """Build the chart and noise profile and apply the CFL guard."""
    s = cfg.solver
    try:
        chart = build_chart(curve_from_spec(cfg.curve), cfg.L)
        noise = noise_from_spec(cfg.noise)
    except (StochMCFError, ValueError, KeyError, OSError) as exc:
        errors.append(f"model: {exc}")
        return
    if cfg.experiment in ("simulate", "ensemble") and not errors:
        ev = GridCoefficients(chart, noise, s.K, grid.grid_points(s.N))
        limit = s.c_cfl * grid.spacing(s.N) ** 2 / ev.max_a()
        if s.dt > limit * (1 + 1e-12):
            errors.append(f"CFL: dt={s.dt:g} exceeds the explicit stability limit {limit:.4g} at N={s.N}")


def from_mapping(data):
    """Validate a mapping; raise :class:`ConfigError` listing every violation."""
    errors = []
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(["configuration must be a mapping"])
    top = set(RunConfig.__dataclass_fields__)
    for k in data:
        if k not in top:
            errors.append(f"unknown key '{k}'")
    cfg = RunConfig()
    cfg.experiment = str(data.get("experiment", cfg.experiment))
    if "curve" in data:
        cfg.curve = dict(data["curve"])
    if "noise" in data:
        cfg.noise = dict(data["noise"] or {})
    if "L" in data:
        try:
            cfg.L = float(data["L"])
        except (TypeError, ValueError):
            errors.append(f"'L' has invalid value {data['L']!r}")
    for name, cls in _SECTIONS.items():
        setattr(cfg, name, _coerce(cls, data.get(name), name, errors))
    for name in _BLOCKS:
        if name in data:
            block = getattr(cfg, name)
            raw = data[name] or {}
            if not isinstance(raw, dict):
                errors.append(f"section '{name}' must be a mapping")
                continue
            for k in raw:
                if k not in block:
                    errors.append(f"unknown key '{name}.{k}'")
            block.update({k: v for k, v in raw.items() if k in block})
    structural = list(errors)
    _validate(cfg, structural)
    if not structural:
        _check_model(cfg, structural)
    errors[:] = structural
    _validate_rest(cfg, errors)
    if errors:
        raise ConfigError(errors)
    return cfg


def parse_config(text):
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"YAML syntax: {exc}"]) from exc
    return from_mapping(data)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def serialize(cfg):
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True, default_flow_style=False)
