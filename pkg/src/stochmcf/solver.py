"""Explicit time integration of the truncated height equation on the periodic grid.

Three schemes share one fused coefficient evaluator:

* ``ito-euler-maruyama``: Euler-Maruyama on the Ito form (drift ``Ftilde_K``).
* ``stratonovich-heun``: Heun predictor-corrector on the Stratonovich form
  (drift ``eta * (a u'' + b)``, no Ito correction).
* ``wong-zakai-ode``: deterministic Heun with the noise replaced by the slope
  of a piecewise-linear interpolant of the path.
"""

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import grid
from .coefficients import GridCoefficients
from .errors import CFLViolation, MeshMismatch, NonFinite
from .noise import sample_path, wong_zakai
from .profiles import NoiseProfile

SCHEMES = ("ito-euler-maruyama", "stratonovich-heun", "wong-zakai-ode")


@dataclass(frozen=True)
class CurveState:
    t: float
    u: np.ndarray
    up: np.ndarray
    upp: np.ndarray
    alive: bool = True

    @classmethod
    def from_u(cls, t, u, alive=True):
        u = np.asarray(u, dtype=float)
        return cls(float(t), u, grid.d1(u), grid.d2(u), alive)

    @classmethod
    def initial(cls, N):
        return cls.from_u(0.0, np.zeros(N))

    @property
    def N(self):
        return self.u.shape[-1]

    @property
    def x(self):
        return grid.grid_points(self.N)


@dataclass(frozen=True)
class SolverConfig:
    N: int = 256
    dt: float = 1e-5
    scheme: str = "ito-euler-maruyama"
    K: int = 10
    T: float = 0.2
    seed: int = 0
    snapshot_stride: int = 0  # 0: initial and final state only
    wz_delta: Optional[float] = None
    c_cfl: float = 0.25

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.K < 1:
            raise ValueError("K must be >= 1")


@dataclass
class StoppingReport:
    triggered: dict = field(default_factory=lambda: {"sigma1": False, "sigma2": False, "sigma3": False})
    time: Optional[float] = None
    step: Optional[int] = None

    @property
    def stopped(self):
        return self.time is not None


def check_cfl(config, chart, coeffs=None):
    """Raise :class:`CFLViolation` unless ``dt <= c_cfl * dx^2 / max(a)`` over the tube."""
    if config.c_cfl > 0.25:
        raise CFLViolation("c_cfl must not exceed 0.25")
    coeffs = coeffs or GridCoefficients(chart, NoiseProfile(), config.K, grid.grid_points(config.N))
    limit = config.c_cfl * grid.spacing(config.N) ** 2 / coeffs.max_a()
    if config.dt > limit * (1 + 1e-12):
        raise CFLViolation(f"dt = {config.dt:g} exceeds the explicit stability limit {limit:.4g}")
    return limit


def monitor_sigma(state, chart, K, L=None, coeffs=None):
    """Evaluate the three stopping criteria on the current grid state.

    sigma1: ``inf_x |u| >= L(1 - 1/(1+K))``; sigma2: ``inf_x |grad S1(X)| <= 1/K``
    or ``sup_x |grad S1(X)| >= 2K``; sigma3: ``sup_x |u''| >= K``.
    """
    L = chart.L if L is None else L
    if coeffs is None:
        h = chart.local(state.x, np.clip(state.u, -chart.L, chart.L)).h
    else:
        h = coeffs.grad_S1_norm(state.u)
    return {
        "sigma1": bool(np.min(np.abs(state.u)) >= L * (1.0 - 1.0 / (1.0 + K))),
        "sigma2": bool(np.min(h) <= 1.0 / K or np.max(h) >= 2.0 * K),
        "sigma3": bool(np.max(np.abs(state.upp)) >= K),
    }


def _coeffs_for(state, config, chart, noise, coeffs):
    if coeffs is not None:
        return coeffs
    return GridCoefficients(chart, noise, config.K, state.x)


def _finish(state, u_new, dt, step):
    if not np.all(np.isfinite(u_new)):
        raise NonFinite("non-finite height after update", step)
    return CurveState.from_u(state.t + dt, u_new)


def step_ito(state, config, dB, chart=None, noise=None, coeffs=None, step=None):
    """One Euler-Maruyama step of the Ito form; ``dB`` is one increment per mode."""
    ev = _coeffs_for(state, config, chart, noise, coeffs)
    drift, amps = ev.evaluate(state.u, state.up, state.upp, ito=True)
    dB = np.atleast_1d(np.asarray(dB, dtype=float))
    u_new = state.u + config.dt * drift + np.tensordot(dB, amps, axes=1)
    return _finish(state, u_new, config.dt, step)


def _heun(state, config, ev, dB, step):
    dt = config.dt
    d0, a0 = ev.evaluate(state.u, state.up, state.upp, ito=False)
    u_pred = state.u + dt * d0 + np.tensordot(dB, a0, axes=1)
    if not np.all(np.isfinite(u_pred)):
        raise NonFinite("non-finite predictor", step)
    d1, a1 = ev.evaluate(u_pred, grid.d1(u_pred), grid.d2(u_pred), ito=False)
    u_new = state.u + 0.5 * dt * (d0 + d1) + 0.5 * np.tensordot(dB, a0 + a1, axes=1)
    return _finish(state, u_new, dt, step)


def step_stratonovich_heun(state, config, dB, chart=None, noise=None, coeffs=None, step=None):
    """One Heun step of the Stratonovich form (strong order 1/2 in general)."""
    ev = _coeffs_for(state, config, chart, noise, coeffs)
    return _heun(state, config, ev, np.atleast_1d(np.asarray(dB, dtype=float)), step)


def step_wong_zakai(state, config, interpolant, t, chart=None, noise=None, coeffs=None, step=None):
    """One deterministic Heun step with forcing ``dB^delta/dt`` frozen on the step."""
    ev = _coeffs_for(state, config, chart, noise, coeffs)
    slope = interpolant.slope(t + 0.5 * config.dt)
    return _heun(state, config, ev, np.atleast_1d(slope) * config.dt, step)


@dataclass
class Trajectory:
    snapshots: list
    report: StoppingReport
    config: SolverConfig

    @property
    def final(self):
        return self.snapshots[-1]

    def times(self):
        return np.array([s.t for s in self.snapshots])

    def heights(self):
        return np.stack([s.u for s in self.snapshots])


def run(config, chart, noise, path=None, check=True):
    """Advance from ``u = 0`` until ``T`` or the first stopping-time trigger.

    ``path`` defaults to ``sample_path(config.seed, T, dt)``; a finer path is
    subsampled. The step that crosses a threshold is kept and flagged.
    """
    N = config.N
    x = grid.grid_points(N)
    ev = GridCoefficients(chart, noise, config.K, x)
    if check:
        check_cfl(config, chart, ev)
    state = CurveState.initial(N)
    report = StoppingReport()
    snaps = [state]
    if config.T <= 0:
        return Trajectory(snaps, report, config)
    n_steps = int(round(config.T / config.dt))
    if abs(n_steps * config.dt - config.T) > 1e-9 * config.T:
        raise MeshMismatch("dt must divide T")
    if path is None:
        path = sample_path(config.seed, config.T, config.dt, modes=noise.n_modes)
    if path.n_modes != noise.n_modes:
        raise MeshMismatch("path and noise profile disagree on the number of modes")
    interp = None
    if config.scheme == "wong-zakai-ode":
        delta = config.wz_delta or config.dt
        interp = wong_zakai(path, delta)
        if abs(delta / config.dt - round(delta / config.dt)) > 1e-9:
            raise MeshMismatch("wz_delta must be a multiple of dt")
        incs = None
    else:
        incs = path.increments(config.dt) if abs(path.dt_fine - config.dt) > 1e-15 else np.diff(path.values, axis=0)
    stride = config.snapshot_stride
    for k in range(n_steps):
        if config.scheme == "ito-euler-maruyama":
            new = step_ito(state, config, incs[k], coeffs=ev, step=k)
        elif config.scheme == "stratonovich-heun":
            new = step_stratonovich_heun(state, config, incs[k], coeffs=ev, step=k)
        else:
            new = step_wong_zakai(state, config, interp, k * config.dt, coeffs=ev, step=k)
        state = replace(new, t=(k + 1) * config.dt)
        flags = monitor_sigma(state, chart, config.K, coeffs=ev)
        if any(flags.values()):
            report = StoppingReport(triggered=flags, time=state.t, step=k + 1)
            snaps.append(state)
            return Trajectory(snaps, report, config)
        if stride and (k + 1) % stride == 0 and k + 1 < n_steps:
            snaps.append(state)
    snaps.append(state)
    return Trajectory(snaps, report, config)
