"""Discrete fractional Sobolev (Slobodeckij) norms on ``[0, T] x M``.

``M`` is the periodic parameter circle ``[0, 2pi)`` with the wrapped metric.
Fields are sampled on a uniform time grid ``t_k = k dt`` and the spatial grid
``x_j = 2 pi j / N``. Single integrals use the trapezoid rule in time and the
(spectrally exact) rectangle rule in space; double integrals are double sums
with the singular diagonal cells left out. For the exponents admitted by
:class:`SobolevParams` the integrands vanish on the diagonal, so the omitted
cells only contribute at higher order in the grid spacing.
"""

from dataclasses import dataclass

import numpy as np

from . import grid
from .errors import ConfigError, DegenerateGrid, EmptyEnsemble


@dataclass(frozen=True)
class SobolevParams:
    """Exponents of the solution space.

    Parameters
    ----------
    p : float
        Integrability exponent, ``p > 4``.
    alpha : float
        Spatial smoothness excess, ``0 < alpha < 1/4`` and ``alpha p > 1/2``.
    alpha1 : float
        Temporal smoothness, ``0 < alpha1 < (1 - delta)/4`` and ``alpha1 p > 1``.
    delta : float
        Auxiliary exponent in ``(0, 1)``.
    """

    p: float = 6.0
    alpha: float = 0.2
    alpha1: float = 0.2
    delta: float = 0.1

    def __post_init__(self):
        errs = self.violations()
        if errs:
            raise ConfigError(errs)

    def violations(self):
        return sobolev_violations(self.p, self.alpha, self.alpha1, self.delta)

    @property
    def gamma1_max(self):
        """Supremum of admissible Hoelder exponents in time (``alpha1 - 1/p``)."""
        return self.alpha1 - 1.0 / self.p

    @property
    def gamma2_max(self):
        return 2.0 * self.alpha - 1.0 / self.p


def sobolev_violations(p, alpha, alpha1, delta):
    """Return one named diagnostic per violated hypothesis (empty if valid)."""
    errs = []
    if not p > 4:
        errs.append(f"p>4 required (got p={p:g})")
    if not 0 < alpha < 0.25:
        errs.append(f"alpha in (0,1/4) required (got alpha={alpha:g})")
    if not 0 < delta < 1:
        errs.append(f"delta in (0,1) required (got delta={delta:g})")
    if not 0 < alpha1 < (1 - delta) / 4:
        errs.append(f"alpha1 in (0,(1-delta)/4) required (got alpha1={alpha1:g}, delta={delta:g})")
    if not alpha1 * p > 1:
        errs.append(f"alpha1*p>1 required (got {alpha1 * p:g})")
    if not alpha * p > 0.5:
        errs.append(f"alpha*p>1/2 required (got {alpha * p:g})")
    return errs


@dataclass(frozen=True)
class SpaceTimeField:
    """``values[k, j] = u(k dt, x_j)``."""

    values: np.ndarray
    dt: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError("values must have shape (time steps + 1, N)")
        if not np.all(np.isfinite(v)):
            raise ValueError("field has non-finite entries")
        object.__setattr__(self, "values", v)

    @property
    def N(self):
        return self.values.shape[1]

    @property
    def n_steps(self):
        return self.values.shape[0] - 1

    @property
    def T(self):
        return self.dt * self.n_steps

    @property
    def dx(self):
        return grid.spacing(self.N)

    def __add__(self, other):
        return SpaceTimeField(self.values + other.values, self.dt)

    def __sub__(self, other):
        return SpaceTimeField(self.values - other.values, self.dt)

    def __mul__(self, lam):
        return SpaceTimeField(lam * self.values, self.dt)

    __rmul__ = __mul__

    @classmethod
    def from_function(cls, fn, N, T, n_steps):
        t = np.linspace(0.0, T, n_steps + 1)
        x = grid.grid_points(N)
        return cls(np.asarray(fn(t[:, None], x[None, :]), dtype=float) + np.zeros((n_steps + 1, N)), T / n_steps)


def _check(field):
    if field.N < 4:
        raise DegenerateGrid(f"need at least 4 spatial points, got {field.N}")
    if field.n_steps < 1:
        raise DegenerateGrid("need at least two time levels")


def _trap_weights(n_points, dt):
    w = np.full(n_points, dt)
    w[0] = w[-1] = 0.5 * dt
    return w


def _derivs(values):
    """Stack ``(u, u', u'')`` along a new leading axis."""
    return np.stack([values, grid.d1(values), grid.d2(values)])


def _periodic_distance(N):
    j = np.arange(N)
    d = grid.spacing(N) * j
    return np.minimum(d, 2 * np.pi - d)


def _space_double_sum(q, expo, p):
    """``dx^2 sum_{j != l} |q_j - q_l|^p / d(x_j, x_l)^expo`` for each row of q."""
    N = q.shape[-1]
    dist = _periodic_distance(N)
    dx = grid.spacing(N)
    out = np.zeros(q.shape[:-1])
    for lag in range(1, N):
        diff = np.abs(q - np.roll(q, lag, axis=-1))
        out += np.sum(diff**p, axis=-1) / dist[lag] ** expo
    return out * dx * dx


def norm_space_slobodeckij(field, params):
    """``L^p`` in time of the spatial ``W_p^{2+2 alpha}`` norm.

    Per time slice: the ``L^p(M)`` norms of ``u, u', u''`` (to the power p) plus
    the Slobodeckij double integral of ``u''`` with exponent ``1 + 2 alpha p``.
    """
    _check(field)
    p = params.p
    D = _derivs(field.values)
    dx = field.dx
    lp = np.sum(np.abs(D) ** p, axis=(0, 2)) * dx
    semi = _space_double_sum(D[2], 1.0 + 2.0 * params.alpha * p, p)
    w = _trap_weights(field.n_steps + 1, field.dt)
    return float(np.dot(w, lp + semi)) ** (1.0 / p)


def _lp_space_time(D, w, dx, p):
    return float(np.dot(w, np.sum(np.abs(D) ** p, axis=(0, 2)) * dx)) ** (1.0 / p)


def time_seminorm(field, params):
    """``(sum_i int_M int int |D^i (u(t) - u(s))|^p / |t - s|^{1 + alpha1 p})^{1/p}``."""
    _check(field)
    p = params.p
    D = _derivs(field.values)
    w = _trap_weights(field.n_steps + 1, field.dt)
    expo = 1.0 + params.alpha1 * p
    total = 0.0
    for lag in range(1, field.n_steps + 1):
        diff = np.abs(D[:, lag:, :] - D[:, :-lag, :]) ** p
        per_t = np.sum(diff, axis=(0, 2)) * field.dx
        total += 2.0 * np.dot(w[lag:] * w[:-lag], per_t) / (lag * field.dt) ** expo
    return total ** (1.0 / p)


def norm_time_slobodeckij(field, params):
    """``||u||_{W_p^{0,2}} + `` the temporal Slobodeckij seminorm with ``alpha1``."""
    _check(field)
    D = _derivs(field.values)
    base = _lp_space_time(D, _trap_weights(field.n_steps + 1, field.dt), field.dx, params.p)
    return base + time_seminorm(field, params)


def norm_XT(field, params):
    return norm_space_slobodeckij(field, params) + norm_time_slobodeckij(field, params)


def expectation_norm(fields, params):
    """Monte Carlo ``(E ||u||^p)^{1/p}`` over an ensemble of fields."""
    fields = list(fields)
    if not fields:
        raise EmptyEnsemble("expectation over an empty ensemble")
    vals = np.array([norm_XT(f, params) for f in fields])
    return float(np.mean(vals**params.p)) ** (1.0 / params.p)


def holder_seminorm(field, gamma, axis="t"):
    """``max |u(a) - u(b)| / |a - b|^gamma`` over grid pairs along ``axis``.

    ``axis="t"`` uses time differences at every x; ``axis="x"`` uses the wrapped
    spatial distance at every t.
    """
    v = field.values
    best = 0.0
    if axis == "t":
        for lag in range(1, field.n_steps + 1):
            diff = np.max(np.abs(v[lag:] - v[:-lag]))
            best = max(best, diff / (lag * field.dt) ** gamma)
    elif axis == "x":
        dist = _periodic_distance(field.N)
        for lag in range(1, field.N):
            diff = np.max(np.abs(v - np.roll(v, lag, axis=1)))
            best = max(best, diff / dist[lag] ** gamma)
    else:
        raise ValueError("axis must be 't' or 'x'")
    return float(best)
