"""Coefficient functions of the height equation in tubular coordinates.

The curve ``{X(x, u(t, x))}`` moves by ``V = kappa + G o dW`` iff the height
``u`` solves (Stratonovich)::

    du = (a(x,u,u') u'' + b(x,u,u')) dt - g(x,u) psi(X(x,u)) o dB

Every function here is vectorized over ``x, u, p, q`` (``p = u'``, ``q = u''``)
and evaluates the chart at ``(x, u)`` directly, so ``|u| <= L`` is required
except for the truncated quantities, which vanish before the chart is touched.
"""

from typing import NamedTuple

import numpy as np

from .geometry import local_from_frame
from .profiles import NoiseProfile


class CoeffPoint(NamedTuple):
    x: np.ndarray
    u: np.ndarray
    p: np.ndarray = 0.0
    q: np.ndarray = 0.0


def _loc(chart, x, u):
    chart.check_inside(u, "coefficient argument u")
    return chart.local(x, u)


# -- assembly from chart scalars ------------------------------------------------

def _a(loc, p):
    h2 = loc.h * loc.h
    return h2 / (1.0 + p * p * h2)


def _b(loc, p):
    h, hs = loc.h, loc.h_s
    h2 = h * h
    k_over_J = loc.kappa / loc.J
    denom = 1.0 + p * p * h2
    # <D2S2 gS1, gS1> = (kappa/J) h^2 ;  <D2S1 gS1, gS1> = h^3 h_s ;  Tr D2S1 = h h_s
    return p * h * hs - k_over_J - (p * p * k_over_J * h2 + p**3 * h2 * h * hs) / denom


def _c(loc, p):
    return np.sqrt(1.0 + p * p * loc.h * loc.h)


def _ito_terms(noise, loc, point, x, u):
    """Sum over modes of 1/2 f3 d_u f3 psi^2 + 1/2 f3^2 psi grad(psi).n."""
    f3v = -noise.g(x, u)
    df3 = -noise.g.du(x, u)
    total = 0.0
    for psi in noise.modes:
        pv = psi(point)
        gn = np.sum(psi.grad(point) * loc.normal, axis=-1)
        total = total + 0.5 * f3v * df3 * pv * pv + 0.5 * f3v * f3v * pv * gn
    return total


# -- public coefficient functions ----------------------------------------------

def coef_a(chart, x, u, p):
    """Diffusion coefficient ``|grad S1|^2 / (1 + p^2 |grad S1|^2)``."""
    return _a(_loc(chart, x, u), np.asarray(p, dtype=float))


def coef_b(chart, x, u, p):
    """Lower-order part of ``-|grad Phi| * kappa``."""
    return _b(_loc(chart, x, u), np.asarray(p, dtype=float))


def coef_c(chart, x, u, p):
    """``|grad_y Phi| = sqrt(1 + p^2 |grad S1|^2)``."""
    return _c(_loc(chart, x, u), np.asarray(p, dtype=float))


def func_G(chart, noise, x, u, p):
    return noise.g(x, u) / coef_c(chart, x, u, p)


def f3(noise, x, u):
    return -noise.g(x, u)


def f4(chart, noise, x, u, mode=0):
    """``f3 * psi_mode(X(x, u))``: the multiplicative noise amplitude."""
    chart.check_inside(u, "coefficient argument u")
    return f3(noise, x, u) * noise.modes[mode](chart.X(x, u))


def ito_correction_F2(chart, noise, x, u, p):
    """``b`` plus the Stratonovich-to-Ito correction of the noise term."""
    loc = _loc(chart, x, u)
    point = chart.X(x, u)
    return _b(loc, np.asarray(p, dtype=float)) + _ito_terms(noise, loc, point, x, u)


def drift_Ftilde(chart, noise, x, u, p, q):
    """Ito drift ``a q + F2``."""
    return coef_a(chart, x, u, p) * np.asarray(q, dtype=float) + ito_correction_F2(chart, noise, x, u, p)


# -- cut-offs ------------------------------------------------------------------

def smoothstep(t):
    """C-infinity ramp: 0 for t <= 0, 1 for t >= 1, built from exp(-1/t)."""
    t = np.asarray(t, dtype=float)
    flat = np.atleast_1d(t)
    out = (flat >= 1.0).astype(float)
    mid = (flat > 0.0) & (flat < 1.0)
    if mid.any():
        tm = flat[mid]
        f = np.exp(-1.0 / tm)
        g = np.exp(-1.0 / (1.0 - tm))
        out[mid] = f / (f + g)
    return out.reshape(t.shape)


def cutoff_eta1(K, L, u):
    """1 for |u| <= L(1 - 1/(1+K)), 0 for |u| >= L(1 - 1/(2(1+K)))."""
    lo = L * (1.0 - 1.0 / (1.0 + K))
    hi = L * (1.0 - 1.0 / (2.0 * (1.0 + K)))
    return 1.0 - smoothstep((np.abs(u) - lo) / (hi - lo))


def cutoff_eta2(K, v):
    """1 for |v| in [1/K, K], 0 for |v| <= 1/(2K) or |v| >= 2K."""
    av = np.abs(v)
    lo = 1.0 / (2.0 * K)
    return smoothstep((av - lo) / lo) * (1.0 - smoothstep((av - K) / K))


def cutoff_eta3(K, q):
    """1 for |q| <= K, 0 for |q| >= 2K; slope bounded by 2/K."""
    return 1.0 - smoothstep((np.abs(q) - K) / K)


def _truncation(chart, K, x, u, q):
    """``(eta1(u), eta2(|grad S1|) * eta3(q), loc, point)`` with u clipped into the tube."""
    e1 = cutoff_eta1(K, chart.L, u)
    uc = np.clip(u, -chart.L, chart.L)
    loc = chart.local(x, uc)
    return e1, cutoff_eta2(K, loc.h) * cutoff_eta3(K, q), loc, uc


def drift_Ftilde_K(chart, noise, K, x, u, p, q):
    """Truncated drift ``eta1(u) eta2(|grad S1(X)|) eta3(q) * Ftilde``; defined for all u."""
    x, u, p, q = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, u, p, q)))
    e1, e23, loc, uc = _truncation(chart, K, x, u, q)
    point = chart.X(x, uc)
    F = _a(loc, p) * q + _b(loc, p) + _ito_terms(noise, loc, point, x, uc)
    return np.where(e1 > 0, e1 * e23 * F, 0.0)


def noise_amp_f3K(noise, K, L, x, u):
    return cutoff_eta1(K, L, u) * f3(noise, x, u)


class GridCoefficients:
    """Fused, cached evaluation of the truncated equation on a fixed grid.

    Precomputes the base-curve frame at the grid points so one call per time
    step yields the drift and per-mode noise amplitudes in a single pass.
    """

    def __init__(self, chart, noise: NoiseProfile, K, x):
        self.chart = chart
        self.noise = noise
        self.K = K
        self.x = np.asarray(x, dtype=float)
        self.frame = chart.curve.frame(self.x)
        self.noise_free = noise.is_zero()

    def _points(self, u):
        return self.frame.point + u[..., None] * self.frame.normal

    def evaluate(self, u, p, q, ito=True):
        """Return ``(drift, amplitudes)``; amplitudes has shape ``(modes, N)``.

        ``ito=True`` gives ``Ftilde_K`` (with the Ito correction); otherwise
        the Stratonovich drift ``eta * (a q + b)``.
        """
        L, K = self.chart.L, self.K
        e1 = cutoff_eta1(K, L, u)
        uc = np.clip(u, -L, L)
        loc = local_from_frame(self.frame, uc)
        e = e1 * cutoff_eta2(K, loc.h) * cutoff_eta3(K, q)
        F = _a(loc, p) * q + _b(loc, p)
        m = self.noise.n_modes
        if self.noise_free:
            amps = np.zeros((m,) + np.shape(u))
        else:
            point = self._points(uc)
            f3v = -self.noise.g(self.x, uc)
            psis = [psi(point) for psi in self.noise.modes]
            amps = np.stack([e1 * f3v * pv for pv in psis])
            if ito:
                df3 = -self.noise.g.du(self.x, uc)
                for psi, pv in zip(self.noise.modes, psis):
                    gn = np.sum(psi.grad(point) * loc.normal, axis=-1)
                    F = F + 0.5 * f3v * df3 * pv * pv + 0.5 * f3v * f3v * pv * gn
        drift = np.where(e1 > 0, e * F, 0.0)
        return drift, amps

    def grad_S1_norm(self, u):
        return local_from_frame(self.frame, np.clip(u, -self.chart.L, self.chart.L)).h

    def max_a(self, us=None):
        """Largest diffusion coefficient over the tube (p = 0 maximizes it)."""
        L = self.chart.L
        us = np.linspace(-L, L, 9) if us is None else us
        return max(float(np.max(_a(local_from_frame(self.frame, np.full_like(self.x, v)), 0.0))) for v in us)
