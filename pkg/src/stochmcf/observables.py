"""Reconstruction of the moving curve and direct geometric diagnostics."""

from dataclasses import dataclass

import numpy as np

from . import grid
from .coefficients import coef_a, coef_b, coef_c
from .errors import DegenerateTangent


@dataclass(frozen=True)
class CurveSnapshot:
    t: float
    points: np.ndarray  # (N, 2), closed by wrap-around
    closed: bool = True


def reconstruct(state, chart):
    """Points ``X(x_j, u(t, x_j))`` of the curve at the state's time."""
    chart.check_inside(state.u, "curve height")
    return CurveSnapshot(t=state.t, points=chart.X(state.x, state.u))


def curvature_direct(snapshot):
    """Signed curvature of the point polygon by periodic central differences.

    Positive for a counter-clockwise convex curve (the unit circle gives +1).
    """
    P = snapshot.points
    d1 = grid.d1(P, axis=0)
    d2 = grid.d2(P, axis=0)
    speed2 = d1[:, 0] ** 2 + d1[:, 1] ** 2
    if np.any(speed2 <= 1e-300):
        raise DegenerateTangent("polygon tangent vanishes")
    return (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / speed2**1.5


def kappa_chart(state, chart):
    """``kappa = -(a u'' + b) / c`` from the chart coefficients."""
    x, u, p = state.x, state.u, state.up
    return -(coef_a(chart, x, u, p) * state.upp + coef_b(chart, x, u, p)) / coef_c(chart, x, u, p)


def velocity_chart(state_prev, state_next, chart):
    """Inward normal velocity ``V = -du/dt / c`` by a centred difference.

    ``c`` is evaluated at the midpoint state, where the difference is centred.
    """
    if state_prev.N != state_next.N:
        raise ValueError("states must share the grid")
    dt = state_next.t - state_prev.t
    u_mid = 0.5 * (state_prev.u + state_next.u)
    c = coef_c(chart, state_prev.x, u_mid, grid.d1(u_mid))
    return -(state_next.u - state_prev.u) / dt / c


def length_area(snapshot):
    """Polygonal length and shoelace area (positive for counter-clockwise order)."""
    P = snapshot.points
    Q = np.roll(P, -1, axis=0)
    length = float(np.sum(np.hypot(*(Q - P).T)))
    area = 0.5 * float(np.sum(P[:, 0] * Q[:, 1] - Q[:, 0] * P[:, 1]))
    return length, area


def observables_row(state, chart):
    snap = reconstruct(state, chart)
    length, area = length_area(snap)
    kap = curvature_direct(snap)
    return {"t": state.t, "length": length, "area": area, "kappa_min": float(np.min(kap)), "kappa_max": float(np.max(kap))}
