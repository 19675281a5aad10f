"""Initial curves and the tubular (signed-distance) chart around them.

The reference manifold M is the periodic interval [0, 2*pi). A closed curve
``X0: M -> R^2`` (counter-clockwise) with outward unit normal ``n`` defines the
chart ``X(s, d) = X0(s) + d * n(s)`` on ``M x [-L, L]``. Its inverse
``S(y) = (S1(y), S2(y))`` returns the foot-point parameter and the signed
distance (positive outside the curve).

All chart derivatives are closed-form in terms of the base curve's speed
``sigma = |X0'|`` and signed curvature ``kappa`` (positive for a convex
counter-clockwise curve)::

    grad S1 = tau / (sigma * J),  grad S2 = n,   J = 1 + kappa * d
    D^2 S2  = kappa / J * tau tau^T
    D^2 S1  = h h_s tau tau^T + h_d (n tau^T + tau n^T),   h = 1 / (sigma J)
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import NotEmbedded, OutsideTube, TubeTooWide

TWO_PI = 2.0 * np.pi


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _dot(a, b):
    return a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1]


class CurveFrame(NamedTuple):
    point: np.ndarray
    tangent: np.ndarray  # unit tangent tau
    normal: np.ndarray  # unit outward normal n
    speed: np.ndarray  # sigma = |X0'|
    speed_s: np.ndarray  # d sigma / ds
    kappa: np.ndarray
    kappa_s: np.ndarray


class ClosedCurve:
    """A smooth closed curve parametrized over [0, 2*pi)."""

    kind = "abstract"

    def derivatives(self, s):
        """Return ``(X0, X0', X0'', X0''')`` at parameters ``s``, each ``(..., 2)``."""
        raise NotImplementedError

    @property
    def params(self):
        return {}

    def point(self, s):
        return self.derivatives(np.asarray(s, dtype=float))[0]

    def normal(self, s):
        return self.frame(s).normal

    def frame(self, s):
        X, X1, X2, X3 = self.derivatives(np.asarray(s, dtype=float))
        speed = np.sqrt(_dot(X1, X1))
        tangent = X1 / speed[..., None]
        normal = np.stack([tangent[..., 1], -tangent[..., 0]], axis=-1)
        speed_s = _dot(X1, X2) / speed
        c12 = _cross(X1, X2)
        kappa = c12 / speed**3
        kappa_s = _cross(X1, X3) / speed**3 - 3.0 * c12 * speed_s / speed**4
        return CurveFrame(X, tangent, normal, speed, speed_s, kappa, kappa_s)

    def max_abs_curvature(self, samples=4096):
        s = TWO_PI * np.arange(samples) / samples
        return float(np.max(np.abs(self.frame(s).kappa)))


@dataclass(frozen=True)
class CircleCurve(ClosedCurve):
    center: tuple = (0.0, 0.0)
    radius: float = 1.0
    phase: float = 0.0
    kind = "analytic-circle"

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("circle radius must be positive")

    @property
    def params(self):
        return {"center": list(self.center), "radius": self.radius, "phase": self.phase}

    def derivatives(self, s):
        th = np.asarray(s, dtype=float) + self.phase
        c, sn = np.cos(th), np.sin(th)
        r = self.radius
        cx, cy = self.center
        X = np.stack([cx + r * c, cy + r * sn], axis=-1)
        X1 = np.stack([-r * sn, r * c], axis=-1)
        X2 = np.stack([-r * c, -r * sn], axis=-1)
        X3 = np.stack([r * sn, -r * c], axis=-1)
        return X, X1, X2, X3


@dataclass(frozen=True)
class EllipseCurve(ClosedCurve):
    a: float = 2.0
    b: float = 1.0
    center: tuple = (0.0, 0.0)
    kind = "analytic-ellipse"

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError("ellipse semi-axes must be positive")

    @property
    def params(self):
        return {"a": self.a, "b": self.b, "center": list(self.center)}

    def derivatives(self, s):
        s = np.asarray(s, dtype=float)
        c, sn = np.cos(s), np.sin(s)
        a, b = self.a, self.b
        cx, cy = self.center
        X = np.stack([cx + a * c, cy + b * sn], axis=-1)
        X1 = np.stack([-a * sn, b * c], axis=-1)
        X2 = np.stack([-a * c, -b * sn], axis=-1)
        X3 = np.stack([a * sn, -b * c], axis=-1)
        return X, X1, X2, X3


class SampledCurve(ClosedCurve):
    """Closed curve through the given samples, by trigonometric interpolation.

    Samples are taken at equispaced parameters ``2*pi*j/m``; clockwise input
    is reversed so the chart always sees a counter-clockwise curve.
    """

    kind = "sampled-closed-curve"

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 8:
            raise ValueError("sampled curve needs an (m, 2) array with m >= 8")
        if np.allclose(pts[0], pts[-1]):
            pts = pts[:-1]
        area = 0.5 * np.sum(pts[:, 0] * np.roll(pts[:, 1], -1) - np.roll(pts[:, 0], -1) * pts[:, 1])
        if area < 0:
            pts = pts[::-1].copy()
        self.samples = pts
        m = pts.shape[0]
        coef = np.fft.fft(pts, axis=0) / m
        k = np.fft.fftfreq(m, d=1.0 / m)
        if m % 2 == 0:
            # split the Nyquist mode symmetrically so the interpolant is real
            nyq = coef[m // 2].copy()
            coef = np.concatenate([coef, nyq[None, :] / 2.0])
            coef[m // 2] = nyq / 2.0
            k = np.concatenate([k, [m / 2.0]])
            k[m // 2] = -m / 2.0
        self._coef = coef
        self._k = k

    @property
    def params(self):
        return {"points": self.samples.tolist()}

    def derivatives(self, s):
        s = np.asarray(s, dtype=float)
        phase = np.exp(1j * s[..., None] * self._k)
        out = []
        for order in range(4):
            w = (1j * self._k) ** order
            out.append(np.real(np.einsum("...k,kd->...d", phase * w, self._coef)))
        return tuple(out)


def curve_from_spec(spec):
    """Build a curve from a config mapping (``kind`` plus parameters)."""
    kind = spec.get("kind", "analytic-circle")
    if kind in ("analytic-circle", "circle"):
        return CircleCurve(
            center=tuple(spec.get("center", (0.0, 0.0))),
            radius=float(spec.get("radius", 1.0)),
            phase=float(spec.get("phase", 0.0)),
        )
    if kind in ("analytic-ellipse", "ellipse"):
        return EllipseCurve(a=float(spec["a"]), b=float(spec["b"]), center=tuple(spec.get("center", (0.0, 0.0))))
    if kind in ("sampled-closed-curve", "sampled"):
        if "points" in spec:
            return SampledCurve(spec["points"])
        return SampledCurve(np.loadtxt(spec["path"], delimiter=",", ndmin=2))
    raise ValueError(f"unknown curve kind {kind!r}")


class ChartLocal(NamedTuple):
    """Scalar chart data at (s, d); enough to assemble every coefficient."""

    h: np.ndarray  # |grad S1|
    h_s: np.ndarray
    h_d: np.ndarray
    kappa: np.ndarray
    J: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray


def local_from_frame(fr, d):
    """Chart scalars from a precomputed base-curve frame (see :class:`ChartLocal`)."""
    d = np.asarray(d, dtype=float)
    J = 1.0 + fr.kappa * d
    sJ = fr.speed * J
    h = 1.0 / sJ
    h_s = -(fr.speed_s * J + fr.speed * fr.kappa_s * d) / sJ**2
    h_d = -fr.kappa / (fr.speed * J**2)
    return ChartLocal(h, h_s, h_d, fr.kappa, J, fr.tangent, fr.normal)


def _segments_intersect(P):
    """True if the closed polygon P (m, 2) has two non-adjacent crossing edges."""
    A = P
    B = np.roll(P, -1, axis=0)
    m = len(P)

    def orient(p, q, r):
        return (q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1]) - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0])

    Ai, Bi = A[:, None, :], B[:, None, :]
    Aj, Bj = A[None, :, :], B[None, :, :]
    o1 = orient(Ai, Bi, Aj)
    o2 = orient(Ai, Bi, Bj)
    o3 = orient(Aj, Bj, Ai)
    o4 = orient(Aj, Bj, Bi)
    cross = (o1 * o2 < 0) & (o3 * o4 < 0)
    idx = np.arange(m)
    sep = np.abs(idx[:, None] - idx[None, :])
    valid = (sep > 1) & (sep < m - 1)
    return bool(np.any(cross & valid))


@dataclass(frozen=True)
class TubularChart:
    """Diffeomorphism ``X: M x [-L, L] -> R^2`` and its inverse ``S``."""

    curve: ClosedCurve
    L: float
    _seed_s: np.ndarray = field(repr=False, compare=False, default=None)
    _seed_pts: np.ndarray = field(repr=False, compare=False, default=None)

    def X(self, s, d):
        fr = self.curve.frame(s)
        return fr.point + np.asarray(d, dtype=float)[..., None] * fr.normal

    def local(self, s, d):
        """Chart scalars at parameter ``s`` and signed distance ``d`` (no tube check)."""
        return local_from_frame(self.curve.frame(s), d)

    def derivatives_at(self, s, d):
        """``(grad_S1, grad_S2, hess_S1, hess_S2)`` at the point ``X(s, d)``."""
        loc = self.local(s, d)
        t, n = loc.tangent, loc.normal
        tt = t[..., :, None] * t[..., None, :]
        sym = n[..., :, None] * t[..., None, :] + t[..., :, None] * n[..., None, :]
        grad1 = loc.h[..., None] * t
        grad2 = n
        hess1 = (loc.h * loc.h_s)[..., None, None] * tt + loc.h_d[..., None, None] * sym
        hess2 = (loc.kappa / loc.J)[..., None, None] * tt
        return grad1, grad2, hess1, hess2

    def S(self, y):
        """Inverse chart: ``(s, d)`` for points ``y`` of shape ``(..., 2)``."""
        y = np.asarray(y, dtype=float)
        if isinstance(self.curve, CircleCurve):
            cx, cy = self.curve.center
            dx, dy = y[..., 0] - cx, y[..., 1] - cy
            s = np.mod(np.arctan2(dy, dx) - self.curve.phase, TWO_PI)
            return s, np.hypot(dx, dy) - self.curve.radius
        return self.project(y)

    def project(self, y, tol=1e-12, max_iter=50):
        """Closest-point projection onto the base curve by damped Newton.

        Minimizes ``f(s) = |y - X0(s)|^2 / 2`` from the nearest of a dense set
        of curve samples. Returns ``(s, d)`` with ``d`` the signed distance.
        """
        y = np.asarray(y, dtype=float)
        shape = y.shape[:-1]
        yf = y.reshape(-1, 2)
        s = np.empty(len(yf))
        seed_s, seed_pts = self._seeds()
        for lo in range(0, len(yf), 2048):
            blk = yf[lo:lo + 2048]
            dist = np.sum((blk[:, None, :] - seed_pts[None, :, :]) ** 2, axis=-1)
            s[lo:lo + 2048] = seed_s[np.argmin(dist, axis=1)]

        active = np.ones(len(yf), dtype=bool)
        for _ in range(max_iter):
            if not active.any():
                break
            sa = s[active]
            X, X1, X2, _ = self.curve.derivatives(sa)
            r = yf[active] - X
            g = -_dot(r, X1)
            hess = _dot(X1, X1) - _dot(r, X2)
            hess = np.where(hess > 1e-12, hess, _dot(X1, X1))
            step = -g / hess
            f0 = 0.5 * _dot(r, r)
            lam = np.ones_like(sa)
            for _ in range(30):
                trial = sa + lam * step
                rt = yf[active] - self.curve.point(trial)
                bad = 0.5 * _dot(rt, rt) > f0 + 1e-15 * (1.0 + f0)
                if not bad.any():
                    break
                lam = np.where(bad, 0.5 * lam, lam)
            s_new = sa + lam * step
            done = np.abs(s_new - sa) < tol
            s[active] = s_new
            idx = np.flatnonzero(active)
            active[idx[done]] = False
        s = np.mod(s, TWO_PI)
        fr = self.curve.frame(s)
        d = _dot(yf - fr.point, fr.normal)
        return s.reshape(shape), d.reshape(shape)

    def _seeds(self, count=2048):
        if self._seed_s is None:
            ss = TWO_PI * np.arange(count) / count
            object.__setattr__(self, "_seed_s", ss)
            object.__setattr__(self, "_seed_pts", self.curve.point(ss))
        return self._seed_s, self._seed_pts

    def check_inside(self, d, what="point"):
        d = np.asarray(d)
        if np.any(~np.isfinite(d)) or np.any(np.abs(d) > self.L * (1.0 + 1e-12)):
            raise OutsideTube(f"{what} leaves the tube |S2| <= L = {self.L}")

    def bounding_box(self, samples=512):
        s = TWO_PI * np.arange(samples) / samples
        fr = self.curve.frame(s)
        pts = np.concatenate([fr.point + self.L * fr.normal, fr.point - self.L * fr.normal])
        return pts.min(axis=0), pts.max(axis=0)


def build_chart(curve, L):
    """Validate the tube half-width and return the chart of ``curve``.

    Raises :class:`TubeTooWide` if ``L >= 1/max|kappa0|`` and
    :class:`NotEmbedded` if the curve self-intersects or its tangent degenerates.
    """
    if not L > 0:
        raise TubeTooWide("tube half-width L must be positive")
    kmax = curve.max_abs_curvature()
    if kmax > 0 and L * kmax >= 1.0:
        raise TubeTooWide(f"L = {L} >= 1/max|kappa0| = {1.0 / kmax:.6g}")
    s = TWO_PI * np.arange(512) / 512
    X, X1, _, _ = curve.derivatives(s)
    speed = np.sqrt(_dot(X1, X1))
    if np.min(speed) < 1e-10 * max(np.max(speed), 1e-300):
        raise NotEmbedded("tangent vanishes on the curve")
    ang = np.arctan2(X1[:, 1], X1[:, 0])
    turns = np.sum(np.angle(np.exp(1j * (np.roll(ang, -1) - ang)))) / TWO_PI
    if abs(abs(turns) - 1.0) > 1e-6 or _segments_intersect(X):
        raise NotEmbedded("curve is not a simple closed curve")
    return TubularChart(curve=curve, L=float(L))


def eval_S_derivatives(chart, y):
    """Derivatives of the inverse chart at physical points ``y``.

    Circle charts use the polar closed forms; every other curve is projected
    first and then differentiated through the Weingarten map of the base curve.
    Raises :class:`OutsideTube` if ``|S2(y)| > L``.
    """
    y = np.asarray(y, dtype=float)
    s, d = chart.S(y)
    chart.check_inside(d)
    if isinstance(chart.curve, CircleCurve):
        cx, cy = chart.curve.center
        dx, dy = y[..., 0] - cx, y[..., 1] - cy
        r2 = dx * dx + dy * dy
        r = np.sqrt(r2)
        grad1 = np.stack([-dy, dx], axis=-1) / r2[..., None]
        grad2 = np.stack([dx, dy], axis=-1) / r[..., None]
        hess1 = np.empty(y.shape[:-1] + (2, 2))
        hess1[..., 0, 0] = 2 * dx * dy / r2**2
        hess1[..., 1, 1] = -2 * dx * dy / r2**2
        hess1[..., 0, 1] = hess1[..., 1, 0] = (dy * dy - dx * dx) / r2**2
        e = grad2
        hess2 = (np.eye(2) - e[..., :, None] * e[..., None, :]) / r[..., None, None]
        return grad1, grad2, hess1, hess2
    return chart.derivatives_at(s, d)
