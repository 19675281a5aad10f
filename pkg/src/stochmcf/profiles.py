"""Noise amplitude profiles: the spatial field psi on D and the factor g(x, u).

The driving noise is ``w^Q(t, x) = sum_i psi_i(X(x, u)) B_i(t)``; the default
is a single mode. ``g`` multiplies the noise in the curve equation.
"""

from dataclasses import dataclass, field

import numpy as np


class Psi:
    """Scalar field on the plane with a gradient evaluator."""

    def __call__(self, y):
        raise NotImplementedError

    def grad(self, y, h=1e-6):
        y = np.asarray(y, dtype=float)
        e0 = np.array([h, 0.0])
        e1 = np.array([0.0, h])
        gx = (self(y + e0) - self(y - e0)) / (2 * h)
        gy = (self(y + e1) - self(y - e1)) / (2 * h)
        return np.stack([gx, gy], axis=-1)

    def spec(self):
        raise NotImplementedError


@dataclass(frozen=True)
class ConstPsi(Psi):
    """psi constant on the tube (its cut-off away from the tube is immaterial)."""

    value: float = 1.0

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        return np.full(y.shape[:-1], float(self.value))

    def grad(self, y, h=None):
        y = np.asarray(y, dtype=float)
        return np.zeros(y.shape)

    def spec(self):
        return {"kind": "const-on-tube", "value": self.value}


@dataclass(frozen=True)
class GaussianBump(Psi):
    """``amplitude * exp(-|y - center|^2 / (2 width^2))``."""

    center: tuple = (0.0, 0.0)
    width: float = 1.0
    amplitude: float = 1.0

    def __call__(self, y):
        r = np.asarray(y, dtype=float) - np.asarray(self.center, dtype=float)
        return self.amplitude * np.exp(-np.sum(r * r, axis=-1) / (2.0 * self.width**2))

    def grad(self, y, h=None):
        r = np.asarray(y, dtype=float) - np.asarray(self.center, dtype=float)
        return -(self(y) / self.width**2)[..., None] * r

    def spec(self):
        return {"kind": "gaussian-bump", "center": list(self.center), "width": self.width, "amplitude": self.amplitude}


class CallablePsi(Psi):
    """User-supplied psi; gradient by central differences."""

    def __init__(self, fn):
        self.fn = fn

    def __call__(self, y):
        return np.asarray(self.fn(np.asarray(y, dtype=float)), dtype=float)

    def spec(self):
        return {"kind": "callable"}


class GFunction:
    def __call__(self, x, u):
        raise NotImplementedError

    def du(self, x, u, h=1e-6):
        return (self(x, u + h) - self(x, u - h)) / (2 * h)


@dataclass(frozen=True)
class PolynomialG(GFunction):
    """``g(x, u) = sum_k coeffs[k] * u**k``; covers const and linear-in-u."""

    coeffs: tuple = (0.0,)

    def __call__(self, x, u):
        u = np.asarray(u, dtype=float)
        return np.polynomial.polynomial.polyval(u, self.coeffs) + 0.0 * np.asarray(x, dtype=float)

    def du(self, x, u, h=None):
        u = np.asarray(u, dtype=float)
        dc = np.polynomial.polynomial.polyder(self.coeffs) if len(self.coeffs) > 1 else [0.0]
        return np.polynomial.polynomial.polyval(u, dc) + 0.0 * np.asarray(x, dtype=float)

    def spec(self):
        return {"kind": "custom-polynomial", "coeffs": list(self.coeffs)}


class CallableG(GFunction):
    def __init__(self, fn, step=1e-6):
        self.fn = fn
        self.step = step

    def __call__(self, x, u):
        return np.asarray(self.fn(x, u), dtype=float)

    def du(self, x, u, h=None):
        return super().du(x, u, self.step if h is None else h)

    def spec(self):
        return {"kind": "callable"}


def const_g(gamma):
    return PolynomialG((float(gamma),))


def linear_g(gamma):
    return PolynomialG((0.0, float(gamma)))


@dataclass(frozen=True)
class NoiseProfile:
    g: GFunction = field(default_factory=lambda: const_g(0.0))
    modes: tuple = (ConstPsi(1.0),)

    @property
    def psi(self):
        return self.modes[0]

    @property
    def n_modes(self):
        return len(self.modes)

    def is_zero(self):
        return isinstance(self.g, PolynomialG) and not any(self.g.coeffs)


def psi_from_spec(spec):
    kind = spec.get("kind", "const-on-tube")
    if kind == "const-on-tube":
        return ConstPsi(float(spec.get("value", 1.0)))
    if kind == "gaussian-bump":
        return GaussianBump(
            center=tuple(float(c) for c in spec.get("center", (0.0, 0.0))),
            width=float(spec.get("width", 1.0)),
            amplitude=float(spec.get("amplitude", 1.0)),
        )
    raise ValueError(f"unknown psi kind {kind!r}")


def g_from_spec(spec):
    kind = spec.get("kind", "const")
    if kind == "const":
        return const_g(spec.get("gamma", 0.0))
    if kind == "linear-in-u":
        return linear_g(spec.get("gamma", 1.0))
    if kind == "custom-polynomial":
        return PolynomialG(tuple(float(c) for c in spec["coeffs"]))
    raise ValueError(f"unknown g kind {kind!r}")


def noise_from_spec(spec):
    spec = spec or {}
    psi = spec.get("psi", {"kind": "const-on-tube", "value": 1.0})
    modes = psi if isinstance(psi, list) else [psi]
    return NoiseProfile(g=g_from_spec(spec.get("g", {})), modes=tuple(psi_from_spec(m) for m in modes))
