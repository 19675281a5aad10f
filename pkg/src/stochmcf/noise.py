"""Seeded Brownian paths and their piecewise-linear (Wong-Zakai) smoothings.

Paths are built by dyadic Brownian-bridge refinement: with ``T/dt = n0 * 2**k``
(``n0`` odd) the ``n0`` coarse increments are drawn first and each halving
inserts bridge midpoints from a stream keyed by ``(seed, mode, level)``. Any two
resolutions of the same seed and horizon therefore agree exactly on their
common grid times.
"""

from dataclasses import dataclass

import numpy as np

from .errors import MeshMismatch


def _steps(T, dt):
    n = T / dt
    ni = int(round(n))
    if ni < 1 or abs(n - ni) > 1e-9 * max(n, 1.0):
        raise MeshMismatch(f"T/dt = {n} is not a positive integer")
    return ni


def _odd_part(n):
    k = 0
    while n % 2 == 0:
        n //= 2
        k += 1
    return n, k


def _stream(seed, mode, level):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=int(seed), spawn_key=(mode, level))))


@dataclass(frozen=True)
class BrownianPath:
    """``values[k, i] = B_i(k * dt_fine)`` for ``k = 0..n``, ``i`` over modes."""

    seed: int
    T: float
    dt_fine: float
    values: np.ndarray

    @property
    def n_steps(self):
        return self.values.shape[0] - 1

    @property
    def n_modes(self):
        return self.values.shape[1]

    @property
    def times(self):
        return self.dt_fine * np.arange(self.n_steps + 1)

    def increments(self, dt=None):
        """Increments over steps of size ``dt`` (a multiple of ``dt_fine``)."""
        stride = 1 if dt is None else _steps(dt, self.dt_fine)
        if self.n_steps % stride:
            raise MeshMismatch("dt does not divide the path horizon")
        return np.diff(self.values[::stride], axis=0)

    def scalar(self):
        return self.values[:, 0]

    def to_csv(self, path):
        cols = ["t"] + [f"B{i}" for i in range(self.n_modes)]
        data = np.column_stack([self.times, self.values])
        np.savetxt(path, data, delimiter=",", header=",".join(cols), comments="", fmt="%.17g")


def sample_path(seed, T, dt_fine, modes=1):
    """Draw a seeded path of ``modes`` independent Brownian motions on ``[0, T]``."""
    if not (T > 0 and dt_fine > 0):
        raise ValueError("T and dt_fine must be positive")
    n = _steps(T, dt_fine)
    n0, levels = _odd_part(n)
    out = np.empty((n + 1, modes))
    for m in range(modes):
        dt0 = T / n0
        inc = _stream(seed, m, 0).normal(0.0, np.sqrt(dt0), size=n0)
        B = np.concatenate([[0.0], np.cumsum(inc)])
        step = dt0
        for lev in range(1, levels + 1):
            z = _stream(seed, m, lev).normal(0.0, 1.0, size=len(B) - 1)
            mid = 0.5 * (B[:-1] + B[1:]) + 0.5 * np.sqrt(step) * z
            fine = np.empty(2 * len(B) - 1)
            fine[0::2] = B
            fine[1::2] = mid
            B = fine
            step *= 0.5
        out[:, m] = B
    return BrownianPath(seed=int(seed), T=float(T), dt_fine=float(dt_fine), values=out)


@dataclass(frozen=True)
class WongZakaiInterpolant:
    """Piecewise-linear interpolant of ``base`` through its values at multiples of ``delta``."""

    base: BrownianPath
    delta: float

    @property
    def knots(self):
        stride = _steps(self.delta, self.base.dt_fine)
        return self.base.values[::stride]

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        kn = self.knots
        tk = self.delta * np.arange(len(kn))
        return np.stack([np.interp(t, tk, kn[:, i]) for i in range(kn.shape[1])], axis=-1)

    def slope(self, t):
        """Constant derivative on the cell containing ``t`` (right-open cells)."""
        kn = self.knots
        k = np.clip(np.floor(np.asarray(t, dtype=float) / self.delta + 1e-9).astype(int), 0, len(kn) - 2)
        return (kn[k + 1] - kn[k]) / self.delta

    def lipschitz(self):
        return float(np.max(np.abs(np.diff(self.knots, axis=0)))) / self.delta


def wong_zakai(path, delta):
    """Raise :class:`MeshMismatch` unless ``delta`` is a multiple of ``dt_fine`` dividing ``T``."""
    stride = _steps(delta, path.dt_fine)
    if path.n_steps % stride:
        raise MeshMismatch("delta must divide the path horizon")
    return WongZakaiInterpolant(base=path, delta=float(delta))
