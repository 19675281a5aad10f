"""Linearized operator, its discrete heat kernel, and the mild-solution map.

The truncated equation is rewritten around the linearization
``A u = a2(x) u'' + a1(x) u' + a0(x) u`` (derivatives of the truncated Ito drift
at ``(x, 0, 0, 0)``)::

    v(t) = int_0^t e^{(t-s)A} [Ftilde_K(u) - A u](s) ds
         + int_0^t e^{(t-s)A} f3K(u) psi(X(x, u)) dB_s

and ``Gamma: u -> v`` is evaluated pathwise with left-point quadrature. The
recursion ``v_{k+1} = G[dt] (v_k + dt * src_k + noise_k)`` used by
:func:`gamma_map` is algebraically the left-point convolution; the direct sum
is kept in :func:`gamma_difference` as an independent path.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from . import grid
from .coefficients import GridCoefficients
from .errors import Degenerate, IdenticalFields, MeshMismatch
from .noise import sample_path
from .norms import SpaceTimeField, expectation_norm, norm_XT


@dataclass(frozen=True)
class LinearOperatorA:
    alpha2: np.ndarray
    alpha1: np.ndarray
    alpha0: np.ndarray

    @property
    def N(self):
        return self.alpha2.shape[0]

    def matrix(self, method="fd2"):
        D1, D2 = grid.diff_matrices(self.N, method)
        return self.alpha2[:, None] * D2 + self.alpha1[:, None] * D1 + np.diag(self.alpha0)

    @classmethod
    def constant(cls, N, a2=1.0, a1=0.0, a0=0.0):
        return cls(np.full(N, float(a2)), np.full(N, float(a1)), np.full(N, float(a0)))


def _richardson(fn, h):
    """Fourth-order central difference of ``fn`` at 0 from steps h and h/2."""
    d_h = (fn(h) - fn(-h)) / (2 * h)
    d_h2 = (fn(h / 2) - fn(-h / 2)) / h
    return (4 * d_h2 - d_h) / 3


def build_A(chart, noise, K, N=64, coeffs=None, h=1e-3):
    """Coefficients of the linearization of the truncated Ito drift at zero.

    ``coeffs`` may be any object with ``evaluate(u, p, q, ito)`` returning the
    drift first; by default the grid evaluator of ``(chart, noise, K)``.
    Derivatives are Richardson-extrapolated central differences (error O(h^4);
    the q-derivative is exact up to rounding because the drift is affine in q
    on the cut-off plateau).
    """
    x = grid.grid_points(N)
    ev = coeffs if coeffs is not None else GridCoefficients(chart, noise, K, x)
    z = np.zeros(N)

    def drift(u=z, p=z, q=z):
        return ev.evaluate(u, p, q, ito=True)[0]

    a2 = _richardson(lambda e: drift(q=z + e), h)
    a1 = _richardson(lambda e: drift(p=z + e), h)
    a0 = _richardson(lambda e: drift(u=z + e), h)
    if np.min(a2) <= 0:
        raise Degenerate(f"min a2 = {np.min(a2):.3g} <= 0; increase K")
    return LinearOperatorA(a2, a1, a0)


@dataclass(frozen=True)
class DiscreteKernel:
    """``matrix @ f`` approximates ``(e^{tA} f)(x_j)``; ``matrix / dx`` is the kernel density."""

    t: float
    matrix: np.ndarray
    dx: float

    @property
    def density(self):
        return self.matrix / self.dx


def build_kernel(A, t, method="fd2"):
    """Dense matrix exponential of the discretized operator (scaling and squaring)."""
    if not t > 0:
        raise ValueError("t must be positive")
    return DiscreteKernel(float(t), expm(t * A.matrix(method)), grid.spacing(A.N))


@dataclass
class KernelFamily:
    """Kernels at integer multiples of ``dt``, composed from cached dyadic powers."""

    A: LinearOperatorA
    dt: float
    method: str = "fd2"
    _pow2: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self._pow2 = [expm(self.dt * self.A.matrix(self.method))]
        D1, D2 = grid.diff_matrices(self.A.N, self.method)
        self.D1, self.D2 = D1, D2
        self.A_matrix = self.A.matrix(self.method)

    @property
    def step(self):
        return self._pow2[0]

    def _power(self, k):
        while len(self._pow2) <= k:
            self._pow2.append(self._pow2[-1] @ self._pow2[-1])
        return self._pow2[k]

    def at(self, n):
        """``G[n dt]`` as a product of dyadic powers."""
        n = int(n)
        out = np.eye(self.A.N)
        k = 0
        while n:
            if n & 1:
                out = self._power(k) @ out
            n >>= 1
            k += 1
        return out

    def kernel(self, n):
        return DiscreteKernel(n * self.dt, self.at(n), grid.spacing(self.A.N))


def _check_field(u, family):
    if abs(u.dt - family.dt) > 1e-12 * family.dt:
        raise MeshMismatch("field and kernel family use different time steps")
    if u.N != family.A.N:
        raise MeshMismatch("field and operator use different grids")
    if np.any(u.values[0] != 0):
        raise ValueError("fields in the ball must vanish at t = 0")


def _sources(u, family, ev, path):
    """Per-step drift sources ``F_K(u) - A u`` and noise sources ``sum_i f3K psi_i dB_i``."""
    U = u.values[:-1]
    drift, amps = ev.evaluate(U, U @ family.D1.T, U @ family.D2.T, ito=True)
    src = drift - U @ family.A_matrix.T
    dB = path.increments(u.dt)
    if dB.shape[0] != u.n_steps:
        raise MeshMismatch("path horizon differs from the field horizon")
    noise = np.einsum("km,mkj->kj", dB, amps)
    return src, noise


def _evaluator(chart, noise, K, N, coeffs):
    return coeffs if coeffs is not None else GridCoefficients(chart, noise, K, grid.grid_points(N))


def gamma_parts(u, family, chart, noise, path, K=10, coeffs=None):
    """``(w_d, w_st)``: deterministic and stochastic convolutions of ``Gamma(u)``."""
    _check_field(u, family)
    ev = _evaluator(chart, noise, K, u.N, coeffs)
    src, dnoise = _sources(u, family, ev, path)
    G = family.step
    wd = np.zeros_like(u.values)
    ws = np.zeros_like(u.values)
    for k in range(u.n_steps):
        wd[k + 1] = G @ (wd[k] + u.dt * src[k])
        ws[k + 1] = G @ (ws[k] + dnoise[k])
    return SpaceTimeField(wd, u.dt), SpaceTimeField(ws, u.dt)


def gamma_map(u, family, chart, noise, path, K=10, coeffs=None):
    """Pathwise mild-solution map ``Gamma(u)`` on the field's time grid."""
    wd, ws = gamma_parts(u, family, chart, noise, path, K, coeffs)
    return wd + ws


def gamma_difference(u1, u2, family, chart, noise, path, K=10, coeffs=None):
    """``Gamma(u1) - Gamma(u2)`` assembled from difference sources by direct convolution."""
    _check_field(u1, family)
    _check_field(u2, family)
    ev = _evaluator(chart, noise, K, u1.N, coeffs)
    s1, n1 = _sources(u1, family, ev, path)
    s2, n2 = _sources(u2, family, ev, path)
    total = u1.dt * (s1 - s2) + (n1 - n2)
    out = np.zeros_like(u1.values)
    for n in range(1, u1.n_steps + 1):
        out[n] = sum(family.at(n - k) @ total[k] for k in range(n))
    return SpaceTimeField(out, u1.dt)


def picard_iterates(family, chart, noise, path, n_steps, n_iter, K=10, coeffs=None):
    """Iterates ``u^{(k+1)} = Gamma(u^{(k)})`` from ``u^{(0)} = 0``."""
    u = SpaceTimeField(np.zeros((n_steps + 1, family.A.N)), family.dt)
    out = [u]
    for _ in range(n_iter):
        u = gamma_map(u, family, chart, noise, path, K, coeffs)
        out.append(u)
    return out


def contraction_ratio(u1, u2, family, chart, noise, paths, params, K=10):
    """``|||Gamma u1 - Gamma u2||| / |||u1 - u2|||`` over the given Brownian paths.

    The same paths enter every evaluation; ``u1`` and ``u2`` are deterministic
    so the denominator is their plain ``X_T`` norm.
    """
    diff = u1 - u2
    if not np.any(diff.values):
        raise IdenticalFields("contraction ratio undefined for identical fields")
    ev = GridCoefficients(chart, noise, K, grid.grid_points(u1.N))
    num = [gamma_map(u1, family, chart, noise, p, K, ev) - gamma_map(u2, family, chart, noise, p, K, ev) for p in paths]
    return expectation_norm(num, params) / expectation_norm([diff], params)


def random_field(rng, N, T, n_steps, amplitude=0.05, n_modes=3):
    """Smooth member of the ball: ``amplitude * (t/T0) * sum c_m cos(m x + phi_m)``.

    The time profile is a fixed function of absolute time (``T0 = 0.01``) so a
    shorter horizon restricts the same field rather than rescaling it.
    """
    m = np.arange(1, n_modes + 1)
    c = rng.normal(size=n_modes) / m**2
    phi = rng.uniform(0, 2 * np.pi, size=n_modes)
    t = np.linspace(0.0, T, n_steps + 1)
    x = grid.grid_points(N)
    space = np.sum(c[:, None] * np.cos(m[:, None] * x[None, :] + phi[:, None]), axis=0)
    return SpaceTimeField(amplitude * (t[:, None] / 0.01) * space[None, :], T / n_steps)


# -- Gaussian kernel bounds -----------------------------------------------------

def _wrapped(d):
    d = np.abs(d) % (2 * np.pi)
    return np.minimum(d, 2 * np.pi - d)


def _antiderivative_y(M, dx):
    """Cumulative trapezoid in y starting from the antipode of each row's x."""
    N = M.shape[0]
    out = np.empty_like(M)
    half = N // 2
    for i in range(N):
        order = (np.arange(N) + i + half) % N
        row = M[i, order]
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (row[1:] + row[:-1]) * dx)])
        out[i, order] = cum
    return out


def kernel_derivative(kernel, alpha, k, method="fd2"):
    """``D_y^{-k} D_x^alpha g`` of the kernel density on the grid."""
    N = kernel.matrix.shape[0]
    D1, _ = grid.diff_matrices(N, method)
    M = kernel.density
    for _ in range(alpha):
        M = D1 @ M
    for _ in range(k):
        M = _antiderivative_y(M, kernel.dx)
    return M


def _gbar(t, N, K1, K2):
    x = grid.grid_points(N)
    d = _wrapped(x[:, None] - x[None, :])
    return K1 * t**-0.5 * np.exp(-K2 * d * d / t)


def _ratios(kernels, alpha, K2, method, rel_floor):
    """Per ``(t, k)``: sup of ``|D_y^{-k} D_x^alpha g| / (t^{(k-alpha)/2} gbar)`` with ``K1 = 1``."""
    out = []
    for ker in kernels:
        N = ker.matrix.shape[0]
        gb = _gbar(ker.t, N, 1.0, K2)
        mask = gb >= rel_floor * gb.max()
        for k in range(alpha + 1):
            Dg = kernel_derivative(ker, alpha, k, method)
            r = np.abs(Dg[mask]) / (ker.t ** ((k - alpha) / 2.0) * gb[mask])
            out.append((ker.t, k, float(np.max(r))))
    return out


@dataclass
class KernelBoundReport:
    alpha: int
    K1: float
    K2: float
    worst: float
    rows: list

    @property
    def passed(self):
        return self.worst <= 1.0 + 1e-2


def kernel_bound_check(kernels, alpha, K1, K2, method="fd2", rel_floor=1e-10):
    """Worst ratio ``|D_y^{-k} D_x^alpha g| / (t^{-alpha/2 + k/2} gbar)`` over ``t, x, y, k``.

    Pairs where ``gbar`` is below ``rel_floor`` times its peak are skipped: the
    exponential's absolute rounding floor (about 1e-16) would dominate there.
    """
    if alpha not in (0, 1, 2):
        raise ValueError("alpha must be 0, 1 or 2")
    rows = [(t, k, r / K1) for t, k, r in _ratios(kernels, alpha, K2, method, rel_floor)]
    return KernelBoundReport(alpha, K1, K2, max(r for _, _, r in rows), rows)


def fit_kernel_constants(kernels, alpha, K2=None, margin=1.05, method="fd2", rel_floor=1e-10):
    """Fit ``(K1, K2)`` on ``kernels``: ``K2`` below the diffusivity bound, ``K1`` the sup ratio times ``margin``."""
    if K2 is None:
        K2 = 0.2
    worst = max(r for _, _, r in _ratios(kernels, alpha, K2, method, rel_floor))
    return worst * margin, K2


def dyadic_times(t_min=1e-3, t_max=1e-1):
    """Powers of two in ``[t_min, t_max]``."""
    j = np.arange(int(np.ceil(-np.log2(t_max))), int(np.floor(-np.log2(t_min))) + 1)
    return [2.0 ** -int(v) for v in j]


def dyadic_family(A, t_min=1e-3, t_max=1e-1, method="fd2"):
    """Kernels at the dyadic times, built by squaring from the smallest."""
    ts = dyadic_times(t_min, t_max)
    fam = KernelFamily(A, ts[-1], method)
    return [fam.kernel(round(t / ts[-1])) for t in ts]


# -- contraction experiment ------------------------------------------------------

def ball_radius(family, chart, noise, paths, n_steps, params, K=10):
    """``R = 2 |||Gamma 0|||``, so that ``Gamma 0`` sits well inside the ball."""
    zero = SpaceTimeField(np.zeros((n_steps + 1, family.A.N)), family.dt)
    ev = GridCoefficients(chart, noise, K, grid.grid_points(family.A.N))
    return 2.0 * expectation_norm([gamma_map(zero, family, chart, noise, p, K, ev) for p in paths], params)


def ball_pair(rng, N, T, n_steps, R, params, amplitude=0.05):
    """Two random fields each rescaled to X_T norm ``R * xi`` with ``xi ~ U(0.2, 1)``."""
    out = []
    for _ in range(2):
        f = random_field(rng, N, T, n_steps, amplitude)
        out.append(f * (R * rng.uniform(0.2, 1.0) / norm_XT(f, params)))
    return tuple(out)


def contraction_sweep(chart, noise, K, N, dt, Ts, n_pairs, n_seeds, params, seed=0, method="fd2"):
    """Measured contraction ratios on a horizon sweep.

    Returns ``(rows, slope)``: one row ``(T, R, ratios)`` per horizon, with the
    same pair draws and noise seeds at every ``T``, and the least-squares slope
    of ``log(max ratio)`` against ``log T``. The slope is reported, not judged.
    """
    A = build_A(chart, noise, K, N=N)
    fam = KernelFamily(A, dt, method)
    rows = []
    for T in Ts:
        n = int(round(T / dt))
        paths = [sample_path_for(seed, s, T, dt, noise.n_modes) for s in range(n_seeds)]
        R = ball_radius(fam, chart, noise, paths, n, params, K)
        rng = np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(7,)))
        ratios = []
        for _ in range(n_pairs):
            u1, u2 = ball_pair(rng, N, T, n, R, params)
            ratios.append(contraction_ratio(u1, u2, fam, chart, noise, paths, params, K))
        rows.append((float(T), float(R), ratios))
    logT = np.log([r[0] for r in rows])
    logr = np.log([max(r[2]) for r in rows])
    slope = float(np.polyfit(logT, logr, 1)[0]) if len(rows) > 1 else float("nan")
    return rows, slope


def sample_path_for(seed, member, T, dt, modes=1):
    """Path of ensemble member ``member`` under a base ``seed``."""
    return sample_path(int(seed) * 100003 + int(member), T, dt, modes)
