"""Uniform periodic grid on [0, 2*pi) and its second-order difference stencils."""

import numpy as np
from scipy import sparse


def grid_points(N):
    return 2.0 * np.pi * np.arange(N) / N


def spacing(N):
    return 2.0 * np.pi / N


def _shifts(u, axis):
    u = np.asarray(u, dtype=float)
    if axis not in (-1, u.ndim - 1):
        u = np.moveaxis(u, axis, -1)
    plus = np.empty_like(u)
    minus = np.empty_like(u)
    plus[..., :-1] = u[..., 1:]
    plus[..., -1] = u[..., 0]
    minus[..., 1:] = u[..., :-1]
    minus[..., 0] = u[..., -1]
    return u, plus, minus


def d1(u, axis=-1):
    """Periodic central first difference, O(h^2)."""
    u, plus, minus = _shifts(u, axis)
    h = spacing(u.shape[-1])
    out = (plus - minus) / (2.0 * h)
    return out if axis in (-1, u.ndim - 1) else np.moveaxis(out, -1, axis)


def d2(u, axis=-1):
    """Periodic central second difference, O(h^2)."""
    u, plus, minus = _shifts(u, axis)
    h = spacing(u.shape[-1])
    out = (plus - 2.0 * u + minus) / (h * h)
    return out if axis in (-1, u.ndim - 1) else np.moveaxis(out, -1, axis)


def diff_matrices(N, method="fd2"):
    """Dense (D1, D2) matrices acting on periodic grid vectors.

    ``fd2`` reproduces :func:`d1`/:func:`d2`; ``spectral`` is Fourier
    differentiation (the Nyquist mode is dropped from D1).
    """
    if method == "fd2":
        h = spacing(N)
        e = np.ones(N)
        D1 = sparse.diags([e[:-1], -e[:-1]], [1, -1], shape=(N, N)).toarray()
        D1[0, -1] = -1.0
        D1[-1, 0] = 1.0
        D2 = sparse.diags([e[:-1], -2.0 * e, e[:-1]], [1, 0, -1], shape=(N, N)).toarray()
        D2[0, -1] = 1.0
        D2[-1, 0] = 1.0
        return D1 / (2.0 * h), D2 / (h * h)
    if method == "spectral":
        k = np.fft.fftfreq(N, d=1.0 / N)
        ik = 1j * k
        if N % 2 == 0:
            ik[N // 2] = 0.0
        eye = np.eye(N)
        F = np.fft.fft(eye, axis=0)
        D1 = np.real(np.fft.ifft(ik[:, None] * F, axis=0))
        D2 = np.real(np.fft.ifft(-(k**2)[:, None] * F, axis=0))
        return D1, D2
    raise ValueError(f"unknown differentiation method {method!r}")
