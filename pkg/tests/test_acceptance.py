"""Acceptance criteria, one test each, run at their stated tolerances.

Each test prints a single ``ACCEPTANCE nn PASS|FAIL`` line (collected again in
the terminal summary) and then asserts. Criteria 3 and 4 are per-seed
monotonicity statements about strong errors; they are run as stated and are
expected to fail for a minority of seeds, see the README. Diagnostics below
them check the mean-square version of the same statements.
"""

import time
from functools import lru_cache

import numpy as np
import pytest

from conftest import record_acceptance
from stochmcf import grid
from stochmcf.coefficients import GridCoefficients
from stochmcf.config import from_mapping
from stochmcf.errors import ConfigError
from stochmcf.geometry import CircleCurve, EllipseCurve, build_chart
from stochmcf.noise import sample_path
from stochmcf.norms import SobolevParams, SpaceTimeField, expectation_norm, norm_XT
from stochmcf.observables import curvature_direct, kappa_chart, length_area, reconstruct
from stochmcf.picard import build_A, contraction_sweep, dyadic_family, fit_kernel_constants, kernel_bound_check
from stochmcf.profiles import ConstPsi, GaussianBump, NoiseProfile, PolynomialG, const_g
from stochmcf.solver import CurveState, SolverConfig, monitor_sigma, run, step_ito

N_SEEDS = 20


def _mean_radius(state, chart):
    return float(np.mean(np.hypot(*reconstruct(state, chart).points.T)))


def _orders(errs, ratio=2.0):
    e = np.asarray(errs)
    return np.log(e[:-1] / e[1:]) / np.log(ratio)


def _multiplicative_noise():
    return NoiseProfile(g=PolynomialG((1.0, 0.5)), modes=(GaussianBump((0.0, 0.0), 1.5, 1.0),))


# -- 1 ---------------------------------------------------------------------------

def test_01_shrinking_circle():
    chart = build_chart(CircleCurve(), 0.4)
    t0 = time.perf_counter()
    tr = run(SolverConfig(N=256, dt=1e-5, T=0.2, snapshot_stride=1000), chart, NoiseProfile())
    wall = time.perf_counter() - t0
    err = max(abs(_mean_radius(s, chart) - np.sqrt(1 - 2 * s.t)) for s in tr.snapshots)
    ok = err < 1e-3 and wall < 30 and not tr.report.stopped and tr.final.t == pytest.approx(0.2)
    record_acceptance(1, "shrinking circle", ok, f"max radius error {err:.2e} (< 1e-3), runtime {wall:.1f}s (< 30s)")
    assert ok


# -- 2 ---------------------------------------------------------------------------

def test_02_convergence_orders():
    # temporal: against the circle solution at N=512
    circle = build_chart(CircleCurve(), 0.4)
    T = 0.1
    terr = []
    for dt in (1e-5, 5e-6, 2.5e-6):
        s = run(SolverConfig(N=512, dt=dt, T=T), circle, NoiseProfile()).final
        terr.append(abs(_mean_radius(s, circle) - np.sqrt(1 - 2 * T)))
    t_order = _orders(terr)[-1]
    # spatial: the circle solution is uniform in x, so use self-convergence on an ellipse
    ellipse = build_chart(EllipseCurve(1.2, 1.0), 0.4)
    us = [run(SolverConfig(N=N, dt=1e-5, T=0.05), ellipse, NoiseProfile()).final.u for N in (64, 128, 256)]
    serr = [np.max(np.abs(a - b[::2])) for a, b in zip(us[:-1], us[1:])]
    s_order = _orders(serr)[-1]
    ok = s_order >= 1.9 and t_order >= 0.9
    record_acceptance(2, "convergence orders", ok, f"spatial {s_order:.2f} (>= 1.9), temporal {t_order:.2f} (>= 0.9)")
    assert ok


# -- 3 ---------------------------------------------------------------------------

DTS3 = (4e-5, 2e-5, 1e-5)
T3 = 0.02


class _WithoutF2:
    """Evaluator that drops the Ito correction: Euler-Maruyama on the Stratonovich drift."""

    def __init__(self, ev):
        self.ev = ev

    def evaluate(self, u, p, q, ito=True):
        return self.ev.evaluate(u, p, q, ito=False)


@lru_cache(maxsize=1)
def _ito_strat_diffs():
    chart = build_chart(CircleCurve(), 0.45)
    noise = _multiplicative_noise()
    out = []
    for seed in range(N_SEEDS):
        path = sample_path(seed, T3, min(DTS3))
        row = []
        for dt in DTS3:
            a = run(SolverConfig(N=64, dt=dt, T=T3, scheme="ito-euler-maruyama"), chart, noise, path).final.u
            b = run(SolverConfig(N=64, dt=dt, T=T3, scheme="stratonovich-heun"), chart, noise, path).final.u
            row.append(float(np.max(np.abs(a - b))))
        out.append(row)
    return np.array(out)


def test_03_ito_stratonovich_consistency():
    d = _ito_strat_diffs()
    per_seed = (d[:, 0] > d[:, 1]) & (d[:, 1] > d[:, 2]) & (d[:, 2] < 5e-3)
    ok = bool(np.all(per_seed))
    record_acceptance(
        3,
        "Ito-Stratonovich consistency",
        ok,
        f"{int(per_seed.sum())}/{N_SEEDS} seeds monotone with finest diff < 5e-3 (max finest {d[:, 2].max():.1e}); requires all",
    )
    assert ok


def test_03_diagnostic_mean_square_decrease():
    rms = np.sqrt(np.mean(_ito_strat_diffs() ** 2, axis=0))
    assert rms[0] > rms[1] > rms[2] and rms[2] < 5e-3


def test_03_diagnostic_without_correction_does_not_converge():
    chart = build_chart(CircleCurve(), 0.45)
    noise = _multiplicative_noise()
    ev = _WithoutF2(GridCoefficients(chart, noise, 10, grid.grid_points(64)))
    gaps = []
    for seed in range(3):
        path = sample_path(seed, T3, min(DTS3))
        row = []
        for dt in DTS3:
            cfg = SolverConfig(N=64, dt=dt, T=T3)
            st = CurveState.initial(64)
            for inc in path.increments(dt):
                st = step_ito(st, cfg, inc, coeffs=ev)
            b = run(SolverConfig(N=64, dt=dt, T=T3, scheme="stratonovich-heun"), chart, noise, path).final.u
            row.append(np.max(np.abs(st.u - b)))
        gaps.append(row)
    gaps = np.array(gaps)
    with_f2 = _ito_strat_diffs()[:3]
    # the gap stays O(1e-4) instead of shrinking, and dwarfs the corrected one
    assert np.all(gaps[:, 2] > 0.8 * gaps[:, 0])
    assert np.mean(gaps[:, 2]) > 5 * np.mean(with_f2[:, 2])


# -- 4 ---------------------------------------------------------------------------

@lru_cache(maxsize=1)
def _wong_zakai_errors():
    # T/32 must be a multiple of dt
    T, dt = 0.032, 1e-5
    chart = build_chart(CircleCurve(), 0.45)
    noise = _multiplicative_noise()
    out = []
    for seed in range(N_SEEDS):
        path = sample_path(seed, T, dt)
        ref = run(SolverConfig(N=64, dt=dt, T=T, scheme="stratonovich-heun"), chart, noise, path).final.u
        row = []
        for m in (8, 16, 32):
            w = run(SolverConfig(N=64, dt=dt, T=T, scheme="wong-zakai-ode", wz_delta=T / m), chart, noise, path).final.u
            row.append(float(np.max(np.abs(w - ref))))
        out.append(row)
    return np.array(out)


def test_04_wong_zakai_limit():
    e = _wong_zakai_errors()
    per_seed = (e[:, 0] > e[:, 1]) & (e[:, 1] > e[:, 2])
    ok = bool(np.all(per_seed))
    record_acceptance(4, "Wong-Zakai limit", ok, f"{int(per_seed.sum())}/{N_SEEDS} seeds monotone over delta = T/8, T/16, T/32; requires all")
    assert ok


def test_04_diagnostic_mean_square_decrease():
    rms = np.sqrt(np.mean(_wong_zakai_errors() ** 2, axis=0))
    assert rms[0] > rms[1] > rms[2]


# -- 5 ---------------------------------------------------------------------------

def test_05_constant_noise_circle():
    gamma, T, dt = 0.3, 0.1, 1e-5
    chart = build_chart(CircleCurve(), 0.4)
    noise = NoiseProfile(g=const_g(gamma), modes=(ConstPsi(1.0),))
    spread, err = 0.0, 0.0
    for seed in range(3):
        fine = sample_path(seed, T, dt / 100)
        tr = run(SolverConfig(N=64, dt=dt, T=T, snapshot_stride=1), chart, noise, fine)
        spread = max(spread, max(float(np.ptp(s.u)) for s in tr.snapshots))
        # radial reduction dr = -dt/r - gamma dB, stepped at dt/100 on the same path
        dB = np.diff(fine.values[:, 0])
        r = np.empty(dB.shape[0] + 1)
        r[0] = 1.0
        h = dt / 100
        for k in range(dB.shape[0]):
            r[k + 1] = r[k] - h / r[k] - gamma * dB[k]
        rad = np.array([_mean_radius(s, chart) for s in tr.snapshots])
        err = max(err, float(np.max(np.abs(rad - r[:: 100][: rad.shape[0]]))))
    ok = spread < 1e-10 and err < 5e-3
    record_acceptance(5, "constant-noise circle", ok, f"spatial spread {spread:.1e} (< 1e-10), radius sup-error {err:.1e} (< 5e-3)")
    assert ok


# -- 6 ---------------------------------------------------------------------------

def test_06_contraction_measured():
    chart = build_chart(CircleCurve(), 0.4)
    t0 = time.perf_counter()
    rows, slope = contraction_sweep(chart, _multiplicative_noise(), 10, 64, 1e-4, [0.02, 0.01, 0.005], 10, 50, SobolevParams())
    wall = time.perf_counter() - t0
    worst = {T: max(r) for T, _, r in rows}
    ok = worst[0.01] < 1 and worst[0.005] < worst[0.01] and slope > 0 and wall < 300
    record_acceptance(
        6,
        "contraction measured",
        ok,
        f"max ratio {worst[0.01]:.3g} at T=0.01, {worst[0.005]:.3g} at T=0.005, slope {slope:.2f} (> 0), runtime {wall:.0f}s",
    )
    assert ok


# -- 7 ---------------------------------------------------------------------------

def test_07_kernel_bounds():
    chart = build_chart(CircleCurve(), 0.4)
    A = build_A(chart, NoiseProfile(), 10, N=256)
    kernels = dyadic_family(A, 1e-3, 1e-1, "spectral")
    parts = []
    ok = True
    for alpha in (0, 1, 2):
        K1, K2 = fit_kernel_constants(kernels[::2], alpha, method="spectral")
        rep = kernel_bound_check(kernels, alpha, K1, K2, method="spectral")
        ok &= rep.passed
        parts.append(f"alpha={alpha}: K1={K1:.3g} K2={K2:g} worst {rep.worst:.3f}")
    record_acceptance(7, "kernel bounds", ok, "; ".join(parts))
    assert ok


# -- 8 ---------------------------------------------------------------------------

def test_08_stopping_times():
    L, K, N = 0.97, 10, 256
    chart = build_chart(CircleCurve(), L)
    x = grid.grid_points(N)
    d = np.angle(np.exp(1j * (x - np.pi)))
    inputs = {
        # |u| above L(1 - 1/(1+K)) everywhere
        "sigma1": np.full(N, 0.95 * L),
        # a deep, wide dent: |grad S1| = 1/(1+u) >= 2K, curvature of u moderate
        "sigma2": -0.96 * np.exp(-(d**2) / (2 * 0.35**2)),
        # small but oscillatory: |u''| >= K
        "sigma3": 0.01 * np.sin(40 * x),
    }
    ok = not any(monitor_sigma(CurveState.from_u(0.0, np.zeros(N)), chart, K).values())
    parts = [f"u=0 triggers none: {ok}"]
    for name, u in inputs.items():
        flags = monitor_sigma(CurveState.from_u(0.0, u), chart, K)
        own = flags[name] and not any(v for k, v in flags.items() if k != name)
        ok &= own
        parts.append(f"{name} input -> {sorted(k for k, v in flags.items() if v)}")
    record_acceptance(8, "stopping times", ok, ", ".join(parts))
    assert ok


# -- 9 ---------------------------------------------------------------------------

def test_09_kappa_velocity_identities():
    chart = build_chart(EllipseCurve(1.2, 1.0), 0.6)
    errs = []
    for N in (64, 128, 256):
        x = grid.grid_points(N)
        st = CurveState.from_u(0.0, 0.05 * np.sin(2 * x) + 0.02 * np.cos(3 * x))
        errs.append(np.max(np.abs(kappa_chart(st, chart) - curvature_direct(reconstruct(st, chart)))))
    order = float(np.min(_orders(errs)))
    tr = run(SolverConfig(N=128, dt=2e-5, T=0.3, snapshot_stride=500), chart, NoiseProfile())
    area = [length_area(reconstruct(s, chart))[1] for s in tr.snapshots]
    rel = float(np.polyfit(tr.times(), area, 1)[0] / (-2 * np.pi))
    ok = order >= 1.8 and abs(rel - 1) < 0.02 and not tr.report.stopped
    record_acceptance(9, "kappa/V identities", ok, f"kappa identity order {order:.2f} (>= 1.8), area slope / (-2 pi) = {rel:.4f} (within 2%)")
    assert ok


# -- 10 --------------------------------------------------------------------------

def test_10_norm_suite():
    rng = np.random.default_rng(7)
    p = SobolevParams()
    checks = {}

    def field():
        return SpaceTimeField(rng.normal(size=(9, 32)).cumsum(axis=0) * 0.1, 0.01)

    u, v = field(), field()
    nu = norm_XT(u, p)
    checks["homogeneity"] = abs(norm_XT(u * -2.5, p) - 2.5 * nu) < 1e-10 * nu
    checks["triangle"] = norm_XT(u + v, p) <= nu + norm_XT(v, p) + 1e-12
    ens = [field() for _ in range(4)]
    ens2 = [field() for _ in range(4)]
    checks["ensemble triangle"] = expectation_norm([a + b for a, b in zip(ens, ens2)], p) <= expectation_norm(ens, p) + expectation_norm(ens2, p) + 1e-12

    def smooth(N):
        return SpaceTimeField.from_function(lambda t, x: t * np.sin(x) + t**2 * np.cos(2 * x), N, 0.1, 40)

    n1, n2 = norm_XT(smooth(128), p), norm_XT(smooth(256), p)
    checks["refinement"] = abs(n1 / n2 - 1) < 0.05
    bad = {"p": (3, 0.2, 0.2, 0.1, "p>4"), "alpha": (6, 0.3, 0.2, 0.1, "alpha in (0,1/4)"), "delta": (6, 0.2, 0.2, 1.5, "delta in (0,1)"), "alpha1": (6, 0.2, 0.24, 0.1, "alpha1 in")}
    for name, (pp, a, a1, dl, msg) in bad.items():
        try:
            from_mapping({"norms": {"p": pp, "alpha": a, "alpha1": a1, "delta": dl}})
            checks[f"rejects {name}"] = False
        except ConfigError as exc:
            checks[f"rejects {name}"] = any(msg in e for e in exc.errors)
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    record_acceptance(10, "norm suite", ok, f"{sum(checks.values())}/{len(checks)} invariants and diagnostics" + (f"; failed: {failed}" if failed else ""))
    assert ok
