import numpy as np
import pytest

from stochmcf import grid
from stochmcf.coefficients import GridCoefficients, cutoff_eta1
from stochmcf.errors import CFLViolation, MeshMismatch, NonFinite
from stochmcf.geometry import CircleCurve, build_chart
from stochmcf.noise import sample_path, wong_zakai
from stochmcf.profiles import ConstPsi, GaussianBump, NoiseProfile, PolynomialG, const_g
from stochmcf.solver import (
    CurveState,
    SolverConfig,
    check_cfl,
    monitor_sigma,
    run,
    step_ito,
    step_stratonovich_heun,
    step_wong_zakai,
)


def _ev(chart, noise, N, K=10):
    return GridCoefficients(chart, noise, K, grid.grid_points(N))


def test_state_caches_and_initial():
    s = CurveState.initial(32)
    assert np.all(s.u == 0) and s.t == 0
    u = 0.1 * np.sin(grid.grid_points(32))
    st = CurveState.from_u(0.0, u)
    assert np.max(np.abs(st.up - grid.d1(u))) <= 1e-14 and np.max(np.abs(st.upp - grid.d2(u))) <= 1e-14


def test_first_ito_step_unit_circle(circle_chart):
    cfg = SolverConfig(N=64, dt=1e-5)
    new = step_ito(CurveState.initial(64), cfg, 0.0, coeffs=_ev(circle_chart, NoiseProfile(), 64))
    assert np.allclose(new.u, -1e-5, rtol=1e-12)


def test_zero_increment_is_deterministic(ellipse_chart, bump_noise):
    cfg = SolverConfig(N=64, dt=1e-5)
    st = CurveState.from_u(0.0, 0.05 * np.cos(2 * grid.grid_points(64)))
    a = step_ito(st, cfg, 0.0, coeffs=_ev(ellipse_chart, bump_noise, 64))
    drift, _ = _ev(ellipse_chart, bump_noise, 64).evaluate(st.u, st.up, st.upp)
    assert np.array_equal(a.u, st.u + cfg.dt * drift)


def test_frozen_region_bit_exact(circle_chart, bump_noise):
    N, K, L = 64, 10, circle_chart.L
    x = grid.grid_points(N)
    edge = L * (1 - 1 / (2 * (1 + K)))
    u = np.where(np.cos(x) > 0.5, edge + 0.001, 0.05 * np.sin(x))
    st = CurveState.from_u(0.0, u)
    frozen = cutoff_eta1(K, L, u) == 0
    assert frozen.sum() > 5
    ev = _ev(circle_chart, bump_noise, N)
    cfg = SolverConfig(N=N, dt=1e-5)
    for new in (step_ito(st, cfg, 0.37, coeffs=ev), step_stratonovich_heun(st, cfg, -0.21, coeffs=ev)):
        assert np.array_equal(new.u[frozen], u[frozen])
        assert not np.array_equal(new.u[~frozen], u[~frozen])


def test_heun_vs_ito_deterministic_second_order(ellipse_chart):
    st = CurveState.from_u(0.0, 0.05 * np.cos(2 * grid.grid_points(64)))
    ev = _ev(ellipse_chart, NoiseProfile(), 64)
    diffs = []
    for dt in (1e-5, 5e-6):
        cfg = SolverConfig(N=64, dt=dt)
        diffs.append(np.max(np.abs(step_ito(st, cfg, 0.0, coeffs=ev).u - step_stratonovich_heun(st, cfg, 0.0, coeffs=ev).u)))
    assert np.log2(diffs[0] / diffs[1]) > 1.9


def test_additive_noise_schemes_agree(ellipse_chart):
    noise = NoiseProfile(g=const_g(0.3), modes=(ConstPsi(1.0),))
    st = CurveState.from_u(0.0, 0.05 * np.cos(2 * grid.grid_points(64)))
    ev = _ev(ellipse_chart, noise, 64)
    diffs = []
    for dt in (1e-5, 2.5e-6):
        cfg = SolverConfig(N=64, dt=dt)
        dB = np.sqrt(dt)
        diffs.append(np.max(np.abs(step_ito(st, cfg, dB, coeffs=ev).u - step_stratonovich_heun(st, cfg, dB, coeffs=ev).u)))
    # per-step agreement at least O(dt^{3/2})
    assert np.log(diffs[0] / diffs[1]) / np.log(4) >= 1.5


def test_wong_zakai_with_delta_dt_equals_heun(circle_chart, bump_noise):
    T, dt = 0.002, 1e-5
    path = sample_path(4, T, dt)
    a = run(SolverConfig(N=32, dt=dt, T=T, scheme="stratonovich-heun"), circle_chart, bump_noise, path)
    b = run(SolverConfig(N=32, dt=dt, T=T, scheme="wong-zakai-ode", wz_delta=dt), circle_chart, bump_noise, path)
    assert np.max(np.abs(a.final.u - b.final.u)) < 1e-14


def test_wong_zakai_noiseless_independent_of_delta(ellipse_chart):
    T, dt = 0.004, 1e-5
    path = sample_path(4, T, dt)
    finals = [run(SolverConfig(N=32, dt=dt, T=T, scheme="wong-zakai-ode", wz_delta=T / m), ellipse_chart, NoiseProfile(), path).final.u for m in (2, 8)]
    assert np.array_equal(finals[0], finals[1])


def test_step_wong_zakai_uses_cell_slope(circle_chart, bump_noise):
    path = sample_path(1, 0.01, 1e-4)
    wz = wong_zakai(path, 1e-3)
    st = CurveState.initial(16)
    cfg = SolverConfig(N=16, dt=1e-4, scheme="wong-zakai-ode")
    ev = _ev(circle_chart, bump_noise, 16)
    a = step_wong_zakai(st, cfg, wz, 3e-4, coeffs=ev)
    b = step_stratonovich_heun(st, cfg, wz.slope(3.5e-4) * 1e-4, coeffs=ev)
    assert np.array_equal(a.u, b.u)


def test_run_T_zero(circle_chart):
    tr = run(SolverConfig(N=16, dt=1e-3, T=0.0), circle_chart, NoiseProfile())
    assert len(tr.snapshots) == 1 and not tr.report.stopped


def test_run_reports_sigma1_crossing():
    chart = build_chart(CircleCurve(), 0.5)
    tr = run(SolverConfig(N=16, dt=1e-3, T=0.3, K=1), chart, NoiseProfile())
    assert tr.report.stopped and tr.report.triggered["sigma1"]
    assert not tr.report.triggered["sigma3"]
    # shrinking circle r = sqrt(1 - 2t) reaches u = -L/2 near t = 0.219
    assert 0.19 < tr.report.time < 0.25
    assert tr.final.t == pytest.approx(tr.report.time)


def test_non_finite_carries_step():
    class Broken:
        def evaluate(self, u, p, q, ito=True):
            return np.full_like(u, np.nan), np.zeros((1,) + u.shape)

    with pytest.raises(NonFinite) as exc:
        step_ito(CurveState.initial(8), SolverConfig(N=8, dt=1e-3), 0.0, coeffs=Broken(), step=17)
    assert exc.value.step == 17 and "17" in str(exc.value)


def test_cfl_guard(circle_chart):
    with pytest.raises(CFLViolation):
        run(SolverConfig(N=256, dt=1e-3, T=0.01), circle_chart, NoiseProfile())
    limit = check_cfl(SolverConfig(N=64, dt=1e-5), circle_chart)
    assert limit == pytest.approx(0.25 * grid.spacing(64) ** 2 * (1 - 0.4) ** 2, rel=1e-9)


def test_mesh_mismatch(circle_chart):
    with pytest.raises(MeshMismatch):
        run(SolverConfig(N=16, dt=3e-3, T=0.01), circle_chart, NoiseProfile())


def test_monitor_examples(circle_chart):
    K, L = 10, circle_chart.L
    assert not any(monitor_sigma(CurveState.initial(32), circle_chart, K).values())
    flags = monitor_sigma(CurveState.from_u(0.0, np.full(32, -L * (1 - 1 / (1 + K)))), circle_chart, K)
    assert flags["sigma1"]
    x = grid.grid_points(64)
    u = 0.01 * np.sin(8 * x)
    u *= K / np.max(np.abs(grid.d2(u)))
    assert monitor_sigma(CurveState.from_u(0.0, u), circle_chart, K)["sigma3"]


def test_rotational_equivariance():
    N, m = 32, 5
    phi = 2 * np.pi * m / N
    base = build_chart(CircleCurve(), 0.4)
    rot = build_chart(CircleCurve(phase=phi), 0.4)
    c = np.array([0.3, 0.1])
    R = np.array([[np.cos(phi), -np.sin(phi)], [np.sin(phi), np.cos(phi)]])
    n0 = NoiseProfile(g=PolynomialG((1.0, 0.5)), modes=(GaussianBump(tuple(c), 1.0, 1.0),))
    n1 = NoiseProfile(g=PolynomialG((1.0, 0.5)), modes=(GaussianBump(tuple(R @ c), 1.0, 1.0),))
    path = sample_path(9, 0.01, 1e-4)
    cfg = SolverConfig(N=N, dt=1e-4, T=0.01)
    u0 = run(cfg, base, n0, path).final.u
    assert np.ptp(u0) > 1e-3
    # rotating chart and profile together: X_rot(x_j) = R X(x_j), same heights
    u1 = run(cfg, rot, n1, path).final.u
    assert np.max(np.abs(u1 - u0)) < 1e-12
    # rotating only the profile: the trajectory moves by m grid indices
    u2 = run(cfg, base, n1, path).final.u
    assert np.max(np.abs(u2 - np.roll(u0, m))) < 1e-12


def test_monte_carlo_mean_matches_radial_ensemble():
    """E[r(T)] from 200 grid runs vs a large independent ensemble of the radial SDE."""
    gamma, T, dt, N, n = 0.3, 0.05, 1e-3, 16, 200
    chart = build_chart(CircleCurve(), 0.6)
    noise = NoiseProfile(g=const_g(gamma), modes=(ConstPsi(1.0),))
    radii = []
    for s in range(n):
        tr = run(SolverConfig(N=N, dt=dt, T=T, seed=s), chart, noise)
        assert not tr.report.stopped
        radii.append(1.0 + np.mean(tr.final.u))
    radii = np.array(radii)
    # reference: Ito dr = -dt/r - gamma dB (additive), 200000 paths at dt/10
    rng = np.random.default_rng(2024)
    r = np.ones(200_000)
    h = dt / 10
    for _ in range(int(round(T / h))):
        r += -h / r - gamma * rng.normal(0.0, np.sqrt(h), r.shape)
    se = radii.std(ddof=1) / np.sqrt(n)
    assert abs(radii.mean() - r.mean()) < 3 * se
