import math

import numpy as np
import pytest

from vrlab.evolution import (
    AdjointField,
    DataError,
    EvolveOptions,
    TransportOperator,
    adjoint_evolve,
    evolve,
    evolve_selfsimilar,
    gaussian_profile,
    linear_evolve,
    make_filament_initial,
    rhs,
    standard_window,
    tophat_profile,
)
from vrlab.fields import ConfigurationError, DomainError, PhysicalParams, VelocityField, VorticityField, build_grid, build_window


def _test_field(n):
    g = build_grid(6.0, -6.0, 6.0, n, 2 * n)
    r, z = g.mesh()
    w = r * np.exp(-(r**2 + z**2))
    return VorticityField(g, w), r, z


def _rhs_error(n, uz_const):
    f, r, z = _test_field(n)
    g = f.grid
    u = VelocityField(g, np.zeros(g.shape), np.full(g.shape, uz_const))
    got = rhs(f, u, PhysicalParams(nu=1.0, gamma_circ=0.0))
    w = f.values
    # d_r((1/r) d_r(r w)) + d_z^2 w - uz d_z w for w = r exp(-(r^2+z^2))
    exact = w * (4 * r**2 + 4 * z**2 - 10) + uz_const * 2 * z * w
    m = (r > 0.5) & (r < 3) & (np.abs(z) < 3)
    return np.abs(got - exact)[m].max()


@pytest.mark.parametrize("uz", [0.0, 1.0])
def test_rhs_second_order(uz):
    e1, e2 = _rhs_error(48, uz), _rhs_error(96, uz)
    assert e2 < 0.05
    assert math.log2(e1 / e2) == pytest.approx(2.0, abs=0.25)


def test_planar_operator_conserves_mass(rng):
    g = build_window(-6.0, 6.0, -6.0, 6.0, 48, 48, planar=True)
    x, z = g.mesh()
    w = np.exp(-(x**2 + z**2))
    op = TransportOperator(g, 1.0)
    ur, uz = rng.normal(size=g.shape), rng.normal(size=g.shape)
    tend = op.apply(w, ur, uz, None)
    assert abs(tend.sum()) < 1e-10 * np.abs(tend).sum()


def test_matrix_matches_apply(rng):
    g = build_grid(2.0, -1.0, 1.0, 12, 16)
    w = rng.normal(size=g.shape)
    w[0] = 0
    ur, uz = rng.normal(size=g.shape), rng.normal(size=g.shape)
    for upwind in (False, True):
        op = TransportOperator(g, 0.7, upwind)
        A = op.matrix(ur, uz, g.r.copy())
        np.testing.assert_allclose(A @ w.ravel(), op.apply(w, ur, uz, g.r.copy()).ravel(), atol=1e-12)


def test_linear_evolve_is_linear(rng):
    g = build_grid(2.0, -1.0, 1.0, 24, 24)
    r, z = g.mesh()
    a = np.exp(-((r - 1) ** 2 + z**2) / 0.05)
    b = np.exp(-((r - 0.8) ** 2 + (z - 0.2) ** 2) / 0.03)
    a[0] = b[0] = 0
    la = linear_evolve(VorticityField(g, a), 0.002, 1.0).values
    lb = linear_evolve(VorticityField(g, b), 0.002, 1.0).values
    lc = linear_evolve(VorticityField(g, 2 * a - 3 * b), 0.002, 1.0).values
    np.testing.assert_allclose(lc, 2 * la - 3 * lb, atol=1e-12 * np.abs(lc).max())


def test_linear_evolve_decays_peak():
    g = build_grid(2.0, -1.0, 1.0, 32, 32)
    r, z = g.mesh()
    w = np.exp(-((r - 1) ** 2 + z**2) / 0.02)
    w[0] = 0
    out = linear_evolve(VorticityField(g, w), 0.005, 1.0).values
    assert out.max() < w.max()
    assert np.sum(np.abs(out)) <= np.sum(np.abs(w)) * (1 + 1e-12)


@pytest.fixture(scope="module")
def short_run():
    params = PhysicalParams.from_gamma(5.0)
    g = build_grid(1.6, -0.6, 0.6, 160, 120)
    t0 = params.time_at(0.08)
    w0 = make_filament_initial(params, t0, g)
    traj = evolve(w0, t0, params.time_at(0.09), params, EvolveOptions(snapshot_times=(params.time_at(0.085),), record_steps=True))
    return params, w0, traj


def test_evolve_snapshots_and_invariants(short_run):
    params, w0, traj = short_run
    times = [s.time for s in traj.states]
    assert times[0] == pytest.approx(params.time_at(0.08))
    assert times[1] == pytest.approx(params.time_at(0.085))
    assert times[-1] == pytest.approx(params.time_at(0.09))
    imp = np.asarray(traj.impulse_history)
    # the window edge sits about 7 core radii out, so a little vorticity leaves
    assert abs(imp[-1] / imp[0] - 1) < 1e-4
    l1 = np.asarray(traj.l1_history)
    assert np.all(np.diff(l1) <= 1e-6 * l1[:-1])
    assert np.all(traj.final.omega.values[0] == 0)


def test_ring_moves_forward(short_run):
    _, w0, traj = short_run
    g = w0.grid
    zc = lambda w: float(np.sum(g.z[None, :] * w) / np.sum(w))  # noqa: E731
    assert zc(traj.final.omega.values) > zc(w0.values) + 1e-4


def test_adjoint_pairing_is_invariant(short_run):
    _, w0, traj = short_run
    g = w0.grid
    r, z = g.mesh()
    phi1 = np.exp(-((r - 1) ** 2 + z**2) / 0.05)
    t1 = traj.final.time
    adj, hist = adjoint_evolve(AdjointField(g, phi1, t1), traj.states[0].time, traj)
    p1 = np.sum(traj.final.omega.values * phi1)
    p0 = np.sum(w0.values * adj.values)
    assert abs(p0 - p1) < 1e-13 * abs(p1)
    assert max(v for _, v in hist) <= phi1.max() + 1e-12
    assert len(hist) == len(traj.step_times) + 1


def test_adjoint_requires_history(short_run):
    params, w0, _ = short_run
    t0 = params.time_at(0.08)
    traj = evolve(w0, t0, 1.001 * t0, params)
    with pytest.raises(DataError):
        adjoint_evolve(AdjointField(w0.grid, np.zeros(w0.grid.shape), 1.001 * t0), t0, traj)


def test_filament_initial_checks():
    params = PhysicalParams()
    with pytest.raises(ConfigurationError):
        make_filament_initial(params, 0.02, build_grid(2, -1, 1, 128, 128))
    with pytest.raises(ConfigurationError):
        make_filament_initial(params, 0.0025, build_grid(2, -1, 1, 64, 64))
    g = build_grid(2, -1, 1, 8, 8)
    with pytest.raises(DomainError):
        evolve(VorticityField(g, np.zeros(g.shape)), 0.01, 0.005, params)


def test_tophat_matches_gaussian_moments():
    g = standard_window(64, 8.0)
    R, Z = g.mesh()
    t, G = tophat_profile(g), gaussian_profile(g)
    h2 = g.hr * g.hz
    assert np.sum(t) * h2 == pytest.approx(1.0, rel=1e-12)
    assert np.sum((R**2 + Z**2) * t) / np.sum(t) == pytest.approx(np.sum((R**2 + Z**2) * G) / np.sum(G), rel=1e-10)


def test_selfsimilar_gaussian_drift_is_second_order():
    # without circulation G is stationary; what remains is truncation error
    params = PhysicalParams.from_gamma(0.0)
    drift = []
    for n in (48, 96):
        g = standard_window(n, 8.0)
        run = evolve_selfsimilar(gaussian_profile(g), g, params, 1e-3, 1.2e-3)
        assert run.eps[-1] == pytest.approx(1.2e-3)
        drift.append(np.abs(run.f[-1] - run.f[0]).max())
    assert drift[0] < 1e-2 * gaussian_profile(g).max()
    assert drift[0] / drift[1] == pytest.approx(4.0, rel=0.3)


def test_selfsimilar_tophat_relaxes_and_conserves():
    g = standard_window(48, 8.0)
    params = PhysicalParams.from_gamma(5.0)
    G = gaussian_profile(g)
    run = evolve_selfsimilar(tophat_profile(g), g, params, 0.01, 0.02, snapshot_eps=(0.014,))
    h2 = g.hr * g.hz
    dists = [np.sum(np.abs(f - G)) * h2 for f in run.f]
    assert dists[-1] < dists[0]
    imp = run.impulse_history
    assert abs(imp[-1] / imp[0] - 1) < 1e-6
    assert len(run.f) == 3


def test_selfsimilar_rejects_bad_range():
    g = standard_window(48, 8.0)
    with pytest.raises(DomainError):
        evolve_selfsimilar(gaussian_profile(g), g, PhysicalParams(), 0.05, 0.05)
