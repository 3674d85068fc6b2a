import math

import numpy as np
import pytest

from conftest import lamb_oseen_speed
from vrlab.biot_savart import (
    BiotSavartError,
    ColumnBiotSavart,
    ScaledBiotSavart,
    axis_distance,
    axis_distance_integral,
    bs_axisym,
    bs_elliptic,
    bs_eps,
    filament_velocity,
    on_axis_speed,
    stream_function_eps,
    velocity_from_stream,
    velocity_gap_report,
)
from vrlab.evolution import gaussian_profile, standard_window
from vrlab.fields import DomainError, VorticityField, build_grid


@pytest.fixture(scope="module")
def gauss96():
    w = standard_window(96, 8.0)
    return VorticityField(w, gaussian_profile(w))


def _node(grid, r, z):
    return int(np.argmin(abs(grid.r - r))), int(np.argmin(abs(grid.z - z)))


@pytest.mark.parametrize("n, tol", [(48, 6e-3), (96, 2e-3)])
def test_planar_gaussian_is_lamb_oseen(n, tol):
    w = standard_window(n, 8.0)
    u = bs_eps(VorticityField(w, gaussian_profile(w)), 0.0)
    i, j = _node(w, 2.0, 0.0)
    ref = lamb_oseen_speed(2.0)
    assert ref == pytest.approx(0.050303, abs=1e-6)
    assert abs(u.ur[i, j]) < 1e-14
    assert -u.uz[i, j] == pytest.approx(ref, rel=tol)


def test_planar_velocity_is_antisymmetric(gauss_small):
    u = bs_eps(gauss_small, 0.0)
    np.testing.assert_allclose(u.uz, -u.uz[::-1, :], atol=1e-15)
    np.testing.assert_allclose(u.ur, -u.ur[:, ::-1], atol=1e-15)


@pytest.mark.parametrize("eps", [0.0, 0.05, 0.1])
def test_column_fft_equals_direct_sum(gauss_small, eps):
    w = gauss_small.grid
    op = ColumnBiotSavart(axis_distance(w, eps), w.nz + 1, w.hr, w.hz)
    ur, uz = op(gauss_small.values)
    ref = bs_eps(gauss_small, eps)
    np.testing.assert_allclose(ur, ref.ur, atol=1e-14)
    np.testing.assert_allclose(uz, ref.uz, atol=1e-14)


def test_scaled_operator_exact_at_levels_and_between(gauss_small):
    op = ScaledBiotSavart(gauss_small.grid, ratio=1.2)
    e = 1.2**-16
    ur, _ = op(gauss_small.values, e)
    np.testing.assert_allclose(ur, bs_eps(gauss_small, e).ur, atol=1e-14)
    mid = 0.5 * (1.2**-16 + 1.2**-15)
    ur_mid, uz_mid = op(gauss_small.values, mid)
    ref = bs_eps(gauss_small, mid)
    scale = np.abs(ref.uz).max()
    assert np.abs(uz_mid - ref.uz).max() < 2e-3 * scale


def test_direct_vs_elliptic(gauss96):
    a = bs_eps(gauss96, 0.05)
    b = bs_elliptic(gauss96, 0.05)
    rel = math.sqrt(np.sum((a.ur - b.ur) ** 2 + (a.uz - b.uz) ** 2) / np.sum(a.ur**2 + a.uz**2))
    assert rel < 1e-3


@pytest.mark.parametrize("n, tol", [(48, 1e-2), (96, 3e-3)])
def test_stream_function_differentiates_to_velocity(n, tol):
    w = standard_window(n, 8.0)
    f = VorticityField(w, gaussian_profile(w))
    a = bs_eps(f, 0.05)
    b = velocity_from_stream(stream_function_eps(f, 0.05))
    d = np.hypot(a.ur - b.ur, a.uz - b.uz)[1:-1, 1:-1]
    assert d.max() < tol * np.abs(a.uz).max()


def test_physical_velocity_is_divergence_free():
    g = build_grid(2.0, -1.0, 1.0, 64, 64)
    r, z = g.mesh()
    w = np.exp(-((r - 1) ** 2 + z**2) / 0.02)
    w[0] = 0
    u = bs_axisym(VorticityField(g, w))
    div = u.divergence()[8:-8, 8:-8]
    assert np.nanmax(np.abs(div)) < 0.02 * np.abs(u.uz).max() / g.hr
    # axis column carries no radial flow
    assert np.abs(u.ur[0]).max() < 1e-14


def test_window_crossing_axis_is_rejected(gauss_small):
    with pytest.raises(BiotSavartError):
        bs_eps(gauss_small, 0.2)


def test_gap_shrinks_with_eps():
    w = standard_window(32, 6.0)
    f = VorticityField(w, gaussian_profile(w))
    g1 = velocity_gap_report(f, 0.1)
    g2 = velocity_gap_report(f, 0.05)
    assert g2.max_gap < 0.6 * g1.max_gap
    assert 0 < g1.fitted_C < 10 and 0 < g2.fitted_C < 10
    with pytest.raises(DomainError):
        velocity_gap_report(f, 0.0)


def test_filament_on_axis_speed():
    assert filament_velocity((0.0, 0.0, 0.0))[2] == pytest.approx(0.5, abs=1e-12)
    for h in (0.5, 2.0):
        assert filament_velocity((0.0, 0.0, h))[2] == pytest.approx(on_axis_speed(h), rel=1e-10)


@pytest.mark.parametrize("d", [10.0, 20.0])
@pytest.mark.parametrize("axis", [0, 2])
def test_filament_far_field_decays_like_cube(d, axis):
    x = np.zeros(3)
    x[axis] = d
    ratio = np.linalg.norm(filament_velocity(x)) / np.linalg.norm(filament_velocity(2 * x))
    assert ratio == pytest.approx(8.0, rel=0.15)


def test_filament_rejects_point_on_curve():
    with pytest.raises(DomainError):
        filament_velocity((1.0, 0.0, 0.0))


@pytest.mark.parametrize("x, ref", [((1.0, 0.0, 1.0), 2 * math.pi / math.sqrt(5)), ((0.0, 0.0, 1.0), math.pi)])
def test_axis_distance_integral_values(x, ref):
    q, c, d = axis_distance_integral(x)
    assert q == pytest.approx(ref, rel=1e-12)
    assert c == pytest.approx(ref, rel=1e-14)
    assert abs(d) < 1e-10


def test_axis_distance_integral_bounded(rng):
    worst = 0.0
    for x in rng.uniform(-3, 3, size=(300, 3)):
        q, c, d = axis_distance_integral(x)
        assert abs(d) < 1e-8
        worst = max(worst, q)
    assert worst <= math.sqrt(2) * math.pi + 1e-9
    assert axis_distance_integral((0.3, 0.2, 0.0)) == (0.0, 0.0, 0.0)
