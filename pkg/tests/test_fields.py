import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vrlab.fields import (
    ConfigurationError,
    DegenerateCentroidError,
    DomainError,
    Grid,
    PhysicalParams,
    TruncationWarning,
    VorticityField,
    build_grid,
    lp_norm,
    moment,
    tail_mass,
    trapezoid_weights,
)


def gaussian_on(grid, rbar=1.0, zbar=0.0, sigma=0.1, mass=1.0):
    r, z = grid.mesh()
    w = mass * np.exp(-((r - rbar) ** 2 + (z - zbar) ** 2) / (2 * sigma**2)) / (2 * math.pi * sigma**2)
    w[0] = 0.0
    return VorticityField(grid, w)


@pytest.mark.parametrize(
    "args, hr, hz, n_r",
    [
        ((4.0, -2.0, 2.0, 4, 4), 1.0, 1.0, 5),
        ((1.0, 0.0, 1.0, 8, 8), 0.125, 0.125, 9),
        ((2.0, -1.0, 1.0, 7, 8), 2.0 / 7.0, 0.25, 8),
    ],
)
def test_build_grid_spacing(args, hr, hz, n_r):
    g = build_grid(*args)
    assert g.hr == hr and g.hz == hz
    assert g.r.size == n_r
    assert g.r[0] == 0.0 and g.r[-1] == pytest.approx(args[0], abs=1e-15)
    assert g.has_axis


@pytest.mark.parametrize("args", [(0.0, -1, 1, 8, 8), (1.0, 1, 1, 8, 8), (1.0, -1, 1, 3, 8), (1.0, -1, 1, 8, 2)])
def test_build_grid_rejects(args):
    with pytest.raises(ConfigurationError):
        build_grid(*args)


def test_grid_header_roundtrip():
    g = Grid(3.0, -1.5, 2.5, 12, 16, r_min=-1.0, planar=True)
    assert Grid.from_header(g.to_header()) == g


def test_trapezoid_weights_sum_to_area():
    g = build_grid(2.0, -1.0, 1.0, 7, 8)
    assert trapezoid_weights(g).sum() == pytest.approx(4.0, rel=1e-14)


def test_axis_column_must_vanish():
    g = build_grid(1.0, -1, 1, 8, 8)
    v = np.ones(g.shape)
    with pytest.raises(ConfigurationError):
        VorticityField(g, v)
    with pytest.raises(ConfigurationError):
        VorticityField(g, np.full(g.shape, np.nan))


def test_values_are_immutable():
    g = build_grid(1.0, -1, 1, 8, 8)
    f = VorticityField(g, np.zeros(g.shape))
    with pytest.raises(ValueError):
        f.values[1, 1] = 1.0


def test_norms_of_zero_field():
    g = build_grid(1.0, -1, 1, 8, 8)
    f = VorticityField(g, np.zeros(g.shape))
    for p in (1, 2, 3.5, math.inf):
        assert lp_norm(f, p) == 0.0
    assert moment(f, "mass") == 0.0
    assert tail_mass(f, "near_axis", 0.5) == 0.0 and tail_mass(f, "far", 0.5) == 0.0
    with pytest.raises(DegenerateCentroidError):
        moment(f, "centroid_z")


def test_hat_linf():
    g = build_grid(1.0, -1, 1, 8, 8)
    v = np.zeros(g.shape)
    v[4, 4] = 1.0
    assert lp_norm(VorticityField(g, v), math.inf) == 1.0


def test_lp_rejects_small_p():
    g = build_grid(1.0, -1, 1, 8, 8)
    with pytest.raises(DomainError):
        lp_norm(VorticityField(g, np.zeros(g.shape)), 0.5)


def test_gaussian_mass_and_impulse():
    # sigma = sqrt(nu t) with 8 points per sigma, window covers > 6 sigma
    s = 0.05
    g = build_grid(1.4, -0.4, 0.4, 224, 128)
    r, z = g.mesh()
    w = np.exp(-((r - 1) ** 2 + z**2) / (4 * s * s)) / (4 * math.pi * s * s)
    w[0] = 0
    f = VorticityField(g, w)
    assert lp_norm(f, 1) == pytest.approx(1.0, abs=1e-6)
    # variance 2 s^2 per axis: int r^2 = rbar^2 + 2 s^2
    assert moment(f, "impulse") == pytest.approx(1.0 + 2 * s * s, rel=1e-6)
    assert moment(f, "centroid_z") == pytest.approx(0.0, abs=1e-14)


def test_narrow_gaussian_impulse_tends_to_rbar_squared():
    g = build_grid(1.2, -0.2, 0.2, 480, 160)
    f = gaussian_on(g, sigma=0.01)
    assert moment(f, "impulse") == pytest.approx(1.0, abs=2e-4)


@settings(max_examples=25, deadline=None)
@given(lam=st.floats(min_value=-5, max_value=5).filter(lambda x: abs(x) > 1e-3))
def test_scaling_laws(lam):
    g = build_grid(2.0, -1, 1, 32, 32)
    f = gaussian_on(g, sigma=0.2)
    h = f * lam
    assert lp_norm(h, 1) == pytest.approx(abs(lam) * lp_norm(f, 1), rel=1e-12)
    assert lp_norm(h, 2) == pytest.approx(abs(lam) * lp_norm(f, 2), rel=1e-12)
    assert moment(h, "mass") == pytest.approx(lam * moment(f, "mass"), rel=1e-12)
    assert moment(h, "impulse") == pytest.approx(lam * moment(f, "impulse"), rel=1e-12)
    if lam > 0:
        assert moment(h, "centroid_z") == pytest.approx(moment(f, "centroid_z"), abs=1e-12)


def test_translation_by_one_cell_shifts_centroid():
    g = build_grid(2.0, -1, 1, 40, 40)
    a = gaussian_on(g, zbar=0.0, sigma=0.1)
    b = gaussian_on(g, zbar=g.hz, sigma=0.1)
    assert moment(b, "centroid_z") - moment(a, "centroid_z") == pytest.approx(g.hz, abs=1e-12)


def test_near_axis_tail_is_negligible():
    g = build_grid(1.4, -0.4, 0.4, 280, 160)
    f = gaussian_on(g, sigma=0.05)
    assert tail_mass(f, "near_axis", 0.5) < 2e-22


@pytest.mark.parametrize("rho", [0.5, 0.55, 1.0])
def test_tail_partition(rho):
    g = build_grid(2.0, -1, 1, 40, 40)
    f = gaussian_on(g, sigma=0.3)
    total = moment(f, "mass")
    assert tail_mass(f, "near_axis", rho) + tail_mass(f, "far", rho) == pytest.approx(total, rel=1e-12)


def test_margin_warning():
    g = build_grid(1.0, -0.5, 0.5, 16, 16)
    f = gaussian_on(g, rbar=0.9, sigma=0.2)
    with pytest.warns(TruncationWarning):
        assert not f.check_margin()
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert gaussian_on(build_grid(2, -1, 1, 40, 40), sigma=0.05).check_margin()


def test_params():
    p = PhysicalParams.from_gamma(10.0, nu=0.5)
    assert p.gamma == pytest.approx(10.0)
    assert p.eps(p.time_at(0.05)) == pytest.approx(0.05)
    with pytest.raises(ConfigurationError):
        PhysicalParams(nu=0)
