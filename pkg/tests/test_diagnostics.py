import math
import warnings

import numpy as np
import pytest
from scipy.integrate import quad

from vrlab.diagnostics import (
    FitError,
    GaussWeights,
    RescaledFrame,
    chi,
    cutoff_f0,
    diagnose_frame,
    energies,
    envelope_ratio,
    gaussian_distance,
    monitors,
    ring_speed,
    tail_checks,
    to_selfsimilar,
    x_norm,
)
from vrlab.evolution import gaussian_profile, make_filament_initial, standard_window
from vrlab.fields import DomainError, PhysicalParams, TruncationWarning, build_grid, trapezoid_weights


@pytest.fixture(scope="module")
def win():
    return standard_window(96, 12.0)


def frame(grid, f, eps=0.01, gamma=10.0):
    return RescaledFrame(eps, gamma, grid, f, eps * eps)


def test_norm_of_G(win):
    assert x_norm(win, gaussian_profile(win)) ** 2 == pytest.approx(1 / (4 * math.pi), rel=1e-10)


@pytest.mark.parametrize("delta", [0.01, -0.03])
def test_x_dist_of_scaled_G(win, delta):
    xd, l1 = gaussian_distance(frame(win, (1 + delta) * gaussian_profile(win)))
    assert xd == pytest.approx(abs(delta) / math.sqrt(4 * math.pi), rel=1e-9)
    assert l1 == pytest.approx(abs(delta), rel=1e-9)


def test_l1_dist_of_shifted_G(win):
    R, Z = win.mesh()
    f = GaussWeights.G(R - 0.1, Z)
    _, l1 = gaussian_distance(frame(win, f))
    # int |d_R G| = E|R|/2 with R ~ N(0, 2)
    assert l1 == pytest.approx(0.1 / math.sqrt(math.pi), rel=0.05)


def test_shifted_centre_recovers_G(win):
    R, Z = win.mesh()
    f = GaussWeights.G(R, Z - 0.3)
    assert gaussian_distance(frame(win, f), center_z=0.3)[1] < 1e-12
    assert gaussian_distance(frame(win, f))[1] > 0.1


def test_envelope_ratio(win):
    G = gaussian_profile(win)
    for eta in (0.125, 0.25, 0.5):
        assert envelope_ratio(frame(win, G), eta) == pytest.approx(1 / (4 * math.pi))
    assert envelope_ratio(frame(win, 2 * G), 0.25) == pytest.approx(0.1592, abs=5e-5)
    with pytest.raises(DomainError):
        envelope_ratio(frame(win, G), 1.0)


def test_chi_shape():
    x = np.linspace(0, 1, 2001)
    c = chi(x)
    assert np.all(c[x <= 0.25] == 1) and np.all(c[x >= 0.5] == 0)
    assert np.all(np.diff(c) <= 0)
    # C^1 at the junctions
    h = 1e-6
    for x0 in (0.25, 0.5):
        assert abs(chi(x0 + h) - chi(x0 - h)) / (2 * h) < 1e-4


def test_cutoff_regions(win):
    eps = 0.25
    R, Z = win.mesh()
    rho2 = R**2 + Z**2
    f0 = cutoff_f0(eps, win)
    G = gaussian_profile(win)
    assert np.array_equal(f0[rho2 <= 1 / (4 * eps * eps)], G[rho2 <= 1 / (4 * eps * eps)])
    assert np.all(f0[rho2 >= 1 / (2 * eps * eps)] == 0)
    with pytest.raises(DomainError):
        cutoff_f0(0.6, win)


@pytest.mark.parametrize("eps", [0.25, 0.1])
def test_cutoff_mass_deficit(win, eps):
    deficit = 1.0 - float(np.sum(cutoff_f0(eps, win) * trapezoid_weights(win)))

    def integrand(r):
        return (1.0 - float(chi(eps * eps * r * r))) * math.exp(-r * r / 4) * r / 2

    ref = quad(integrand, 0, 0.5 / eps)[0] + quad(integrand, 0.5 / eps, 1 / (math.sqrt(2) * eps))[0] + math.exp(-1 / (8 * eps * eps))
    assert deficit == pytest.approx(ref, rel=1e-3)
    assert 0 <= deficit <= math.exp(-1 / (16 * eps * eps))


def test_energies_of_scaled_G(win):
    d = 0.02
    E, bigE, m = energies(frame(win, (1 + d) * gaussian_profile(win)))
    assert E == pytest.approx(d * d / (8 * math.pi), rel=1e-8)
    assert bigE >= E
    assert m == pytest.approx(d, rel=1e-8)
    assert energies(frame(win, gaussian_profile(win)))[0] == 0.0


def _synthetic_track(A, B, n=40):
    t = np.geomspace(1e-4, 1e-2, n)
    # z' = A log(1/sqrt t) + B
    z = -0.5 * A * (t * np.log(t) - t) + B * t
    return t, z


def test_ring_speed_recovers_synthetic_fit():
    p = PhysicalParams.from_gamma(10.0)
    unit = p.gamma_circ / (4 * math.pi)
    t, z = _synthetic_track(unit, 0.5 * unit)
    fit = ring_speed(t, z, p)
    assert fit.slope_ratio == pytest.approx(1.0, rel=2e-3)
    assert fit.intercept_units == pytest.approx(0.5, abs=1e-2)


def test_ring_speed_without_circulation():
    p = PhysicalParams.from_gamma(0.0)
    t = np.geomspace(1e-4, 1e-2, 8)
    fit = ring_speed(t, np.zeros_like(t), p)
    assert fit.A == 0.0 and fit.B == 0.0


def test_ring_speed_needs_enough_snapshots():
    p = PhysicalParams()
    with pytest.raises(FitError):
        ring_speed([1e-4, 2e-4, 3e-4], [0, 0, 0], p)
    with pytest.raises(FitError):
        ring_speed(np.linspace(1e-4, 2e-4, 8), np.zeros(8), p)


def test_monitors_and_tails_of_G(win):
    fr = RescaledFrame(0.1, 10.0, win, gaussian_profile(win), 0.01)
    m = monitors(fr)
    assert m["omega"] == pytest.approx(1 / (4 * math.pi))
    assert math.isnan(m["u"])
    tr = tail_checks(fr)
    assert tr.far == 0.0
    assert tr.near < tr.near_bound
    assert tr.passed


def test_physical_gaussian_rescales_to_G():
    p = PhysicalParams.from_gamma(10.0)
    t = p.time_at(0.05)
    g = build_grid(1.4, -0.4, 0.4, 280, 160)
    w = make_filament_initial(p, t, g)
    win = standard_window(64, 6.0)
    fr = to_selfsimilar(w, t, p, window=win)
    G = gaussian_profile(win)
    assert np.abs(fr.f - G).max() < 2e-3 * G.max()
    rec = diagnose_frame(fr, p)
    assert rec.l1_norm == pytest.approx(p.gamma_circ, rel=1e-3)
    assert rec.eps == pytest.approx(0.05)
    assert rec.x_dist < 1e-3


def test_rescaling_beyond_grid_warns():
    p = PhysicalParams.from_gamma(10.0)
    t = p.time_at(0.05)
    w = make_filament_initial(p, t, build_grid(1.4, -0.4, 0.4, 280, 160))
    with pytest.warns(TruncationWarning):
        to_selfsimilar(w, t, p, window=standard_window(48, 12.0))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        to_selfsimilar(w, t, p, window=standard_window(48, 6.0))
