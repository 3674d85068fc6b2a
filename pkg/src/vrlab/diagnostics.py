"""Self-similar frames, Gaussian distances, energies, envelopes, tails, ring speed and monitors."""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .fields import (
    DomainError,
    Grid,
    PhysicalParams,
    TruncationWarning,
    VorticityField,
    lp_norm,
    moment,
    trapezoid_weights,
)

__all__ = [
    "FitError",
    "RescaledFrame",
    "GaussWeights",
    "DiagnosticsRecord",
    "frame_from_run",
    "to_selfsimilar",
    "gaussian_distance",
    "refined_l1_dist",
    "cutoff_f0",
    "chi",
    "energies",
    "envelope_ratio",
    "RingSpeedFit",
    "ring_speed",
    "monitors",
    "TailReport",
    "tail_checks",
    "diagnose_frame",
    "X_RADIUS",
    "x_norm",
    "tail_slopes",
]

X_RADIUS = 12.0
TAIL_FLOOR = 1e-14


class FitError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RescaledFrame:
    """Rescaled vorticity f(R, Z) = (nu t / Gamma) omega at aspect ratio ``eps``.

    ``ur``/``uz`` optionally hold the rescaled velocity U^eps = sqrt(nu t) u / Gamma.
    """

    eps: float
    gamma: float
    grid: Grid
    f: np.ndarray
    t: float
    ur: np.ndarray | None = None
    uz: np.ndarray | None = None

    @property
    def q(self) -> np.ndarray:
        return np.maximum(1.0 + self.eps * self.grid.r, 0.0)


class GaussWeights:
    """G(R, Z) = exp(-(R^2+Z^2)/4)/(4 pi) and w(R, Z) = exp((R^2+Z^2)/4)."""

    @staticmethod
    def G(R, Z):
        return np.exp(-(np.asarray(R) ** 2 + np.asarray(Z) ** 2) / 4.0) / (4.0 * math.pi)

    @staticmethod
    def w(R, Z):
        return np.exp((np.asarray(R) ** 2 + np.asarray(Z) ** 2) / 4.0)

    @classmethod
    def on(cls, grid: Grid):
        R, Z = grid.mesh()
        return cls.G(R, Z), cls.w(R, Z)


def frame_from_run(run, k: int) -> RescaledFrame:
    """k-th stored snapshot of a :class:`~vrlab.evolution.SelfSimilarRun`."""
    return RescaledFrame(run.eps[k], run.params.gamma, run.grid, run.f[k], run.times[k], run.ur[k], run.uz[k])


def to_selfsimilar(omega: VorticityField, t: float, params: PhysicalParams, window: Grid | None = None, velocity=None) -> RescaledFrame:
    """Rescale a physical field onto an (R, Z) window by bilinear interpolation.

    Points of the window outside the physical grid are filled with zero and
    reported with a :class:`TruncationWarning`; points beyond the axis
    (r < 0) are zero by definition.
    """
    from .evolution import standard_window

    if not t > 0:
        raise DomainError("to_selfsimilar needs t > 0")
    window = window or standard_window(192)
    g = omega.grid
    s = math.sqrt(params.nu * t)
    R, Z = window.mesh()
    r = params.rbar + s * R
    z = params.zbar + s * Z
    inside = (r >= g.r[0]) & (r <= g.r[-1]) & (z >= g.z[0]) & (z <= g.z[-1])
    outside_halfplane = r < 0
    if np.any(~inside & ~outside_halfplane):
        warnings.warn("rescaled window extends beyond the physical grid; filled with zero", TruncationWarning, stacklevel=2)
    pts = (np.clip(r, g.r[0], g.r[-1]), np.clip(z, g.z[0], g.z[-1]))
    scale = 1.0 if params.gamma_circ == 0 else params.nu * t / params.gamma_circ
    f = RegularGridInterpolator((g.r, g.z), omega.values)(pts) * scale
    f = np.where(inside, f, 0.0)
    ur = uz = None
    if velocity is not None:
        vs = 1.0 if params.gamma_circ == 0 else s / params.gamma_circ
        ur = np.where(inside, RegularGridInterpolator((g.r, g.z), velocity.ur)(pts) * vs, 0.0)
        uz = np.where(inside, RegularGridInterpolator((g.r, g.z), velocity.uz)(pts) * vs, 0.0)
    return RescaledFrame(params.eps(t), params.gamma, window, f, t, ur, uz)


def _disc_weights(grid: Grid, radius: float = X_RADIUS) -> np.ndarray:
    R, Z = grid.mesh()
    return np.where(R**2 + Z**2 <= radius**2, trapezoid_weights(grid), 0.0)


def _tail_warning(frame: RescaledFrame, radius: float = X_RADIUS):
    R, Z = frame.grid.mesh()
    outside = R**2 + Z**2 > radius**2
    tail = float(np.sum(np.abs(frame.f) * trapezoid_weights(frame.grid) * outside))
    if tail > 1e-8:
        warnings.warn(f"rescaled vorticity has mass {tail:.2e} outside radius {radius}", TruncationWarning, stacklevel=3)


def x_norm(grid: Grid, values: np.ndarray, radius: float = X_RADIUS) -> float:
    """sqrt(int values^2 exp((R^2+Z^2)/4)) over the disc of the given radius."""
    R, Z = grid.mesh()
    return math.sqrt(float(np.sum(values * values * GaussWeights.w(R, Z) * _disc_weights(grid, radius))))


def gaussian_distance(frame: RescaledFrame, center_z: float = 0.0) -> tuple[float, float]:
    """(||f - G||_X, ||f - G||_L1) with G optionally shifted to Z = ``center_z``.

    The weighted integral is truncated at radius 12.
    """
    _tail_warning(frame)
    g = frame.grid
    R, Z = g.mesh()
    d = frame.f - GaussWeights.G(R, Z - center_z)
    l1 = float(np.sum(np.abs(d) * trapezoid_weights(g)))
    return x_norm(g, d), l1


def refined_l1_dist(frame: RescaledFrame) -> float:
    """L1 distance to G centred at the leading-log position gamma*eps*log(1/eps)/(4 pi)."""
    zc = frame.gamma * frame.eps * math.log(1.0 / frame.eps) / (4.0 * math.pi)
    return gaussian_distance(frame, center_z=zc)[1]


def chi(x):
    """C^1 nonincreasing cutoff: 1 on [0, 1/4], cos^2(2 pi (x - 1/4)) on [1/4, 1/2], 0 beyond."""
    x = np.asarray(x, dtype=float)
    mid = np.cos(2.0 * math.pi * (x - 0.25)) ** 2
    return np.where(x <= 0.25, 1.0, np.where(x >= 0.5, 0.0, mid))


def cutoff_f0(eps: float, grid: Grid) -> np.ndarray:
    """f0 = G(R, Z) chi(eps^2 (R^2 + Z^2)) on ``grid``."""
    if not (0 < eps <= 0.5):
        raise DomainError(f"cutoff_f0 needs 0 < eps <= 1/2, got {eps}")
    R, Z = grid.mesh()
    rho2 = R**2 + Z**2
    return GaussWeights.G(R, Z) * chi(eps * eps * rho2)


def energies(frame: RescaledFrame, eps: float | None = None) -> tuple[float, float, float]:
    """(E, bigE, m) for f~ = f - f0.

    E = 1/2 int f~^2 w, bigE = 1/2 int (|grad f~|^2 + (1 + R^2 + Z^2) f~^2) w,
    m = int f~; gradients by centred differences, weighted integrals truncated
    at radius 12.
    """
    eps = frame.eps if eps is None else eps
    g = frame.grid
    R, Z = g.mesh()
    ft = frame.f - cutoff_f0(eps, g)
    w = GaussWeights.w(R, Z)
    wq = _disc_weights(g)
    E = 0.5 * float(np.sum(ft * ft * w * wq))
    gr = np.gradient(ft, g.hr, axis=0)
    gz = np.gradient(ft, g.hz, axis=1)
    bigE = 0.5 * float(np.sum((gr * gr + gz * gz + (1.0 + R**2 + Z**2) * ft * ft) * w * wq))
    m = float(np.sum(ft * trapezoid_weights(g)))
    return E, bigE, m


def envelope_ratio(frame: RescaledFrame, eta: float) -> float:
    """max f(R, Z) / exp(-(1 - eta)(R^2 + Z^2)/4) over the window."""
    if not (0 < eta < 1):
        raise DomainError("eta must lie in (0, 1)")
    R, Z = frame.grid.mesh()
    return float(np.max(frame.f * np.exp((1.0 - eta) * (R**2 + Z**2) / 4.0)))


@dataclass(frozen=True)
class RingSpeedFit:
    """Fit dz_c/dt = A log(1/eps) + B. ``unit`` is Gamma/(4 pi rbar)."""

    A: float
    B: float
    unit: float
    eps: np.ndarray
    speed: np.ndarray

    @property
    def slope_ratio(self) -> float:
        return self.A / self.unit if self.unit else float("nan")

    @property
    def intercept_units(self) -> float:
        return self.B / self.unit if self.unit else float("nan")


def ring_speed(times, centroids, params: PhysicalParams) -> RingSpeedFit:
    """Regress the centroid speed on log(rbar/sqrt(nu t)).

    Speeds are second-order central differences on the (possibly
    non-uniform) snapshot times, evaluated at the interior snapshots.

    Parameters
    ----------
    times, centroids : array
        Snapshot times and vorticity centroids z_c, at least 6 snapshots
        spanning a factor 2 in eps.
    params : PhysicalParams
    """
    t = np.asarray(times, dtype=float)
    z = np.asarray(centroids, dtype=float)
    if t.size < 6:
        raise FitError(f"ring_speed needs >= 6 snapshots, got {t.size}")
    eps = np.sqrt(params.nu * t) / params.rbar
    if eps.max() / eps.min() < 2.0 - 1e-12:
        raise FitError("snapshots must span a factor >= 2 in eps")
    o = np.argsort(t)
    t, z, eps = t[o], z[o], eps[o]
    h0 = t[1:-1] - t[:-2]
    h1 = t[2:] - t[1:-1]
    speed = (-h1 / (h0 * (h0 + h1))) * z[:-2] + ((h1 - h0) / (h0 * h1)) * z[1:-1] + (h0 / (h1 * (h0 + h1))) * z[2:]
    L = np.log(1.0 / eps[1:-1])
    unit = params.gamma_circ / (4.0 * math.pi * params.rbar)
    if np.allclose(speed, 0.0, atol=1e-14):
        return RingSpeedFit(0.0, 0.0, unit, eps[1:-1], speed)
    A, B = np.polyfit(L, speed, 1)
    return RingSpeedFit(float(A), float(B), unit, eps[1:-1], speed)


def monitors(frame: RescaledFrame, mass: float = 1.0) -> dict:
    """Scale-invariant monitors from a rescaled frame.

    With omega = Gamma f/(nu t) and u = Gamma U/sqrt(nu t) and M = mass*Gamma/nu:

    - ``omega``: t ||omega||_inf / M = max f / mass
    - ``omega_r``: t sqrt(nu t) ||omega/r||_inf / M = eps max(f/q) / mass
    - ``u``: sqrt(t/nu) ||u||_inf / M = max |U| / mass
    - ``ur_r``: t ||u_r/r||_inf / M = eps max |U_R/q| / mass
    - ``decay``: max (1 + |R| + |Z|) |U| / mass
    """
    q = frame.q[:, None]
    f = np.abs(frame.f)
    mass = mass if mass else 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        om_r = np.where(q > 0, f / q, 0.0)
    out = {
        "omega": float(f.max()) / mass,
        "omega_r": frame.eps * float(om_r.max()) / mass,
    }
    if frame.ur is None:
        out.update(u=float("nan"), ur_r=float("nan"), decay=float("nan"))
        return out
    R, Z = frame.grid.mesh()
    sp = np.hypot(frame.ur, frame.uz)
    with np.errstate(divide="ignore", invalid="ignore"):
        urq = np.where(q > 0, np.abs(frame.ur) / q, 0.0)
    out["u"] = float(sp.max()) / mass
    out["ur_r"] = frame.eps * float(urq.max()) / mass
    out["decay"] = float(np.max((1.0 + np.abs(R) + np.abs(Z)) * sp)) / mass
    return out


@dataclass(frozen=True)
class TailReport:
    eps: float
    near: float
    far: float
    near_bound: float
    far_bound: float
    rho_near: float
    rho_far: float

    @property
    def near_below_floor(self) -> bool:
        return self.near < TAIL_FLOOR

    @property
    def far_below_floor(self) -> bool:
        return self.far < TAIL_FLOOR

    @property
    def passed(self) -> bool:
        ok_n = self.near_below_floor or self.near <= self.near_bound
        ok_f = self.far_below_floor or self.far <= self.far_bound
        return ok_n and ok_f


def _region_mass(frame: RescaledFrame, mask_fn) -> float:
    g = frame.grid
    R, Z = g.mesh()
    return float(np.sum(frame.f * trapezoid_weights(g) * mask_fn(R)))


def tail_checks(frame: RescaledFrame, rho_near: float = 0.5, rho_far: float = 1.0) -> TailReport:
    """Normalised masses in r < rho_near and r > 3 rho_far with their Gaussian envelopes.

    Radii are in units of rbar; the envelopes are exp(-rho^2/(16 nu t)) =
    exp(-rho^2/(16 eps^2)) in those units.
    """
    e = frame.eps
    near = _region_mass(frame, lambda R: (1.0 + e * R) < rho_near)
    far = _region_mass(frame, lambda R: (1.0 + e * R) > 3.0 * rho_far)
    return TailReport(
        eps=e,
        near=max(near, 0.0),
        far=max(far, 0.0),
        near_bound=math.exp(-(rho_near**2) / (16 * e * e)),
        far_bound=math.exp(-(rho_far**2) / (16 * e * e)),
        rho_near=rho_near,
        rho_far=rho_far,
    )


def tail_slopes(reports: list[TailReport], params: PhysicalParams) -> tuple[float, float]:
    """Slopes of log(tail mass) against rbar^2/(nu t) over snapshots above the floor (nan if < 2)."""
    out = []
    for attr in ("near", "far"):
        x = np.array([1.0 / r.eps**2 for r in reports if getattr(r, attr) >= TAIL_FLOOR])
        y = np.array([math.log(getattr(r, attr)) for r in reports if getattr(r, attr) >= TAIL_FLOOR])
        out.append(float(np.polyfit(x, y, 1)[0]) if x.size >= 2 else float("nan"))
    return out[0], out[1]


@dataclass
class DiagnosticsRecord:
    t: float
    eps: float
    l1_norm: float
    linf_norm: float
    impulse: float
    centroid_z: float
    x_dist: float
    l1_dist: float
    l1_dist_refined: float
    E: float
    bigE: float
    mass_deficit: float
    envelope_1_8: float
    envelope_1_4: float
    envelope_1_2: float
    tail_near: float
    tail_far: float
    tail_far_half: float
    mon_omega: float
    mon_omega_r: float
    mon_u: float
    mon_ur_r: float
    mon_decay: float
    l1_decay: float

    @classmethod
    def header(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def row(self) -> list[float]:
        return [getattr(self, n) for n in self.header()]


def diagnose_frame(frame: RescaledFrame, params: PhysicalParams) -> DiagnosticsRecord:
    """All per-snapshot scalars for a rescaled frame of a filament run."""
    g = frame.grid
    w = trapezoid_weights(g)
    G_ = params.gamma_circ if params.gamma_circ else 1.0
    s = math.sqrt(params.nu * frame.t)
    q = frame.q[:, None]
    mass_f = float(np.sum(frame.f * w))
    l1_f = float(np.sum(np.abs(frame.f) * w))
    imp_f = float(np.sum(q * q * frame.f * w))
    zc = float(np.sum(g.z[None, :] * frame.f * w)) / mass_f if mass_f else float("nan")
    x_dist, l1_dist = gaussian_distance(frame)
    E, bigE, m = energies(frame)
    tr = tail_checks(frame, 0.5, 1.0)
    tr_half = tail_checks(frame, 0.5, 0.5)
    mon = monitors(frame)
    impulse = G_ * params.rbar**2 * imp_f
    return DiagnosticsRecord(
        t=frame.t,
        eps=frame.eps,
        l1_norm=G_ * l1_f,
        linf_norm=G_ * float(np.max(np.abs(frame.f))) / (params.nu * frame.t),
        impulse=impulse,
        centroid_z=params.zbar + s * zc,
        x_dist=x_dist,
        l1_dist=l1_dist,
        l1_dist_refined=refined_l1_dist(frame),
        E=E,
        bigE=bigE,
        mass_deficit=m,
        envelope_1_8=envelope_ratio(frame, 0.125),
        envelope_1_4=envelope_ratio(frame, 0.25),
        envelope_1_2=envelope_ratio(frame, 0.5),
        tail_near=tr.near,
        tail_far=tr.far,
        tail_far_half=tr_half.far,
        mon_omega=mon["omega"],
        mon_omega_r=mon["omega_r"],
        mon_u=mon["u"],
        mon_ur_r=mon["ur_r"],
        mon_decay=mon["decay"],
        l1_decay=G_ * l1_f * params.nu * frame.t / impulse if impulse else float("nan"),
    )
