"""Gaussian upper bounds for advection-diffusion fundamental solutions.

The planar equation d_t Phi + U.grad Phi - V Phi = nu Lap Phi is integrated in
parabolic variables xi = x / sqrt(nu t), tau = log t, with
Phi = g(xi, tau) / (nu t):

    d_tau g = Lap g + div(xi g / 2) - div(U~ g) + t V g,   U~ = sqrt(t/nu) U.

A source that is the heat kernel at t_src is exactly g = G, so the near
field stays resolved at every time with a fixed grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .evolution import C_ADV, C_DIFF, BlowUpError, TransportOperator
from .fields import DomainError, Grid, build_window, trapezoid_weights

__all__ = [
    "AronsonError",
    "DriftSpec",
    "KernelEstimate",
    "BoundReport",
    "h_tilde",
    "estimate_fundamental",
    "aronson_check",
    "smoothing_rate",
    "heat_kernel",
]


class AronsonError(ValueError):
    pass


def h_tilde(tau: float) -> float:
    """H~(tau) = (1/sqrt(pi tau)) int_{-pi/4}^{pi/4} exp(-sin^2(phi)/tau) cos(2 phi) dphi."""
    tau = float(tau)
    if not tau > 0 or not math.isfinite(tau):
        raise DomainError(f"h_tilde requires tau > 0, got {tau}")

    def integrand(p):
        return math.exp(-math.sin(p) ** 2 / tau) * math.cos(2 * p)

    # even integrand; resolve the sqrt(tau) peak at phi = 0
    pts = [0.0]
    b = math.sqrt(tau)
    while b < math.pi / 4:
        pts.append(b)
        b *= 4.0
    pts.append(math.pi / 4)
    total = 0.0
    for a, c in zip(pts[:-1], pts[1:]):
        val, _ = integrate.quad(integrand, a, c, epsabs=1e-14, epsrel=1e-13, limit=200)
        total += val
    return 2.0 * total / math.sqrt(math.pi * tau)


def heat_kernel(x, y, t, nu: float = 1.0):
    """Planar heat kernel (4 pi nu t)^-1 exp(-|x|^2/(4 nu t)) centred at the origin."""
    return np.exp(-(np.asarray(x) ** 2 + np.asarray(y) ** 2) / (4 * nu * t)) / (4 * math.pi * nu * t)


@dataclass(frozen=True)
class DriftSpec:
    """Divergence-free drift U and potential V with their bound constants.

    ``U(x, y, t) -> (ux, uy)`` and ``V(x, y, t) -> v`` act on physical
    coordinates. ``K1`` bounds sqrt(t/nu)|U| and ``K2`` bounds int ||V||_inf dt.
    """

    name: str
    U: Callable | None
    V: Callable | None
    K1: float
    K2: float

    @classmethod
    def none(cls) -> "DriftSpec":
        return cls("none", None, None, 0.0, 0.0)

    @classmethod
    def shear(cls, k1: float, ell: float, nu: float = 1.0) -> "DriftSpec":
        """U = k1 sqrt(nu/t) sin(y/ell) e_1."""

        def U(x, y, t):
            return k1 * math.sqrt(nu / t) * np.sin(y / ell) + 0.0 * x, np.zeros(np.broadcast(x, y).shape)

        return cls(f"shear(k1={k1},ell={ell})", U, None, float(k1), 0.0)

    @classmethod
    def rotation(cls, k1: float, radius_xi: float, nu: float = 1.0) -> "DriftSpec":
        """Rigid rotation U = Omega(t)(-y, x), with Omega chosen so sqrt(t/nu)|U| <= k1 on |x| <= radius_xi sqrt(nu t)."""

        def U(x, y, t):
            om = k1 / (radius_xi * t)
            return -om * y + 0.0 * x, om * x + 0.0 * y

        return cls(f"rotation(k1={k1})", U, None, float(k1), 0.0)

    def with_potential(self, k2: float, t_start: float, t_end: float) -> "DriftSpec":
        """Add the uniform potential V = k2/(t_end - t_start) on [t_start, t_end]."""
        rate = k2 / (t_end - t_start)

        def V(x, y, t):
            return np.full(np.broadcast(x, y).shape, rate if t_start <= t <= t_end else 0.0)

        return DriftSpec(self.name + f"+V(k2={k2})", self.U, V, self.K1, float(k2))


@dataclass(frozen=True, eq=False)
class KernelEstimate:
    """Phi(x, t; 0, 0) at the requested times on a parabolic (xi) window.

    ``g[k]`` is the rescaled profile at ``times[k]``; physical values are
    g / (nu t) at x = xi sqrt(nu t).
    """

    grid: Grid
    nu: float
    t_src: float
    times: np.ndarray
    g: list
    drift: DriftSpec

    def phi(self, k: int) -> np.ndarray:
        return self.g[k] / (self.nu * self.times[k])

    def coords(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        X, Y = self.grid.mesh()
        s = math.sqrt(self.nu * self.times[k])
        return X * s, Y * s

    def mass(self, k: int) -> float:
        return float(np.sum(self.g[k] * trapezoid_weights(self.grid)))

    def linf(self, k: int) -> float:
        return float(np.max(self.phi(k)))


def estimate_fundamental(
    drift: DriftSpec,
    nu: float,
    t_list,
    n: int = 128,
    half_width: float = 10.0,
    src_ratio: float = 100.0,
    c_adv: float = C_ADV,
    c_diff: float = C_DIFF,
) -> KernelEstimate:
    """Evolve the heat kernel at t_src = t_list[0]/src_ratio under the drift.

    Parameters
    ----------
    drift : DriftSpec
    nu : float
    t_list : sequence of float
        Output times, increasing.
    n : int
        Cells per side of the parabolic window [-half_width, half_width]^2.
    """
    times = np.asarray(sorted(float(t) for t in t_list))
    if times[0] <= 0:
        raise DomainError("times must be positive")
    if src_ratio < 100:
        raise DomainError("source time must satisfy t_src <= t_list[0]/100")
    t_src = times[0] / src_ratio
    g_ = build_window(-half_width, half_width, -half_width, half_width, n, n, planar=True)
    X, Y = g_.mesh()
    op = TransportOperator(g_, 1.0, upwind=False)
    h = min(g_.hr, g_.hz)
    dtau_diff = c_diff * h * h / 4.0
    g = np.exp(-(X**2 + Y**2) / 4.0) / (4 * math.pi)
    g[~op.active(None)] = 0.0

    def coeff(tau):
        t = math.exp(tau)
        s = math.sqrt(nu * t)
        aX = -0.5 * X
        aY = -0.5 * Y
        if drift.U is not None:
            ux, uy = drift.U(X * s, Y * s, t)
            aX = aX + math.sqrt(t / nu) * ux
            aY = aY + math.sqrt(t / nu) * uy
        V = None
        if drift.V is not None:
            V = t * drift.V(X * s, Y * s, t)
        return aX, aY, V

    tau = math.log(t_src)
    out = []
    for tk in times:
        tau_k = math.log(tk)
        while tau < tau_k - 1e-13:
            aX, aY, V = coeff(tau)
            amax = max(float(np.max(np.abs(aX))), float(np.max(np.abs(aY))))
            dtau = min(dtau_diff, c_adv * h / amax)
            if tau + dtau >= tau_k:
                dtau = tau_k - tau
            elif tau + 1.5 * dtau > tau_k:
                dtau = 0.5 * (tau_k - tau)
            g1 = g + dtau * op.apply(g, aX, aY, None, V)
            aX1, aY1, V1 = coeff(tau + dtau)
            g = 0.5 * g + 0.5 * (g1 + dtau * op.apply(g1, aX1, aY1, None, V1))
            tau += dtau
            if not np.all(np.isfinite(g)):
                raise BlowUpError(f"non-finite kernel estimate at t={math.exp(tau):.4g}")
        tau = tau_k
        out.append(g.copy())
    return KernelEstimate(g_, nu, t_src, times, out, drift)


@dataclass(frozen=True)
class BoundReport:
    """Outcome of the Gaussian bound check.

    ``log_C`` is the smallest log C_2 for which
    log Phi + log(nu t) + |x|^2/(4 nu t) - K1 |x|/sqrt(nu t) - K2 <= log C_2
    at every probe; ``max_violation`` is the excess over ``reference_C``.
    """

    C: float
    log_C: float
    reference_C: float
    max_violation: float
    probes: int
    skipped: int
    table: np.ndarray = field(repr=False)


def aronson_check(est: KernelEstimate, drift: DriftSpec | None = None, nu: float | None = None, radius: float = 5.0, floor: float = 1e-200, reference_C: float = 1.0 / (4 * math.pi)) -> BoundReport:
    """Fit C_2 in the tilted Gaussian bound over probes |x| <= radius sqrt(nu t).

    Returns the fitted constant and a probe table with columns
    (t, x, y, Phi, lhs).
    """
    drift = drift or est.drift
    nu = est.nu if nu is None else nu
    if len(est.times) < 3:
        raise AronsonError("need at least three times")
    X, Y = est.grid.mesh()
    rho = np.hypot(X, Y)
    sel = rho <= radius
    rows = []
    skipped = 0
    for k, t in enumerate(est.times):
        g = est.g[k][sel]
        xi = rho[sel]
        ok = g > floor * est.g[k].max()
        skipped += int(np.count_nonzero(~ok))
        g, xi_ok = g[ok], xi[ok]
        phi = g / (nu * t)
        lhs = np.log(phi) + math.log(nu * t) + xi_ok**2 / 4.0 - drift.K1 * xi_ok - drift.K2
        s = math.sqrt(nu * t)
        rows.append(np.column_stack([np.full(g.size, t), X[sel][ok] * s, Y[sel][ok] * s, phi, lhs]))
    table = np.vstack(rows)
    log_C = float(table[:, 4].max())
    return BoundReport(
        C=math.exp(log_C),
        log_C=log_C,
        reference_C=reference_C,
        max_violation=float(max(0.0, math.exp(log_C) / reference_C - 1.0)),
        probes=int(table.shape[0]),
        skipped=skipped,
        table=table,
    )


def smoothing_rate(times, linf) -> float:
    """Least-squares exponent of ||Phi(t)||_inf against t (log-log).

    Parameters
    ----------
    times, linf : sequence of float
        At least four positive samples.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(linf, dtype=float)
    ok = (t > 0) & (v > 0)
    if np.count_nonzero(ok) < 4:
        raise AronsonError("smoothing_rate needs at least four usable times")
    slope, _ = np.polyfit(np.log(t[ok]), np.log(v[ok]), 1)
    return float(slope)
