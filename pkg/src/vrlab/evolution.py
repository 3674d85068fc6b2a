"""Time integration of the vorticity equation, its linear and adjoint modes.

Physical-variable runs integrate

    d_t w + d_r(u_r w) + d_z(u_z w) = nu (d_r((1/r) d_r(r w)) + d_z^2 w)

on an (r, z) grid. Long runs from thin cores integrate the same equation in
self-similar variables (R, Z) with tau = log t on a fixed window:

    d_tau f = -div((gamma U - X/2) f) + d_R((1/q) d_R(q f)) + d_Z^2 f,   q = 1 + eps R.

Both are discretised by one conservative flux operator (:class:`TransportOperator`)
and stepped with SSP-RK2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .biot_savart import ColumnBiotSavart, ScaledBiotSavart, axis_distance
from .fields import (
    ConfigurationError,
    DomainError,
    Grid,
    PhysicalParams,
    VelocityField,
    VorticityField,
    build_window,
    lp_norm,
)

__all__ = [
    "BlowUpError",
    "SchemeError",
    "DataError",
    "TransportOperator",
    "EvolveOptions",
    "RunState",
    "Trajectory",
    "AdjointField",
    "make_filament_initial",
    "rhs",
    "evolve",
    "linear_evolve",
    "adjoint_evolve",
    "standard_window",
    "SelfSimilarRun",
    "gaussian_profile",
    "tophat_profile",
    "evolve_selfsimilar",
]

C_ADV = 0.4
C_DIFF = 0.4
L1_TOL = 1e-6


class BlowUpError(FloatingPointError):
    def __init__(self, msg, last_good=None):
        super().__init__(msg)
        self.last_good = last_good


class SchemeError(RuntimeError):
    pass


class DataError(ValueError):
    pass


class TransportOperator:
    """Conservative advection-diffusion(-reaction) operator on a node grid.

    tendency = -D_R(F_R) - D_Z(F_Z) + V f at active nodes, zero elsewhere.
    Radial faces carry a_R f (centred or upwind) plus the diffusive flux
    -D (q_{i+1} f_{i+1} - q_i f_i) / (h q_{i+1/2}); with q = 1 this is the
    plain Laplacian. Faces next to an inactive (Dirichlet) node take the
    outflow part of the advective flux only, so no mass enters through the
    boundary.

    Parameters
    ----------
    grid : Grid
    diffusivity : float
    upwind : bool
        First-order upwind advection instead of centred fluxes.
    """

    def __init__(self, grid: Grid, diffusivity: float, upwind: bool = False):
        self.grid = grid
        self.D = float(diffusivity)
        self.upwind = bool(upwind)
        self.edge_mask = grid.interior()

    def active(self, q: np.ndarray | None) -> np.ndarray:
        m = self.edge_mask.copy()
        if q is not None:
            m &= (q > 0)[:, None]
        return m

    def _face_coeffs(self, a: np.ndarray, act: np.ndarray, h: float, axis: int, q: np.ndarray | None):
        """Flux coefficients (cL, cR): flux = cL f_left + cR f_right on each face."""
        sl_l = [slice(None)] * 2
        sl_r = [slice(None)] * 2
        sl_l[axis] = slice(None, -1)
        sl_r[axis] = slice(1, None)
        sl_l, sl_r = tuple(sl_l), tuple(sl_r)
        aL, aR = a[sl_l], a[sl_r]
        actL, actR = act[sl_l], act[sl_r]
        if self.upwind:
            af = 0.5 * (aL + aR)
            cL = np.maximum(af, 0.0)
            cR = np.minimum(af, 0.0)
        else:
            cL = 0.5 * aL
            cR = 0.5 * aR
        onlyL = actL & ~actR
        onlyR = actR & ~actL
        cL = np.where(onlyL, np.maximum(aL, 0.0), cL)
        cR = np.where(onlyL, 0.0, cR)
        cR = np.where(onlyR, np.minimum(aR, 0.0), cR)
        cL = np.where(onlyR, 0.0, cL)
        if axis == 0 and q is not None:
            qL, qR = q[:-1], q[1:]
            qf = 0.5 * (qL + qR)
            with np.errstate(divide="ignore", invalid="ignore"):
                dL = np.where(qf > 0, self.D * qL / (h * qf), 0.0)[:, None]
                dR = np.where(qf > 0, self.D * qR / (h * qf), 0.0)[:, None]
        else:
            dL = dR = self.D / h
        cL = cL + dL
        cR = cR - dR
        none = ~(actL | actR)
        cL = np.where(none, 0.0, cL)
        cR = np.where(none, 0.0, cR)
        return cL, cR

    def coefficients(self, ar, az, q=None):
        act = self.active(q)
        g = self.grid
        cr = self._face_coeffs(ar, act, g.hr, 0, q)
        cz = self._face_coeffs(az, act, g.hz, 1, q)
        return act, cr, cz

    def apply(self, f: np.ndarray, ar: np.ndarray, az: np.ndarray, q: np.ndarray | None = None, V: np.ndarray | None = None, coeffs=None) -> np.ndarray:
        """Tendency of node values ``f`` (values at inactive nodes are ignored)."""
        g = self.grid
        act, (crL, crR), (czL, czR) = coeffs if coeffs is not None else self.coefficients(ar, az, q)
        f = np.where(act, f, 0.0)
        Fr = crL * f[:-1] + crR * f[1:]
        Fz = czL * f[:, :-1] + czR * f[:, 1:]
        T = np.zeros(g.shape)
        T[:-1] -= Fr / g.hr
        T[1:] += Fr / g.hr
        T[:, :-1] -= Fz / g.hz
        T[:, 1:] += Fz / g.hz
        if V is not None:
            T += V * f
        T[~act] = 0.0
        return T

    def matrix(self, ar, az, q=None, V=None, coeffs=None) -> sp.csr_matrix:
        """Sparse matrix A with A @ f.ravel() == apply(f).ravel() for every f."""
        g = self.grid
        act, (crL, crR), (czL, czR) = coeffs if coeffs is not None else self.coefficients(ar, az, q)
        nR, nZ = g.shape
        idx = np.arange(nR * nZ).reshape(nR, nZ)
        rows, cols, vals = [], [], []

        def add(r, c, v):
            rows.append(r.ravel())
            cols.append(c.ravel())
            vals.append(v.ravel())

        L, Rt = idx[:-1], idx[1:]
        add(L, L, -crL / g.hr)
        add(L, Rt, -crR / g.hr)
        add(Rt, L, crL / g.hr)
        add(Rt, Rt, crR / g.hr)
        L, Rt = idx[:, :-1], idx[:, 1:]
        add(L, L, -czL / g.hz)
        add(L, Rt, -czR / g.hz)
        add(Rt, L, czL / g.hz)
        add(Rt, Rt, czR / g.hz)
        if V is not None:
            add(idx, idx, np.broadcast_to(V, g.shape).astype(float))
        r = np.concatenate(rows)
        c = np.concatenate(cols)
        v = np.concatenate(vals)
        a = act.ravel()
        keep = a[r] & a[c]
        A = sp.csr_matrix((v[keep], (r[keep], c[keep])), shape=(nR * nZ, nR * nZ))
        A.sum_duplicates()
        return A


@dataclass(frozen=True)
class EvolveOptions:
    """Stepper options.

    ``velocity`` is ``"biot_savart"`` for the nonlinear equation, ``"zero"``
    for the linear semigroup, or a callable ``(t) -> (ur, uz)`` giving a
    prescribed field.
    """

    c_adv: float = C_ADV
    c_diff: float = C_DIFF
    upwind: bool = False
    velocity: object = "biot_savart"
    snapshot_times: tuple = ()
    record_steps: bool = False
    check_l1: bool = True
    max_steps: int = 10_000_000


@dataclass(frozen=True, eq=False)
class RunState:
    time: float
    omega: VorticityField
    velocity: VelocityField
    params: PhysicalParams
    step_count: int


@dataclass
class Trajectory:
    """Snapshots of a run plus, optionally, the per-step history for the adjoint."""

    states: list = field(default_factory=list)
    step_times: list = field(default_factory=list)
    step_dts: list = field(default_factory=list)
    step_omegas: list = field(default_factory=list)
    l1_history: list = field(default_factory=list)
    impulse_history: list = field(default_factory=list)
    params: PhysicalParams | None = None
    options: EvolveOptions | None = None

    @property
    def final(self) -> RunState:
        return self.states[-1]


@dataclass(frozen=True, eq=False)
class AdjointField:
    grid: Grid
    values: np.ndarray
    time: float


def make_filament_initial(params: PhysicalParams, t0: float, grid: Grid) -> VorticityField:
    """Leading Gaussian of the filament solution at time ``t0``.

    omega = Gamma/(4 pi nu t0) exp(-((r - rbar)^2 + (z - zbar)^2)/(4 nu t0)),
    zero on the axis column.
    """
    eps0 = params.eps(t0)
    if eps0 > 0.1 + 1e-12:
        raise ConfigurationError(f"initial aspect ratio {eps0:.4g} violates eps(t0) <= 0.1")
    s = math.sqrt(params.nu * t0)
    if max(grid.hr, grid.hz) > s / 8 * (1 + 1e-12):
        raise ConfigurationError(f"grid does not resolve the core: need <= {s / 8:.4g}, have {max(grid.hr, grid.hz):.4g}")
    R, Z = grid.mesh()
    w = params.gamma_circ / (4 * math.pi * params.nu * t0) * np.exp(-((R - params.rbar) ** 2 + (Z - params.zbar) ** 2) / (4 * params.nu * t0))
    if grid.has_axis:
        w[0] = 0.0
    return VorticityField(grid, w)


def _metric(grid: Grid) -> np.ndarray | None:
    return None if grid.planar else grid.r.copy()


def _bs_operator(grid: Grid) -> ColumnBiotSavart:
    return ColumnBiotSavart(axis_distance(grid, None), grid.nz + 1, grid.hr, grid.hz)


def rhs(omega: VorticityField, u: VelocityField, params: PhysicalParams, upwind: bool = False) -> np.ndarray:
    """Conservative tendency -div(u w) + nu (d_r((1/r) d_r(r w)) + d_z^2 w)."""
    op = TransportOperator(omega.grid, params.nu, upwind)
    return op.apply(omega.values, u.ur, u.uz, _metric(omega.grid))


def _impulse(grid: Grid, w: np.ndarray) -> float:
    return float(np.sum((grid.r**2)[:, None] * w) * grid.hr * grid.hz)


def _l1(grid: Grid, w: np.ndarray) -> float:
    return float(np.sum(np.abs(w)) * grid.hr * grid.hz)


def evolve(omega0: VorticityField, t0: float, t1: float, params: PhysicalParams, opts: EvolveOptions | None = None) -> Trajectory:
    """Integrate from ``t0`` to ``t1`` with SSP-RK2 in physical variables.

    Parameters
    ----------
    omega0 : VorticityField
        Initial vorticity (zero on the axis column).
    t0, t1 : float
        Start and end times, 0 < t0 < t1.
    params : PhysicalParams
    opts : EvolveOptions, optional
        Snapshot times (t0 and t1 are always included), velocity mode,
        CFL factors and step recording for the adjoint.

    Returns
    -------
    Trajectory
    """
    opts = opts or EvolveOptions()
    if not (t1 > t0 > 0):
        raise DomainError(f"need t1 > t0 > 0, got t0={t0}, t1={t1}")
    g = omega0.grid
    q = _metric(g)
    op = TransportOperator(g, params.nu, opts.upwind)
    if opts.velocity == "biot_savart":
        bs = _bs_operator(g)

        def velocity(w, t):
            return bs(w)
    elif opts.velocity == "zero":
        zero = np.zeros(g.shape)

        def velocity(w, t):
            return zero, zero
    elif callable(opts.velocity):
        velocity = lambda w, t: opts.velocity(t)  # noqa: E731
    else:
        raise ConfigurationError(f"unknown velocity mode {opts.velocity!r}")
    h = min(g.hr, g.hz)
    dt_diff = opts.c_diff * h * h / (4 * params.nu)
    snaps = sorted(set(float(s) for s in opts.snapshot_times if t0 < s < t1) | {float(t1)})
    traj = Trajectory(params=params, options=opts)
    w = np.array(omega0.values, dtype=float)
    t = float(t0)
    ur, uz = velocity(w, t)
    traj.states.append(RunState(t, omega0, VelocityField(g, ur, uz), params, 0))
    l1 = _l1(g, w)
    traj.l1_history.append(l1)
    traj.impulse_history.append(_impulse(g, w))
    n = 0
    for target in snaps:
        while t < target * (1 - 1e-14):
            umax = float(np.max(np.abs(ur))) if ur.size else 0.0
            umax = max(umax, float(np.max(np.abs(uz))))
            dt = dt_diff if umax == 0 else min(dt_diff, opts.c_adv * h / umax)
            if t + dt >= target or t + 1.5 * dt > target:
                dt = target - t if t + dt >= target else 0.5 * (target - t)
            if opts.record_steps:
                traj.step_times.append(t)
                traj.step_dts.append(dt)
                traj.step_omegas.append(w.copy())
            k1 = op.apply(w, ur, uz, q)
            w1 = w + dt * k1
            ur1, uz1 = velocity(w1, t + dt)
            k2 = op.apply(w1, ur1, uz1, q)
            wn = 0.5 * w + 0.5 * (w1 + dt * k2)
            n += 1
            if not np.all(np.isfinite(wn)):
                raise BlowUpError(f"non-finite vorticity at step {n}, t={t + dt:.6g}", last_good=traj.states[-1])
            l1n = _l1(g, wn)
            if opts.check_l1 and l1n > l1 * (1 + L1_TOL) + 1e-300:
                raise SchemeError(
                    f"L1 norm increased by {l1n / l1 - 1:.3e} at step {n} (t={t + dt:.6g}); "
                    "reduce the advective CFL factor or use upwind fluxes"
                )
            w, t, l1 = wn, t + dt, l1n
            traj.l1_history.append(l1)
            traj.impulse_history.append(_impulse(g, w))
            ur, uz = velocity(w, t)
            if n > opts.max_steps:
                raise SchemeError("step limit exceeded")
        t = target
        traj.states.append(RunState(t, VorticityField(g, w), VelocityField(g, ur, uz), params, n))
    return traj


def linear_evolve(omega0: VorticityField, t: float, nu: float, t_start: float = 1.0, upwind: bool = False) -> VorticityField:
    """Apply the linear semigroup for a duration ``t`` (velocity forced to zero).

    The semigroup is autonomous, so ``t_start`` only fixes the clock.
    """
    params = PhysicalParams(nu=nu, gamma_circ=0.0)
    traj = evolve(omega0, t_start, t_start + t, params, EvolveOptions(velocity="zero", upwind=upwind))
    return traj.final.omega


def adjoint_evolve(phi1: AdjointField, t0: float, trajectory: Trajectory) -> tuple[AdjointField, list]:
    """Integrate the adjoint equation backward from ``phi1.time`` to ``t0``.

    Each backward step applies the exact transpose of the corresponding
    forward SSP-RK2 step, rebuilt from the recorded vorticity of that step
    (stage velocities are recomputed bit-identically). The discrete pairing
    sum(w phi) is therefore invariant.

    Returns
    -------
    (AdjointField at t0, list of (t, max|phi|) for every step)
    """
    if not trajectory.step_omegas:
        raise DataError("trajectory has no recorded steps; run evolve with record_steps=True")
    params = trajectory.params
    opts = trajectory.options
    g = phi1.grid
    t_first = trajectory.step_times[0]
    t_last = trajectory.step_times[-1] + trajectory.step_dts[-1]
    if t0 < t_first - 1e-12 or phi1.time > t_last + 1e-12 or not t0 < phi1.time:
        raise DataError(f"stored history covers [{t_first}, {t_last}], requested [{t0}, {phi1.time}]")
    q = _metric(g)
    op = TransportOperator(g, params.nu, opts.upwind)
    if opts.velocity == "biot_savart":
        bs = _bs_operator(g)
        velocity = lambda w, t: bs(w)  # noqa: E731
    elif opts.velocity == "zero":
        zero = np.zeros(g.shape)
        velocity = lambda w, t: (zero, zero)  # noqa: E731
    else:
        velocity = lambda w, t: opts.velocity(t)  # noqa: E731
    steps = [k for k, (ts, dt) in enumerate(zip(trajectory.step_times, trajectory.step_dts)) if ts >= t0 - 1e-12 and ts + dt <= phi1.time + 1e-12]
    # forward steps hold inactive nodes fixed, so the transpose carries phi there unchanged
    phi = np.array(phi1.values, dtype=float).ravel()
    history = [(phi1.time, float(np.max(np.abs(phi))))]
    for k in reversed(steps):
        w = trajectory.step_omegas[k]
        t, dt = trajectory.step_times[k], trajectory.step_dts[k]
        ur, uz = velocity(w, t)
        A0 = op.matrix(ur, uz, q)
        w1 = w + dt * op.apply(w, ur, uz, q)
        ur1, uz1 = velocity(w1, t + dt)
        A1 = op.matrix(ur1, uz1, q)
        y = phi + dt * (A1.T @ phi)
        y = y + dt * (A0.T @ y)
        phi = 0.5 * phi + 0.5 * y
        history.append((t, float(np.max(np.abs(phi)))))
    t_out = trajectory.step_times[steps[0]] if steps else phi1.time
    return AdjointField(g, phi.reshape(g.shape), float(t_out)), history


# ---------------------------------------------------------------------------
# self-similar variables


def standard_window(n: int = 192, half_width: float = 12.0) -> Grid:
    """Square (R, Z) window [-L, L]^2 with n cells per side."""
    return build_window(-half_width, half_width, -half_width, half_width, n, n, planar=True)


def gaussian_profile(grid: Grid) -> np.ndarray:
    R, Z = grid.mesh()
    return np.exp(-(R**2 + Z**2) / 4.0) / (4.0 * math.pi)


def tophat_profile(grid: Grid, width: float = 0.5) -> np.ndarray:
    """Tanh-mollified disc of unit discrete mass and the same discrete second moment as G."""
    from scipy.optimize import brentq

    R, Z = grid.mesh()
    rho = np.hypot(R, Z)
    h2 = grid.hr * grid.hz
    target = np.sum((R**2 + Z**2) * gaussian_profile(grid)) / np.sum(gaussian_profile(grid))

    def shape(a):
        return 0.5 * (1.0 - np.tanh((rho - a) / width))

    def second(a):
        s = shape(a)
        return np.sum(rho**2 * s) / np.sum(s) - target

    a = brentq(second, 0.5, 8.0, xtol=1e-14)
    s = shape(a)
    return s / (np.sum(s) * h2)


@dataclass(frozen=True, eq=False)
class SelfSimilarRun:
    """Snapshots of a self-similar run: f, U^eps at each stored eps."""

    grid: Grid
    params: PhysicalParams
    times: list
    eps: list
    f: list
    ur: list
    uz: list
    l1_history: np.ndarray
    impulse_history: np.ndarray
    eps_history: np.ndarray
    steps: int


def evolve_selfsimilar(
    f0: np.ndarray,
    grid: Grid,
    params: PhysicalParams,
    eps0: float,
    eps_end: float,
    snapshot_eps: Iterable[float] = (),
    c_adv: float = C_ADV,
    c_diff: float = C_DIFF,
    upwind: bool = False,
    level_ratio: float = 1.2,
    bs: ScaledBiotSavart | None = None,
    progress: Callable | None = None,
) -> SelfSimilarRun:
    """Integrate the rescaled vorticity equation from eps0 to eps_end.

    Parameters
    ----------
    f0 : array
        Rescaled vorticity at ``eps0`` on ``grid`` (an (R, Z) window).
    grid : Grid
    params : PhysicalParams
        Supplies gamma = Gamma/nu and the time scale.
    eps0, eps_end : float
    snapshot_eps : iterable of float
        Aspect ratios at which to store snapshots (eps0, eps_end always stored).

    Notes
    -----
    The time variable is tau = log t, so eps = exp(tau/2) sqrt(nu)/rbar. Nodes
    with 1 + eps R <= 0 lie beyond the symmetry axis and are held at zero.
    """
    if not (0 < eps0 < eps_end):
        raise DomainError(f"need 0 < eps0 < eps_end, got {eps0}, {eps_end}")
    gamma = params.gamma
    bs = bs or ScaledBiotSavart(grid, ratio=level_ratio)
    op = TransportOperator(grid, 1.0, upwind)
    R = grid.r
    Z = grid.z
    driftR = np.broadcast_to(-0.5 * R[:, None], grid.shape)
    driftZ = np.broadcast_to(-0.5 * Z[None, :], grid.shape)
    h = min(grid.hr, grid.hz)
    dtau_diff = c_diff * h * h / 4.0
    targets = sorted(set(float(e) for e in snapshot_eps if eps0 < e < eps_end) | {float(eps_end)})
    dh2 = grid.hr * grid.hz

    def q_of(eps):
        return np.maximum(1.0 + eps * R, 0.0)

    def velocity(f, eps):
        if gamma == 0:
            z = np.zeros(grid.shape)
            return z, z
        return bs(f, eps)

    def impulse(f, eps):
        return float(np.sum((q_of(eps) ** 2)[:, None] * f) * dh2)

    f = np.array(f0, dtype=float)
    f[~op.active(q_of(eps0))] = 0.0
    eps = float(eps0)
    tau = 2.0 * math.log(eps)
    Ur, Uz = velocity(f, eps)
    out = {"times": [], "eps": [], "f": [], "ur": [], "uz": []}

    def store():
        out["times"].append(params.time_at(eps))
        out["eps"].append(eps)
        out["f"].append(f.copy())
        out["ur"].append(Ur.copy())
        out["uz"].append(Uz.copy())

    store()
    l1 = float(np.sum(np.abs(f)) * dh2)
    l1_hist = [l1]
    imp_hist = [impulse(f, eps)]
    eps_hist = [eps]
    n = 0
    for target in targets:
        tau_t = 2.0 * math.log(target)
        while tau < tau_t - 1e-13:
            aR = gamma * Ur + driftR
            aZ = gamma * Uz + driftZ
            amax = max(float(np.max(np.abs(aR))), float(np.max(np.abs(aZ))))
            dtau = min(dtau_diff, c_adv * h / amax) if amax > 0 else dtau_diff
            if tau + dtau >= tau_t:
                dtau = tau_t - tau
            elif tau + 1.5 * dtau > tau_t:
                dtau = 0.5 * (tau_t - tau)
            q0 = q_of(eps)
            k1 = op.apply(f, aR, aZ, q0)
            f1 = f + dtau * k1
            # eps = sqrt(nu t)/rbar, so d(eps)/d(tau) = eps/2 with tau = log t
            eps1 = eps * math.exp(0.5 * dtau)
            U1r, U1z = velocity(f1, eps1)
            k2 = op.apply(f1, gamma * U1r + driftR, gamma * U1z + driftZ, q_of(eps1))
            fn = 0.5 * f + 0.5 * (f1 + dtau * k2)
            n += 1
            if not np.all(np.isfinite(fn)):
                raise BlowUpError(f"non-finite state at step {n}, eps={eps1:.5g}")
            l1n = float(np.sum(np.abs(fn)) * dh2)
            if l1n > l1 * (1 + L1_TOL):
                raise SchemeError(f"L1 norm increased by {l1n / l1 - 1:.3e} at step {n} (eps={eps1:.5g})")
            f, eps, tau, l1 = fn, eps1, tau + dtau, l1n
            if abs(tau - tau_t) < 1e-13:
                eps = target
                tau = tau_t
            Ur, Uz = velocity(f, eps)
            l1_hist.append(l1)
            imp_hist.append(impulse(f, eps))
            eps_hist.append(eps)
            if progress is not None and n % 200 == 0:
                progress(n, eps)
        store()
    return SelfSimilarRun(
        grid=grid,
        params=params,
        times=out["times"],
        eps=out["eps"],
        f=out["f"],
        ur=out["ur"],
        uz=out["uz"],
        l1_history=np.array(l1_hist),
        impulse_history=np.array(imp_hist),
        eps_history=np.array(eps_hist),
        steps=n,
    )
