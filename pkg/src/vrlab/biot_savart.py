"""Parametrised Biot-Savart law, stream function, elliptic cross-check and filament integrals.

All axisymmetric kernels are written in terms of the distance to the symmetry
axis, ``x`` (the radius r in physical variables, R + 1/eps in rescaled
variables). With that convention the rescaled law and the physical law are the
same formula and the kernel argument is xi^2 = rho^2 / (x x').
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import fft as sfft
from scipy import integrate

from .fields import ConfigurationError, DomainError, Grid, VelocityField, VorticityField, build_window
from .kernels import KernelTable, default_table

__all__ = [
    "BiotSavartError",
    "StreamField",
    "axis_distance",
    "kernel_coefficients",
    "bs_eps",
    "bs_axisym",
    "ColumnBiotSavart",
    "ScaledBiotSavart",
    "stream_function_eps",
    "velocity_from_stream",
    "bs_elliptic",
    "velocity_gap_report",
    "GapReport",
    "filament_velocity",
    "axis_distance_integral",
]

TWO_PI = 2.0 * math.pi
FOUR_PI = 4.0 * math.pi
# mean of log|x| over the centred square of side 1
_LOG_CELL_MEAN = math.log(0.5) + 0.5 * math.log(2.0) - 1.5 + math.pi / 4


class BiotSavartError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class StreamField:
    """Stream function samples.

    ``eps > 0``: rescaled phi^eps on an (R, Z) grid. ``eps is None``: the
    physical Stokes stream function psi on an (r, z) grid.
    """

    grid: Grid
    values: np.ndarray
    eps: float | None


def axis_distance(grid: Grid, eps: float | None) -> np.ndarray:
    """Distance to the axis of each grid column, in grid units.

    ``eps=None`` reads the grid as physical (x = r); ``eps > 0`` reads it as
    rescaled (x = R + 1/eps); ``eps = 0`` is planar and returns +inf.
    """
    if eps is None:
        return grid.r.copy()
    if eps < 0:
        raise DomainError(f"eps must be >= 0, got {eps}")
    if eps == 0:
        return np.full(grid.nr + 1, np.inf)
    return grid.r + 1.0 / eps


def kernel_coefficients(xt, xs, dx, dz, table: KernelTable | None = None):
    """Velocity kernel (K_r, K_z) for unit vorticity at (xs, .) seen from (xt, .).

    ``dx = xt - xs`` and ``dz = zt - zs``. Infinite axis distance means the
    planar kernel. Coincident points get zero (self-term convention); a target
    on the axis (xt = 0) uses the exact ring-on-axis limit.
    """
    table = table or default_table()
    xt, xs, dx, dz = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (xt, xs, dx, dz)))
    rho2 = dx * dx + dz * dz
    Kr = np.zeros(rho2.shape)
    Kz = np.zeros(rho2.shape)
    planar = np.isinf(xt)
    live = (rho2 > 0) & (xs > 0) & (xt >= 0)
    p = live & planar
    if np.any(p):
        Kr[p] = dz[p] / (TWO_PI * rho2[p])
        Kz[p] = -dx[p] / (TWO_PI * rho2[p])
    on_axis = live & ~planar & (xt == 0)
    if np.any(on_axis):
        Kz[on_axis] = 0.5 * xs[on_axis] ** 2 / rho2[on_axis] ** 1.5
    a = live & ~planar & (xt > 0)
    if np.any(a):
        x1 = xt[a]
        x2 = xs[a]
        r2 = rho2[a]
        F, Ft = table(r2 / (x1 * x2))
        ratio = np.sqrt(x2 / x1)
        common = ratio * Ft / (TWO_PI * r2)
        Kr[a] = common * dz[a]
        Kz[a] = -common * dx[a] + ratio / x1 * (F + Ft) / FOUR_PI
    return Kr, Kz


def _check_support(f: VorticityField, xcol: np.ndarray, eps: float | None):
    v = np.abs(f.values)
    peak = v.max()
    if peak == 0:
        return
    bad = xcol <= 0
    if np.any(bad) and v[bad].max() > 1e-12 * peak:
        raise BiotSavartError(f"vorticity does not vanish where 1+eps*R <= 0 (eps={eps})")


def _direct_sum(f: VorticityField, xcol: np.ndarray, table: KernelTable | None, chunk: int = 2048):
    g = f.grid
    X, Z = np.meshgrid(xcol, g.z, indexing="ij")
    # relative coordinates keep the planar case finite
    Rloc, _ = g.mesh()
    vals = f.values.ravel()
    src = np.flatnonzero(vals)
    ur = np.zeros(vals.size)
    uz = np.zeros(vals.size)
    if src.size == 0:
        return ur.reshape(g.shape), uz.reshape(g.shape)
    xs = X.ravel()[src]
    rs = Rloc.ravel()[src]
    zs = Z.ravel()[src]
    ws = vals[src] * (g.hr * g.hz)
    xt_all = X.ravel()
    rt_all = Rloc.ravel()
    zt_all = Z.ravel()
    tgt = np.flatnonzero(xt_all >= 0) if np.all(np.isfinite(xcol)) else np.arange(vals.size)
    step = max(1, chunk * 2048 // max(src.size, 1))
    for k in range(0, tgt.size, step):
        t = tgt[k : k + step]
        Kr, Kz = kernel_coefficients(
            xt_all[t, None], xs[None, :], rt_all[t, None] - rs[None, :], zt_all[t, None] - zs[None, :], table
        )
        ur[t] = Kr @ ws
        uz[t] = Kz @ ws
    return ur.reshape(g.shape), uz.reshape(g.shape)


def bs_eps(f: VorticityField, eps: float, table: KernelTable | None = None) -> VelocityField:
    """Rescaled velocity U^eps of a rescaled vorticity f by direct summation.

    Parameters
    ----------
    f : VorticityField
        Samples of f on an (R, Z) grid (``grid.r`` holds R).
    eps : float
        Aspect ratio; 0 gives the planar law.

    Notes
    -----
    O(N^2) reference implementation with uniform cell weights and a zero
    self-cell. :class:`ColumnBiotSavart` evaluates the same sum with FFTs.
    """
    if eps < 0:
        raise DomainError(f"eps must be >= 0, got {eps}")
    xcol = axis_distance(f.grid, eps)
    _check_support(f, xcol, eps)
    ur, uz = _direct_sum(f, xcol, table)
    return VelocityField(f.grid, ur, uz)


def bs_axisym(omega: VorticityField, table: KernelTable | None = None) -> VelocityField:
    """Physical (u_r, u_z) of an azimuthal vorticity field on an (r, z) grid."""
    if omega.grid.planar:
        raise ConfigurationError("bs_axisym needs an axisymmetric grid")
    ur, uz = _direct_sum(omega, axis_distance(omega.grid, None), table)
    return VelocityField(omega.grid, ur, uz)


class ColumnBiotSavart:
    """Exact evaluation of the discrete Biot-Savart sum with FFTs along z.

    The kernel depends on the two axis distances and on z - z' only, so for
    every pair of columns the sum over z is a discrete convolution.

    Parameters
    ----------
    xcol : array
        Axis distance of each column (``inf`` for planar). Columns with
        ``xcol < 0`` are inactive and produce and receive nothing.
    nz1 : int
        Number of nodes per column.
    hx, hz : float
        Node spacings (cell weight hx*hz).
    """

    def __init__(self, xcol, nz1: int, hx: float, hz: float, table: KernelTable | None = None, row_chunk: int = 24):
        xcol = np.asarray(xcol, dtype=float)
        self.xcol = xcol
        self.n = xcol.size
        self.nz1 = int(nz1)
        self.P = sfft.next_fast_len(2 * self.nz1 - 1, real=True)
        nf = self.P // 2 + 1
        table = table or default_table()
        planar = np.all(np.isinf(xcol))
        xoff = np.arange(self.n) * hx
        dzs = np.arange(self.nz1) * hz
        S = np.zeros((nf, self.n, self.n))
        C = np.zeros((nf, self.n, self.n))
        active = np.flatnonzero(xcol >= 0) if not planar else np.arange(self.n)
        for k in range(0, active.size, row_chunk):
            rows = active[k : k + row_chunk]
            xt = xcol[rows][:, None, None]
            xs = xcol[active][None, :, None]
            dx = (xoff[rows][:, None, None] - xoff[active][None, :, None])
            Kr, Kz = kernel_coefficients(xt, xs, dx, dzs[None, None, :], table)
            nr_, na_ = rows.size, active.size
            buf_r = np.zeros((nr_, na_, self.P))
            buf_z = np.zeros((nr_, na_, self.P))
            buf_r[..., : self.nz1] = Kr
            buf_z[..., : self.nz1] = Kz
            # negative offsets: K_r is odd in dz, K_z even
            buf_r[..., self.P - self.nz1 + 1 :] = -Kr[..., :0:-1]
            buf_z[..., self.P - self.nz1 + 1 :] = Kz[..., :0:-1]
            sr = sfft.rfft(buf_r, axis=-1).imag
            cz = sfft.rfft(buf_z, axis=-1).real
            w = hx * hz
            S[:, rows[:, None], active[None, :]] = np.moveaxis(sr, -1, 0) * w
            C[:, rows[:, None], active[None, :]] = np.moveaxis(cz, -1, 0) * w
        self.S = S
        self.C = C

    def __call__(self, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return (u_x, u_z) for node values of shape (n, nz1)."""
        fh = sfft.rfft(values, n=self.P, axis=1)  # (n, nf)
        ab = np.stack([fh.real.T, fh.imag.T], axis=-1)  # (nf, n, 2)
        ms = self.S @ ab
        mc = self.C @ ab
        ur_h = (-ms[..., 1] + 1j * ms[..., 0]).T
        uz_h = (mc[..., 0] + 1j * mc[..., 1]).T
        ur = sfft.irfft(ur_h, n=self.P, axis=1)[:, : self.nz1]
        uz = sfft.irfft(uz_h, n=self.P, axis=1)[:, : self.nz1]
        return ur, uz


class ScaledBiotSavart:
    """U^eps on a fixed (R, Z) grid for slowly varying eps.

    Operators are built at geometric levels eps_k = ratio**k and the velocity
    is interpolated linearly in eps between the two bracketing levels.
    """

    def __init__(self, grid: Grid, ratio: float = 1.2, table: KernelTable | None = None, cache_size: int = 3):
        self.grid = grid
        self.ratio = float(ratio)
        self.table = table
        self.cache_size = cache_size
        self._cache: dict[int, ColumnBiotSavart] = {}
        self._order: list[int] = []

    def level(self, k: int) -> ColumnBiotSavart:
        op = self._cache.get(k)
        if op is None:
            g = self.grid
            op = ColumnBiotSavart(axis_distance(g, self.ratio**k), g.nz + 1, g.hr, g.hz, self.table)
            self._cache[k] = op
            self._order.append(k)
            while len(self._order) > self.cache_size:
                self._cache.pop(self._order.pop(0))
        else:
            self._order.remove(k)
            self._order.append(k)
        return op

    def __call__(self, values: np.ndarray, eps: float) -> tuple[np.ndarray, np.ndarray]:
        if eps == 0:
            op = self._cache.get(None)
            if op is None:
                g = self.grid
                op = ColumnBiotSavart(np.full(g.nr + 1, np.inf), g.nz + 1, g.hr, g.hz, self.table)
                self._cache[None] = op
            return op(values)
        lk = math.log(eps) / math.log(self.ratio)
        k0 = math.floor(lk)
        e0, e1 = self.ratio**k0, self.ratio ** (k0 + 1)
        th = (eps - e0) / (e1 - e0)
        u0r, u0z = self.level(k0)(values)
        if th == 0.0:
            return u0r, u0z
        u1r, u1z = self.level(k0 + 1)(values)
        return (1 - th) * u0r + th * u1r, (1 - th) * u0z + th * u1z


def stream_function_eps(f: VorticityField, eps: float | None, table: KernelTable | None = None) -> StreamField:
    """Stream function by direct summation of the F kernel.

    ``eps > 0``: phi^eps(R,Z) = (1/2pi) sum sqrt(q q') F(xi^2) f' h^2 on a
    rescaled grid. ``eps=None``: physical psi on an (r, z) grid. The
    logarithmic self-cell is integrated with its cell-average.
    """
    table = table or default_table()
    if eps is not None and not eps > 0:
        raise DomainError("stream_function_eps needs eps > 0")
    g = f.grid
    xcol = axis_distance(g, eps)
    _check_support(f, xcol, eps)
    scale = eps if eps is not None else 1.0
    X, Z = np.meshgrid(xcol, g.z, indexing="ij")
    vals = f.values.ravel()
    src = np.flatnonzero(vals)
    out = np.zeros(vals.size)
    if src.size:
        xs = X.ravel()[src]
        zs = Z.ravel()[src]
        ws = vals[src] * g.hr * g.hz
        xt = X.ravel()
        zt = Z.ravel()
        tgt = np.flatnonzero(xt > 0)
        h = math.sqrt(g.hr * g.hz)
        # cell mean of F near the singularity: log 8 - 2 - <log rho> + log sqrt(x x')
        step = max(1, 4_000_000 // src.size)
        for k in range(0, tgt.size, step):
            t = tgt[k : k + step]
            rho2 = (xt[t, None] - xs[None, :]) ** 2 + (zt[t, None] - zs[None, :]) ** 2
            xx = xt[t, None] * xs[None, :]
            self_cell = rho2 == 0
            arg = np.where(self_cell, 1.0, rho2 / xx)
            F, _ = table(arg)
            Fself = math.log(8.0) - 2.0 - (math.log(h) + _LOG_CELL_MEAN) + 0.5 * np.log(xx)
            F = np.where(self_cell, Fself, F)
            out[t] = (np.sqrt(xx) * F) @ ws
    return StreamField(g, (scale / TWO_PI) * out.reshape(g.shape), eps)


def velocity_from_stream(stream: StreamField) -> VelocityField:
    """U_R = -d_Z phi / q, U_Z = d_R phi / q by centred differences (zero on edges)."""
    g = stream.grid
    phi = stream.values
    if stream.eps is None:
        q = g.r.copy()
    else:
        q = stream.eps * axis_distance(g, stream.eps)
    ur = np.zeros(g.shape)
    uz = np.zeros(g.shape)
    qi = q[1:-1, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        dz = (phi[1:-1, 2:] - phi[1:-1, :-2]) / (2 * g.hz)
        dr = (phi[2:, 1:-1] - phi[:-2, 1:-1]) / (2 * g.hr)
        ur[1:-1, 1:-1] = np.where(qi > 0, -dz / qi, 0.0)
        uz[1:-1, 1:-1] = np.where(qi > 0, dr / qi, 0.0)
    return VelocityField(g, ur, uz)


def _stretched_axis(lo_core: float, hi_core: float, h: float, lo_far: float, hi_far: float, growth: float):
    """Uniform nodes on [lo_core, hi_core] extended geometrically to the far limits."""
    core = lo_core + h * np.arange(int(round((hi_core - lo_core) / h)) + 1)
    left = []
    x, d = core[0], h
    while x > lo_far:
        d *= growth
        x -= d
        left.append(max(x, lo_far))
        if x <= lo_far:
            break
    right = []
    x, d = core[-1], h
    while x < hi_far:
        d *= growth
        x += d
        right.append(min(x, hi_far))
        if x >= hi_far:
            break
    nodes = np.concatenate([np.array(left[::-1]), core, np.array(right)])
    return nodes, len(left)


def bs_elliptic(
    f: VorticityField,
    eps: float,
    far: float = 16.0,
    growth: float = 1.08,
    refine: int = 1,
    return_stream: bool = False,
):
    """Velocity from a finite-difference solve of the stream-function equation.

    Solves -d_R((1/q) d_R phi) - (1/q) d_Z^2 phi = f with phi = 0 on the axis
    q = 0 and on a far rectangle, then differentiates. The uniform input grid
    is embedded in a mesh that is uniform over the input window (optionally
    refined by ``refine``) and stretched geometrically outside it, up to a
    distance ``far/eps`` (``far`` ring radii).

    Parameters
    ----------
    f : VorticityField
        Rescaled vorticity on an (R, Z) grid.
    eps : float
        Aspect ratio, > 0.
    far : float
        Outer boundary distance in units of the ring radius.
    growth : float
        Geometric growth factor of the stretched spacing.
    refine : int
        Integer refinement of the uniform core; the source is interpolated
        bilinearly.
    """
    if not eps > 0:
        raise DomainError("bs_elliptic needs eps > 0")
    g = f.grid
    _check_support(f, axis_distance(g, eps), eps)
    h_r = g.hr / refine
    h_z = g.hz / refine
    R_axis = -1.0 / eps
    Rn, off_r = _stretched_axis(g.r[0], g.r[-1], h_r, R_axis, far / eps, growth)
    Zn, off_z = _stretched_axis(g.z[0], g.z[-1], h_z, g.z[0] - far / eps, g.z[-1] + far / eps, growth)
    if Rn[0] > R_axis + 1e-12:
        Rn = np.concatenate([[R_axis], Rn])
        off_r += 1
    nR, nZ = Rn.size, Zn.size
    q = 1.0 + eps * Rn
    q[0] = max(q[0], 0.0)
    # source on the full mesh
    src = np.zeros((nR, nZ))
    core = f.values
    if refine > 1:
        from scipy.interpolate import RegularGridInterpolator

        ip = RegularGridInterpolator((g.r, g.z), core)
        Rc = Rn[off_r : off_r + g.nr * refine + 1]
        Zc = Zn[off_z : off_z + g.nz * refine + 1]
        RR, ZZ = np.meshgrid(np.clip(Rc, g.r[0], g.r[-1]), np.clip(Zc, g.z[0], g.z[-1]), indexing="ij")
        core = ip((RR, ZZ))
    src[off_r : off_r + core.shape[0], off_z : off_z + core.shape[1]] = core
    # interior unknowns i=1..nR-2, j=1..nZ-2; finite-volume style nonuniform stencil
    ii = np.arange(1, nR - 1)
    jj = np.arange(1, nZ - 1)
    hm_r = Rn[ii] - Rn[ii - 1]
    hp_r = Rn[ii + 1] - Rn[ii]
    hc_r = 0.5 * (hm_r + hp_r)
    qm = 0.5 * (q[ii] + q[ii - 1])
    qp = 0.5 * (q[ii] + q[ii + 1])
    hm_z = Zn[jj] - Zn[jj - 1]
    hp_z = Zn[jj + 1] - Zn[jj]
    hc_z = 0.5 * (hm_z + hp_z)
    ni, nj = ii.size, jj.size
    idx = np.arange(ni * nj).reshape(ni, nj)
    aW = (1.0 / (qm * hm_r * hc_r))[:, None] * np.ones((1, nj))
    aE = (1.0 / (qp * hp_r * hc_r))[:, None] * np.ones((1, nj))
    aS = (1.0 / q[ii])[:, None] / (hm_z * hc_z)[None, :]
    aN = (1.0 / q[ii])[:, None] / (hp_z * hc_z)[None, :]
    diag = aW + aE + aS + aN
    rows = [idx.ravel()]
    cols = [idx.ravel()]
    data = [diag.ravel()]
    for a, di, dj in ((aW, -1, 0), (aE, 1, 0), (aS, 0, -1), (aN, 0, 1)):
        I = np.arange(ni)[:, None] + di
        J = np.arange(nj)[None, :] + dj
        ok = (I >= 0) & (I < ni) & (J >= 0) & (J < nj)
        I, J = np.broadcast_arrays(I, J)
        rows.append(idx[ok])
        cols.append(idx[I[ok], J[ok]])
        data.append(-a[ok])
    A = sp.csc_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(ni * nj, ni * nj)
    )
    b = src[1:-1, 1:-1].ravel()
    x = spla.splu(A).solve(b)
    res = np.max(np.abs(A @ x - b)) / max(np.max(np.abs(b)), 1e-300)
    if not res < 1e-9:
        raise BiotSavartError(f"elliptic solve residual {res:.2e} exceeds 1e-9")
    phi = np.zeros((nR, nZ))
    phi[1:-1, 1:-1] = x.reshape(ni, nj)
    # centred differences on the uniform core, then restrict to input nodes
    sl_r = slice(off_r, off_r + g.nr * refine + 1, refine)
    sl_z = slice(off_z, off_z + g.nz * refine + 1, refine)
    dphi_R = np.zeros((nR, nZ))
    dphi_Z = np.zeros((nR, nZ))
    dphi_R[1:-1] = (phi[2:] - phi[:-2]) / (Rn[2:] - Rn[:-2])[:, None]
    dphi_Z[:, 1:-1] = (phi[:, 2:] - phi[:, :-2]) / (Zn[2:] - Zn[:-2])[None, :]
    qc = q[sl_r][:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        ur = np.where(qc > 0, -dphi_Z[sl_r, sl_z] / qc, 0.0)
        uz = np.where(qc > 0, dphi_R[sl_r, sl_z] / qc, 0.0)
    vel = VelocityField(g, ur, uz)
    if return_stream:
        return vel, StreamField(g, phi[sl_r, sl_z].copy(), eps), res
    return vel


@dataclass(frozen=True)
class GapReport:
    eps: float
    max_gap: float
    majorant: float
    fitted_C: float
    max_ratio: float


def _gap_majorant(f: VorticityField, eps: float, probes: np.ndarray) -> np.ndarray:
    """Sum of (eps/q)(1 + log+(q/(eps rho))) |f'| h^2 at each probe (C = 1)."""
    g = f.grid
    R, Z = g.mesh()
    w = np.abs(f.values).ravel() * g.hr * g.hz
    nz = np.flatnonzero(w)
    Rs, Zs, ws = R.ravel()[nz], Z.ravel()[nz], w[nz]
    out = np.empty(len(probes))
    for k, (pr, pz) in enumerate(probes):
        q = 1.0 + eps * pr
        if q <= 0:
            raise DomainError("probe point with 1 + eps*R <= 0")
        rho = np.hypot(pr - Rs, pz - Zs)
        rho = np.maximum(rho, 0.5 * min(g.hr, g.hz))
        lg = np.maximum(np.log(q / (eps * rho)), 0.0)
        out[k] = (eps / q) * np.sum((1.0 + lg) * ws)
    return out


def velocity_gap_report(f: VorticityField, eps: float, probes: np.ndarray | None = None, stride: int = 4) -> GapReport:
    """Compare U^eps with the planar U^0 and with the gap majorant.

    The probe set defaults to every ``stride``-th interior node. The fitted
    constant is the smallest C for which C*majorant bounds the gap there.
    """
    if not eps > 0:
        raise DomainError("velocity_gap_report needs eps > 0")
    g = f.grid
    u1 = bs_eps(f, eps)
    u0 = bs_eps(f, 0.0)
    gap = np.hypot(u1.ur - u0.ur, u1.uz - u0.uz)
    if probes is None:
        I = np.arange(1, g.nr, stride)
        J = np.arange(1, g.nz, stride)
        II, JJ = np.meshgrid(I, J, indexing="ij")
        II, JJ = II.ravel(), JJ.ravel()
        probes = np.stack([g.r[II], g.z[JJ]], axis=1)
        gp = gap[II, JJ]
    else:
        probes = np.asarray(probes, dtype=float)
        from scipy.interpolate import RegularGridInterpolator

        gp = RegularGridInterpolator((g.r, g.z), gap)(probes)
    maj = _gap_majorant(f, eps, probes)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(maj > 0, gp / maj, 0.0)
    C = float(ratio.max()) if ratio.size else 0.0
    return GapReport(eps=eps, max_gap=float(gap.max()), majorant=float(maj.max()) if maj.size else 0.0, fitted_C=C, max_ratio=C)


def filament_velocity(x, rbar: float = 1.0, circulation: float = 1.0) -> np.ndarray:
    """Velocity induced by a circular filament of radius ``rbar`` in the plane x3 = 0.

    U(x) = Gamma * int grad G(x - gamma(s)) ^ gamma'(s) ds with G = 1/(4 pi |x|),
    evaluated by adaptive quadrature over the angle.
    """
    x = np.asarray(x, dtype=float) / rbar
    rho_c = math.hypot(math.hypot(x[0], x[1]) - 1.0, x[2])
    if rho_c < 1e-9:
        raise DomainError("point lies on the filament")

    def comp(k):
        def integrand(s):
            c, sn = math.cos(s), math.sin(s)
            d = (x[0] - c, x[1] - sn, x[2])
            tang = (-sn, c, 0.0)
            cross = (
                tang[1] * d[2] - tang[2] * d[1],
                tang[2] * d[0] - tang[0] * d[2],
                tang[0] * d[1] - tang[1] * d[0],
            )
            r3 = (d[0] ** 2 + d[1] ** 2 + d[2] ** 2) ** 1.5
            return cross[k] / r3

        pts = [math.atan2(x[1], x[0])] if rho_c < 0.5 else None
        val, _ = integrate.quad(integrand, -math.pi, math.pi, epsabs=1e-13, epsrel=1e-12, limit=400, points=pts)
        return val

    u = np.array([comp(0), comp(1), comp(2)]) / FOUR_PI
    return circulation * u / rbar


def on_axis_speed(h: float, rbar: float = 1.0, circulation: float = 1.0) -> float:
    """Closed-form axial speed on the symmetry axis at height h above the filament."""
    return circulation * rbar**2 / (2.0 * (rbar**2 + h**2) ** 1.5)


def axis_distance_integral(x) -> tuple[float, float, float]:
    """I(x) = int_{-pi}^{pi} |x3| / |x - gamma(s)|^2 ds for the unit circle.

    Returns
    -------
    (quadrature, closed_form, difference)
    """
    x = np.asarray(x, dtype=float)
    x1, x2, x3 = x
    a3 = abs(x3)
    n2 = x1 * x1 + x2 * x2 + x3 * x3
    closed = TWO_PI * a3 / math.sqrt(max((1.0 + n2) ** 2 - 4.0 * (x1 * x1 + x2 * x2), 0.0)) if a3 > 0 else 0.0
    if a3 == 0:
        return 0.0, 0.0, 0.0
    # |x - gamma(s)|^2 = 1 + |x|^2 - 2 sqrt(x1^2+x2^2) cos(s - theta)
    rr = math.hypot(x1, x2)

    def integrand(s):
        return a3 / (1.0 + n2 - 2.0 * rr * math.cos(s))

    quad, _ = integrate.quad(integrand, -math.pi, math.pi, epsabs=1e-13, epsrel=1e-13, limit=400, points=[0.0])
    return quad, closed, quad - closed
