"""Half-plane grids, node-centred fields, trapezoid quadrature and moments."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Literal

import numpy as np

__all__ = [
    "ConfigurationError",
    "DomainError",
    "DegenerateCentroidError",
    "TruncationWarning",
    "PhysicalParams",
    "Grid",
    "VorticityField",
    "VelocityField",
    "build_grid",
    "build_window",
    "lp_norm",
    "moment",
    "tail_mass",
    "trapezoid_weights",
]


MIN_CELLS = 4


class ConfigurationError(ValueError):
    pass


class DomainError(ValueError):
    pass


class DegenerateCentroidError(ArithmeticError):
    pass


class TruncationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PhysicalParams:
    """Viscosity, circulation and filament position.

    ``gamma_circ`` is the circulation Gamma; ``gamma`` is the circulation
    Reynolds number Gamma/nu.
    """

    nu: float = 1.0
    gamma_circ: float = 1.0
    rbar: float = 1.0
    zbar: float = 0.0

    def __post_init__(self):
        if not self.nu > 0:
            raise ConfigurationError(f"nu must be positive, got {self.nu}")
        if not self.rbar > 0:
            raise ConfigurationError(f"rbar must be positive, got {self.rbar}")
        if not math.isfinite(self.gamma_circ / self.nu):
            raise ConfigurationError("Gamma/nu must be finite")

    @property
    def gamma(self) -> float:
        return self.gamma_circ / self.nu

    def eps(self, t: float) -> float:
        if not t > 0:
            raise DomainError(f"eps(t) needs t > 0, got {t}")
        return math.sqrt(self.nu * t) / self.rbar

    def time_at(self, eps: float) -> float:
        """Time at which sqrt(nu t)/rbar equals ``eps``."""
        return (eps * self.rbar) ** 2 / self.nu

    @classmethod
    def from_gamma(cls, gamma: float, nu: float = 1.0, rbar: float = 1.0, zbar: float = 0.0) -> "PhysicalParams":
        return cls(nu=nu, gamma_circ=gamma * nu, rbar=rbar, zbar=zbar)


@dataclass(frozen=True)
class Grid:
    """Uniform node-centred grid on a rectangle of the (r, z) half-plane.

    Nodes are ``r_i = r_min + i*hr`` (i = 0..nr) and ``z_j = z_min + j*hz``
    (j = 0..nz). With ``r_min = 0`` the first column is the symmetry axis.
    A window grid (``r_min > 0``) or a planar grid (``planar=True``, any
    ``r_min``) treats every edge as a homogeneous Dirichlet boundary.
    """

    r_max: float
    z_min: float
    z_max: float
    nr: int
    nz: int
    r_min: float = 0.0
    planar: bool = False

    def __post_init__(self):
        if not self.r_max > self.r_min:
            raise ConfigurationError(f"need r_max > r_min, got {self.r_max} <= {self.r_min}")
        if not self.z_max > self.z_min:
            raise ConfigurationError(f"need z_max > z_min, got {self.z_max} <= {self.z_min}")
        if self.nr < 2 or self.nz < 2:
            raise ConfigurationError("need at least two cells per direction")
        if self.r_min < 0 and not self.planar:
            raise ConfigurationError("an axisymmetric grid must lie in r >= 0")

    @property
    def hr(self) -> float:
        return (self.r_max - self.r_min) / self.nr

    @property
    def hz(self) -> float:
        return (self.z_max - self.z_min) / self.nz

    @property
    def shape(self) -> tuple[int, int]:
        """Array shape (nr+1, nz+1); axis 0 is r, axis 1 is z."""
        return (self.nr + 1, self.nz + 1)

    @property
    def r(self) -> np.ndarray:
        return self.r_min + self.hr * np.arange(self.nr + 1)

    @property
    def z(self) -> np.ndarray:
        return self.z_min + self.hz * np.arange(self.nz + 1)

    @property
    def has_axis(self) -> bool:
        return (not self.planar) and self.r_min == 0.0

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.r, self.z, indexing="ij")

    def interior(self) -> np.ndarray:
        """Boolean mask of nodes that are not on a Dirichlet edge."""
        m = np.zeros(self.shape, dtype=bool)
        m[1:-1, 1:-1] = True
        return m

    def to_header(self) -> dict:
        return {
            "r_min": repr(self.r_min),
            "r_max": repr(self.r_max),
            "z_min": repr(self.z_min),
            "z_max": repr(self.z_max),
            "nr": str(self.nr),
            "nz": str(self.nz),
            "planar": str(int(self.planar)),
        }

    @classmethod
    def from_header(cls, h: dict) -> "Grid":
        return cls(
            r_max=float(h["r_max"]),
            z_min=float(h["z_min"]),
            z_max=float(h["z_max"]),
            nr=int(h["nr"]),
            nz=int(h["nz"]),
            r_min=float(h.get("r_min", 0.0)),
            planar=bool(int(h.get("planar", 0))),
        )


def build_grid(r_max: float, z_min: float, z_max: float, nr: int, nz: int) -> Grid:
    """Build a half-plane grid whose first column is the symmetry axis.

    Parameters
    ----------
    r_max, z_min, z_max : float
        Extent of the truncated half-plane.
    nr, nz : int
        Cell counts, at least ``MIN_CELLS`` each.
    """
    if not r_max > 0 or not z_max > z_min:
        raise ConfigurationError("grid extent must be positive")
    if nr < MIN_CELLS or nz < MIN_CELLS:
        raise ConfigurationError(f"need nr, nz >= {MIN_CELLS}, got {nr}x{nz}")
    return Grid(r_max=float(r_max), z_min=float(z_min), z_max=float(z_max), nr=int(nr), nz=int(nz))


def build_window(x_min: float, x_max: float, z_min: float, z_max: float, nx: int, nz: int, planar: bool = False) -> Grid:
    """Rectangle with Dirichlet data on all four edges (off-axis or planar)."""
    return Grid(r_max=float(x_max), z_min=float(z_min), z_max=float(z_max), nr=int(nx), nz=int(nz), r_min=float(x_min), planar=planar)


def trapezoid_weights(grid: Grid) -> np.ndarray:
    """Tensor-product trapezoid weights for the planar measure dr dz."""
    wr = np.full(grid.nr + 1, grid.hr)
    wr[[0, -1]] *= 0.5
    wz = np.full(grid.nz + 1, grid.hz)
    wz[[0, -1]] *= 0.5
    return np.outer(wr, wz)


def _integrate(grid: Grid, values: np.ndarray) -> float:
    # fixed summation order keeps results bit-reproducible
    return float(np.sum(trapezoid_weights(grid) * values))


@dataclass(frozen=True, eq=False)
class VorticityField:
    """Node-centred samples of the azimuthal vorticity on ``grid``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ConfigurationError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ConfigurationError("vorticity values must be finite")
        if self.grid.has_axis and np.any(v[0] != 0.0):
            raise ConfigurationError("vorticity must vanish on the axis column")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def check_margin(self, cells: int = 3, rel: float = 1e-10) -> bool:
        """Warn if the field is not negligible near the outer boundary."""
        v = np.abs(self.values)
        peak = v.max()
        if peak == 0:
            return True
        edge = np.zeros(v.shape, dtype=bool)
        edge[-cells:, :] = True
        edge[:, :cells] = True
        edge[:, -cells:] = True
        if not self.grid.has_axis:
            edge[:cells, :] = True
        ok = bool(v[edge].max() <= rel * peak)
        if not ok:
            warnings.warn("field is not negligible near the truncated boundary", TruncationWarning, stacklevel=2)
        return ok

    def __mul__(self, lam: float) -> "VorticityField":
        return VorticityField(self.grid, self.values * lam)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class VelocityField:
    grid: Grid
    ur: np.ndarray
    uz: np.ndarray

    def __post_init__(self):
        for name in ("ur", "uz"):
            a = np.asarray(getattr(self, name), dtype=float)
            if a.shape != self.grid.shape:
                raise ConfigurationError(f"{name} shape {a.shape} does not match grid {self.grid.shape}")
            if not np.all(np.isfinite(a)):
                raise ConfigurationError(f"{name} must be finite")
            object.__setattr__(self, name, a)

    @property
    def speed(self) -> np.ndarray:
        return np.hypot(self.ur, self.uz)

    def divergence(self) -> np.ndarray:
        """Centred-difference d(ur)/dr + ur/r + d(uz)/dz at interior nodes (planar: no ur/r)."""
        g = self.grid
        div = np.full(g.shape, np.nan)
        d = (self.ur[2:, 1:-1] - self.ur[:-2, 1:-1]) / (2 * g.hr) + (self.uz[1:-1, 2:] - self.uz[1:-1, :-2]) / (2 * g.hz)
        if not g.planar:
            d = d + self.ur[1:-1, 1:-1] / g.r[1:-1, None]
        div[1:-1, 1:-1] = d
        return div


def lp_norm(field: VorticityField, p: float) -> float:
    """Trapezoid approximation of the L^p norm with the planar measure dr dz.

    Parameters
    ----------
    field : VorticityField
    p : float
        Exponent in [1, inf]; ``math.inf`` gives the sample supremum.
    """
    if not p >= 1:
        raise DomainError(f"p must lie in [1, inf], got {p}")
    v = np.abs(field.values)
    if math.isinf(p):
        return float(v.max())
    if p == 1:
        return _integrate(field.grid, v)
    return _integrate(field.grid, v**p) ** (1.0 / p)


def moment(field: VorticityField, kind: Literal["mass", "impulse", "centroid_z"]) -> float:
    """Mass, impulse (int r^2 omega) or vorticity centroid in z."""
    g = field.grid
    v = field.values
    if kind == "mass":
        return _integrate(g, v)
    if kind == "impulse":
        return _integrate(g, (g.r**2)[:, None] * v)
    if kind == "centroid_z":
        mass = _integrate(g, v)
        l1 = _integrate(g, np.abs(v))
        if l1 == 0 or abs(mass) < 1e-14 * l1:
            raise DegenerateCentroidError("centroid undefined for (nearly) zero mass")
        return _integrate(g, g.z[None, :] * v) / mass
    raise DomainError(f"unknown moment kind {kind!r}")


def tail_mass(field: VorticityField, region: Literal["near_axis", "far"], rho: float) -> float:
    """Mass in r < rho (``near_axis``) or r > rho (``far``).

    Nodes exactly at r = rho are split half and half so that the two regions
    partition the total mass.
    """
    g = field.grid
    if not (g.r[0] < rho < g.r[-1]):
        raise DomainError(f"rho={rho} outside the grid ({g.r[0]}, {g.r[-1]})")
    w = trapezoid_weights(g) * field.values
    col = w.sum(axis=1)
    r = g.r
    on = np.isclose(r, rho, rtol=0, atol=1e-12 * max(1.0, abs(rho)))
    if region == "near_axis":
        sel = np.where(on, 0.5, np.where(r < rho, 1.0, 0.0))
    elif region == "far":
        sel = np.where(on, 0.5, np.where(r > rho, 1.0, 0.0))
    else:
        raise DomainError(f"unknown region {region!r}")
    return float(np.sum(col * sel))
