"""Kernel special functions F and F~ of the axisymmetric Biot-Savart law.

F(s) = int_0^{pi/2} (1 - 2 sin^2 psi) / sqrt(sin^2 psi + s/4) dpsi
F~(s) = -2 s F'(s)

The quadrature routines are the defining reference. The table used by the
fast summation is filled from the complete elliptic integral form (small s)
and a convergent inverse-power series (large s); both are checked against
quadrature in the test-suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special
from scipy.interpolate import CubicSpline

__all__ = [
    "KernelError",
    "kernel_F",
    "kernel_F_tilde",
    "kernel_pair",
    "KernelTable",
    "default_table",
]

S_MIN = 1e-10
S_MAX = 1e10
_SERIES_THRESHOLD = 100.0
_SERIES_TERMS = 24


class KernelError(ValueError):
    """Domain or convergence failure in a kernel evaluation."""


def _breakpoints(s: float) -> list[float]:
    # the integrand varies on the scale sqrt(s)/2 near psi = 0
    base = 0.5 * math.sqrt(s)
    pts = [0.0]
    b = base
    while b < math.pi / 2:
        pts.append(b)
        b *= 8.0
    pts.append(math.pi / 2)
    return pts


def _piecewise_quad(fun, s: float, what: str) -> float:
    total = 0.0
    pts = _breakpoints(s)
    for a, b in zip(pts[:-1], pts[1:]):
        val, err, *rest = integrate.quad(fun, a, b, epsabs=1e-13, epsrel=1e-13, limit=200, full_output=1)
        if len(rest) > 1 and err > 1e-10:
            raise KernelError(f"{what}: quadrature did not converge on [{a:.3g}, {b:.3g}] for s={s:.3g} (err={err:.2e})")
        total += val
    return total


def kernel_F(s: float) -> float:
    """Evaluate F(s) by adaptive quadrature.

    Parameters
    ----------
    s : float
        Kernel argument, must be positive.

    Returns
    -------
    float
        F(s) to an absolute accuracy of about 1e-12.
    """
    s = float(s)
    if not s > 0.0 or not math.isfinite(s):
        raise KernelError(f"kernel_F requires s > 0, got {s}")
    q = s / 4.0

    def integrand(psi):
        sn = math.sin(psi) ** 2
        return (1.0 - 2.0 * sn) / math.sqrt(sn + q)

    return _piecewise_quad(integrand, s, "kernel_F")


def kernel_F_tilde(s: float) -> float:
    """Evaluate F~(s) = -2 s F'(s) by quadrature of the s-derivative of the integrand."""
    s = float(s)
    if not s > 0.0 or not math.isfinite(s):
        raise KernelError(f"kernel_F_tilde requires s > 0, got {s}")
    q = s / 4.0

    def integrand(psi):
        sn = math.sin(psi) ** 2
        return q * (1.0 - 2.0 * sn) / (sn + q) ** 1.5

    return _piecewise_quad(integrand, s, "kernel_F_tilde")


def _elliptic_pair(s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # m = 1/(1 + s/4); F = m^{-1/2}((2-m)K - 2E), F~ = 2 m (1-m) dF/dm
    q = s / 4.0
    m = 1.0 / (1.0 + q)
    m1 = q / (1.0 + q)
    K = special.ellipkm1(m1)
    E = special.ellipe(m)
    g = (2.0 - m) * K - 2.0 * E
    # (1-m) dK/dm = (E - (1-m) K) / (2m), (1-m) dE/dm = (1-m)(E - K)/(2m)
    dK = (E - m1 * K) / (2.0 * m)
    dE = m1 * (E - K) / (2.0 * m)
    dg = -m1 * K + (2.0 - m) * dK - 2.0 * dE
    sqm = np.sqrt(m)
    F = g / sqm
    Ft = -m1 * g / sqm + 2.0 * sqm * dg
    return F, Ft


def _series_coefficients(n: int) -> np.ndarray:
    c = np.empty(n)
    binom = 1.0
    ik = math.pi / 2
    for k in range(1, n + 1):
        binom *= (-0.5 - (k - 1)) / k
        ik *= (2 * k - 1) / (2 * k)
        c[k - 1] = binom * 4.0**k * (-k / (k + 1)) * ik
    return c


_SERIES_C = _series_coefficients(_SERIES_TERMS)
_SERIES_W = 2.0 * np.arange(1, _SERIES_TERMS + 1) + 1.0


def _series_pair(s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    inv = 1.0 / s
    F = np.zeros_like(s)
    Ft = np.zeros_like(s)
    # Horner in 1/s, highest order first
    for c, w in zip(_SERIES_C[::-1], _SERIES_W[::-1]):
        F = (F + c) * inv
        Ft = (Ft + w * c) * inv
    pref = 2.0 / np.sqrt(s)
    return pref * F, pref * Ft


def kernel_pair(s) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised closed-form evaluation of (F, F~) for s > 0."""
    s = np.asarray(s, dtype=float)
    if np.any(~(s > 0)):
        raise KernelError("kernel_pair requires s > 0")
    F = np.empty_like(s)
    Ft = np.empty_like(s)
    small = s <= _SERIES_THRESHOLD
    if np.any(small):
        F[small], Ft[small] = _elliptic_pair(s[small])
    if np.any(~small):
        F[~small], Ft[~small] = _series_pair(s[~small])
    return F, Ft


@dataclass(frozen=True)
class KernelTable:
    """Tabulated F and F~ with cubic interpolation of their logarithms in log s.

    Outside [S_MIN, S_MAX] the leading asymptotic forms are used.
    """

    log_s: np.ndarray
    log_F: np.ndarray
    log_Ft: np.ndarray

    @classmethod
    def build(cls, points_per_decade: int = 100) -> "KernelTable":
        n = int(round(math.log10(S_MAX / S_MIN) * points_per_decade)) + 1
        log_s = np.linspace(math.log(S_MIN), math.log(S_MAX), n)
        F, Ft = kernel_pair(np.exp(log_s))
        return cls(log_s, np.log(F), np.log(Ft))

    def __post_init__(self):
        u = self.log_s
        du = np.diff(u)
        if not np.allclose(du, du[0], rtol=1e-9, atol=0):
            raise KernelError("KernelTable requires uniformly spaced log s nodes")
        cF = CubicSpline(u, self.log_F).c
        cFt = CubicSpline(u, self.log_Ft).c
        object.__setattr__(self, "_u0", float(u[0]))
        object.__setattr__(self, "_du", float(du[0]))
        object.__setattr__(self, "_cF", np.ascontiguousarray(cF))
        object.__setattr__(self, "_cFt", np.ascontiguousarray(cFt))

    @property
    def s(self) -> np.ndarray:
        return np.exp(self.log_s)

    def _interp(self, u: np.ndarray, c: np.ndarray) -> np.ndarray:
        x = (u - self._u0) / self._du
        idx = np.clip(x.astype(np.intp), 0, c.shape[1] - 1)
        d = (x - idx) * self._du
        return ((c[0, idx] * d + c[1, idx]) * d + c[2, idx]) * d + c[3, idx]

    def __call__(self, s) -> tuple[np.ndarray, np.ndarray]:
        """Return (F(s), F~(s)) for an array of positive arguments."""
        s = np.asarray(s, dtype=float)
        u = np.log(s)
        lo = u < self.log_s[0]
        hi = u > self.log_s[-1]
        uc = np.clip(u, self.log_s[0], self.log_s[-1])
        F = np.exp(self._interp(uc, self._cF))
        Ft = np.exp(self._interp(uc, self._cFt))
        if np.any(lo):
            sl = s[lo]
            F[lo] = math.log(8.0) - 0.5 * np.log(sl) - 2.0
            Ft[lo] = 1.0
        if np.any(hi):
            sh = s[hi]
            F[hi] = 0.5 * math.pi * sh**-1.5
            Ft[hi] = 1.5 * math.pi * sh**-1.5
        return F, Ft


_DEFAULT: KernelTable | None = None


def default_table() -> KernelTable:
    """Process-wide shared table (immutable once built)."""
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = KernelTable.build()
    return _DEFAULT
