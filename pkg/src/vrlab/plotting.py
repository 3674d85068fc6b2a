"""Figures for experiment reports (Agg backend, PNG files)."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["render_report"]

_STYLE = {
    "figure.figsize": (6.0, 4.2),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
    "font.size": 10,
}


def _cols(table: dict) -> dict:
    a = np.array(table["rows"], dtype=float) if table["rows"] else np.zeros((0, len(table["header"])))
    return {h: a[:, i] for i, h in enumerate(table["header"])}


def _save(fig, path: Path, chash: str) -> Path:
    fig.tight_layout()
    fig.savefig(path, metadata={"Description": f"config_hash={chash}"})
    plt.close(fig)
    return path


def _order(c: dict) -> np.ndarray:
    o = np.argsort(c["eps"])
    # the initial frame is G itself and would only add a spurious segment
    if o.size > 2 and c["l1_dist"][o[0]] < 1e-12:
        o = o[1:]
    return o


def _distances(t: dict):
    c = _cols(t)
    fig, ax = plt.subplots()
    e = c["eps"]
    o = _order(c)
    ax.loglog(e[o], c["l1_dist"][o], "o-", ms=3, label=r"$\|f-G\|_{L^1}$")
    ax.loglog(e[o], c["l1_dist_refined"][o], "s-", ms=3, label="shifted centre")
    ax.loglog(e[o], c["x_dist"][o], "^-", ms=3, label=r"$\|f-G\|_X$")
    pos = e[o] > 0
    ref = e[o][pos] * np.log(1.0 / e[o][pos])
    if ref.size:
        k = np.nanmedian(c["l1_dist"][o][pos] / ref)
        ax.loglog(e[o][pos], k * ref, "k--", lw=0.8, label=r"$\propto\varepsilon\log(1/\varepsilon)$")
    ax.set_xlabel(r"$\varepsilon=\sqrt{\nu t}/\bar r$")
    ax.set_ylabel("distance to Gaussian")
    ax.legend()
    return fig


def _energy(t: dict):
    c = _cols(t)
    e = c["eps"]
    o = _order(c)
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(9, 3.6))
    with np.errstate(divide="ignore", invalid="ignore"):
        a1.semilogx(e[o], c["E"][o] / (e[o] ** 2 * np.log(1 / e[o]) ** 2), "o-", ms=3)
    a1.set_xlabel(r"$\varepsilon$")
    a1.set_ylabel(r"$E/(\varepsilon^2\log^2(1/\varepsilon))$")
    for key, lab in (("envelope_1_8", r"$\eta=1/8$"), ("envelope_1_4", r"$\eta=1/4$"), ("envelope_1_2", r"$\eta=1/2$")):
        a2.semilogx(e[o], c[key][o], "o-", ms=3, label=lab)
    a2.set_xlabel(r"$\varepsilon$")
    a2.set_ylabel("envelope ratio")
    a2.legend()
    return fig


def _ring_speed(t: dict):
    c = _cols(t)
    fig, ax = plt.subplots()
    ax.plot(c["log_inv_eps"], c["speed_units"], "o", ms=4, label="centroid speed")
    ax.plot(c["log_inv_eps"], c["fit_units"], "-", label="linear fit")
    L = c["log_inv_eps"]
    if L.size:
        ax.plot(L, L + (c["fit_units"] - L).mean(), "k--", lw=0.8, label="unit slope")
    ax.set_xlabel(r"$\log(1/\varepsilon)$")
    ax.set_ylabel(r"speed / $(\Gamma/4\pi\bar r)$")
    ax.legend()
    return fig


def _profile(series):
    fr = series.frames[-1]
    R, Z = fr.grid.mesh()
    G = np.exp(-(R**2 + Z**2) / 4) / (4 * math.pi)
    fig, ax = plt.subplots(figsize=(5.2, 4.6))
    lev = np.linspace(0.005, 0.08, 8)
    cs = ax.contour(R, Z, fr.f, levels=lev, cmap="viridis")
    ax.contour(R, Z, G, levels=lev, colors="0.6", linestyles="--", linewidths=0.7)
    fig.colorbar(cs, ax=ax, label="f")
    ax.set_xlim(-5, 5)
    ax.set_ylim(-5, 5)
    ax.set_aspect("equal")
    ax.set_xlabel("R")
    ax.set_ylabel("Z")
    ax.set_title(rf"$\varepsilon={fr.eps:.3g}$ (dashed: G)")
    return fig


def _uniqueness(t: dict):
    c = _cols(t)
    fig, ax = plt.subplots()
    for e0 in np.unique(c["eps0"]):
        m = c["eps0"] == e0
        ax.semilogy(c["eps"][m], c["x_distance"][m], "o-", ms=3, label=rf"$\varepsilon_0={e0:.3g}$")
    ax.set_xlabel(r"$\varepsilon$")
    ax.set_ylabel("X-distance between regularisations")
    ax.legend()
    return fig


def _adjoint(t: dict):
    c = _cols(t)
    fig, ax = plt.subplots()
    ax.plot(c["t"], c["max_abs_phi"], "-")
    ax.set_xlabel("t")
    ax.set_ylabel(r"$\max|\varphi|$")
    return fig


def _linear(t: dict):
    c = _cols(t)
    fig, ax = plt.subplots()
    ax.loglog(c["t"], c["linf_over_l1"], "o-", ms=4, label="computed")
    ax.loglog(c["t"], 1 / (4 * math.pi * c["t"]), "k--", lw=0.8, label=r"$1/(4\pi\nu t)$")
    ax.set_xlabel("t")
    ax.set_ylabel(r"$\|\omega\|_\infty/\|\omega_0\|_1$")
    ax.legend()
    return fig


def _bs_gap(t: dict):
    c = _cols(t)
    fig, ax = plt.subplots()
    ax.loglog(c["eps"], c["max_gap"], "o-", label=r"$\max|U^\varepsilon-U^0|$")
    ax.loglog(c["eps"], c["eps"] * np.log(1 / c["eps"]) * c["max_gap"][0] / (c["eps"][0] * np.log(1 / c["eps"][0])), "k--", lw=0.8, label=r"$\propto\varepsilon\log(1/\varepsilon)$")
    ax.set_xlabel(r"$\varepsilon$")
    ax.legend()
    return fig


def _aronson(t: dict):
    c = _cols(t)
    fig, ax = plt.subplots()
    xi = np.hypot(c["x"], c["y"]) / np.sqrt(c["t"])
    sc = ax.scatter(xi, c["lhs"], c=np.log10(c["t"]), s=2, cmap="plasma")
    fig.colorbar(sc, ax=ax, label=r"$\log_{10} t$")
    ax.axhline(-math.log(4 * math.pi), color="k", lw=0.8, ls="--", label=r"$\log(1/4\pi)$")
    ax.set_xlabel(r"$|x|/\sqrt{\nu t}$")
    ax.set_ylabel("tilted log bound")
    ax.legend()
    return fig


def _kernels(tk: dict, th: dict | None):
    c = _cols(tk)
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(9, 3.6))
    a1.loglog(c["s"], c["F"], label="F")
    a1.loglog(c["s"], c["F_tilde"], label=r"$\tilde F$")
    a1.set_xlabel("s")
    a1.legend()
    if th is not None:
        h = _cols(th)
        a2.semilogx(h["tau"], h["H"], label=r"$\tilde H$")
        a2.semilogx(h["tau"], h["H_sqrt_pi_tau"], label=r"$\tilde H\sqrt{\pi\tau}$")
        a2.set_xlabel(r"$\tau$")
        a2.legend()
    return fig


def render_report(report, directory) -> list[Path]:
    """Draw every figure the report's tables support; returns the written paths."""
    d = Path(directory)
    t = report.tables
    h = report.config_hash
    out = []
    with plt.rc_context(_STYLE):
        if "diagnostics" in t and t["diagnostics"]["rows"]:
            out.append(_save(_distances(t["diagnostics"]), d / "fig_distances.png", h))
            out.append(_save(_energy(t["diagnostics"]), d / "fig_energy_envelope.png", h))
        if t.get("ring_speed"):
            out.append(_save(_ring_speed(t["ring_speed"]), d / "fig_ring_speed.png", h))
        if report.series is not None and report.series.frames:
            out.append(_save(_profile(report.series), d / "fig_profile.png", h))
        if "uniqueness" in t:
            out.append(_save(_uniqueness(t["uniqueness"]), d / "fig_uniqueness.png", h))
        if "adjoint" in t:
            out.append(_save(_adjoint(t["adjoint"]), d / "fig_adjoint.png", h))
        if "linear_smoothing" in t:
            out.append(_save(_linear(t["linear_smoothing"]), d / "fig_linear_smoothing.png", h))
        if "bs_gap" in t:
            out.append(_save(_bs_gap(t["bs_gap"]), d / "fig_bs_gap.png", h))
        if "aronson_probes" in t:
            out.append(_save(_aronson(t["aronson_probes"]), d / "fig_aronson.png", h))
        if "kernels" in t:
            out.append(_save(_kernels(t["kernels"], t.get("h_tilde")), d / "fig_kernels.png", h))
    return out
