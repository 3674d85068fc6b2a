"""Run configuration: an INI document with one section per module.

Keys may also appear before any section header; they are then matched to
their section by name. Every default is materialised on parse, and
``parse_config(emit_config(c)) == c``.
"""

from __future__ import annotations

import configparser
import hashlib
import math
from dataclasses import dataclass, fields, replace

from .fields import ConfigurationError

__all__ = ["RunConfig", "parse_config", "emit_config", "config_hash", "EXPERIMENTS", "parse_grid"]

EXPERIMENTS = (
    "short_time",
    "ring_speed",
    "uniqueness_proxy",
    "linear_smoothing",
    "bs_crosscheck",
    "aronson_suite",
    "kernel_suite",
    "all",
)

MIN_POINTS_PER_CORE = 8


def parse_grid(text: str) -> tuple[int, int]:
    """'NRxNZ' -> (nr, nz)."""
    parts = str(text).lower().replace(" ", "").split("x")
    if len(parts) != 2 or not all(p.isdigit() for p in parts):
        raise ConfigurationError(f"grid must look like NRxNZ, got {text!r}")
    return int(parts[0]), int(parts[1])


def _floats(text: str) -> tuple[float, ...]:
    items = [s for s in str(text).replace(" ", "").split(",") if s]
    return tuple(float(s) for s in items)


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class RunConfig:
    """All knobs of an experiment run.

    Aspect ratios eps = sqrt(nu t)/rbar replace absolute times; ``t0``/``t_end``
    in a document are converted on parse.
    """

    # physical
    gamma_over_nu: float = 10.0
    nu: float = 1.0
    rbar: float = 1.0
    zbar: float = 0.0
    # grid: self-similar window [-half_width, half_width]^2
    grid: tuple = (192, 192)
    half_width: float = 12.0
    # time
    eps0: float = 0.005
    eps_end: float = 0.1
    snapshots: tuple = (0.1, 0.071, 0.05, 0.035, 0.025, 0.02)
    dense_snapshots: int = 24
    fit_eps_min: float = 0.02
    # scheme
    upwind: bool = False
    c_adv: float = 0.4
    c_diff: float = 0.4
    level_ratio: float = 1.2
    # uniqueness proxy and adjoint
    uniqueness_grid: tuple = (128, 128)
    uniqueness_half_width: float = 8.0
    eps_star: float = 0.04
    eps_t0: float = 0.02
    adjoint_gamma: float = 5.0
    # Biot-Savart cross-check
    bs_grid: int = 128
    bs_eps: float = 0.05
    gap_grid: int = 64
    gap_eps: tuple = (0.1, 0.05, 0.025)
    # Aronson suite
    aronson_grid: int = 128
    k1: float = 0.5
    k2: float = 0.0
    # run
    experiment: str = "short_time"
    out: str = "vrlab_out"
    seed: int = 20240601

    @property
    def eps_samples(self) -> tuple:
        return tuple(e for e in self.snapshots if e >= 0.025 - 1e-12)


_SECTIONS = {
    "physical": ("gamma_over_nu", "nu", "rbar", "zbar"),
    "grid": ("grid", "half_width"),
    "time": ("eps0", "eps_end", "snapshots", "dense_snapshots", "fit_eps_min"),
    "scheme": ("upwind", "c_adv", "c_diff", "level_ratio"),
    "uniqueness": ("uniqueness_grid", "uniqueness_half_width", "eps_star", "eps_t0", "adjoint_gamma"),
    "biot_savart": ("bs_grid", "bs_eps", "gap_grid", "gap_eps"),
    "aronson": ("aronson_grid", "k1", "k2"),
    "run": ("experiment", "out", "seed"),
}
_SECTION_OF = {k: s for s, ks in _SECTIONS.items() for k in ks}
_TIME_ALIASES = ("t0", "t_end")


def _convert(name: str, raw: str):
    kind = {f.name: f.type for f in fields(RunConfig)}[name]
    try:
        if name in ("grid", "uniqueness_grid"):
            return parse_grid(raw)
        if name in ("snapshots", "gap_eps"):
            return _floats(raw)
        if kind == "bool":
            return _bool(raw)
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return str(raw).strip()
    except ValueError as exc:
        raise ConfigurationError(f"bad value for {name}: {raw!r}") from exc


def _validate(c: RunConfig) -> None:
    def bad(inv: str, detail: str):
        raise ConfigurationError(f"invariant {inv} violated: {detail}")

    if c.experiment not in EXPERIMENTS:
        raise ConfigurationError(f"unknown experiment {c.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
    if not (c.nu > 0 and c.rbar > 0):
        bad("nu > 0 and rbar > 0", f"nu={c.nu}, rbar={c.rbar}")
    if not c.eps0 > 0:
        bad("ε(t0) > 0", f"eps0={c.eps0}")
    if c.eps0 > 0.1:
        bad("ε(t0) ≤ 0.1", f"eps0={c.eps0}")
    if c.eps_end > 0.5:
        bad("ε(t_end) ≤ 0.5", f"eps_end={c.eps_end}")
    if not c.eps_end > c.eps0:
        bad("ε(t_end) > ε(t0)", f"eps0={c.eps0}, eps_end={c.eps_end}")
    for name, (nx, nz), hw in (("grid", c.grid, c.half_width), ("uniqueness_grid", c.uniqueness_grid, c.uniqueness_half_width)):
        if nx != nz:
            raise ConfigurationError(f"{name} must be square, got {nx}x{nz}")
        if min(nx, nz) / (2.0 * hw) < MIN_POINTS_PER_CORE - 1e-12:
            bad(
                f"grid resolves sqrt(nu t0) with >= {MIN_POINTS_PER_CORE} points",
                f"{name} {nx}x{nz} on half-width {hw} gives {nx / (2 * hw):.3g} points",
            )
    if not (0 < c.c_adv <= 1 and 0 < c.c_diff <= 1):
        bad("0 < CFL factors ≤ 1", f"c_adv={c.c_adv}, c_diff={c.c_diff}")
    if not c.level_ratio > 1:
        bad("level_ratio > 1", str(c.level_ratio))
    if any(not (c.eps0 < e <= c.eps_end) for e in c.snapshots):
        bad("ε(t0) < snapshot ≤ ε(t_end)", f"snapshots={c.snapshots}")
    if not (c.eps0 <= c.fit_eps_min < c.eps_end):
        bad("ε(t0) ≤ fit_eps_min < ε(t_end)", str(c.fit_eps_min))
    if not (0 < c.eps_t0 / 2 and c.eps_t0 < c.eps_star <= 0.5):
        bad("0 < eps_t0 < eps_star ≤ 0.5", f"eps_t0={c.eps_t0}, eps_star={c.eps_star}")
    if c.eps_t0 > 0.1:
        bad("ε(t0) ≤ 0.1", f"eps_t0={c.eps_t0}")
    if not (0 < c.bs_eps <= 0.5) or any(not (0 < e <= 0.5) for e in c.gap_eps) or len(c.gap_eps) < 2:
        bad("0 < eps ≤ 0.5 for Biot-Savart checks (at least two gap levels)", f"bs_eps={c.bs_eps}, gap_eps={c.gap_eps}")
    if min(c.bs_grid, c.gap_grid, c.aronson_grid) < 8 or c.dense_snapshots < 0:
        raise ConfigurationError("grid sizes must be >= 8 and dense_snapshots >= 0")


def parse_config(text: str) -> RunConfig:
    """Parse and validate a configuration document.

    Raises
    ------
    ConfigurationError
        Unknown keys (all listed), malformed values, or a violated invariant
        (named in the message).
    """
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str
    try:
        cp.read_string("[__top__]\n" + text)
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed config: {exc}") from exc
    values: dict = {}
    unknown: list[str] = []
    times: dict = {}
    for sec in cp.sections():
        if sec != "__top__" and sec not in _SECTIONS:
            unknown.append(f"[{sec}]")
            continue
        for key, raw in cp.items(sec):
            if key in _TIME_ALIASES and sec in ("__top__", "time"):
                times[key] = float(raw)
                continue
            home = _SECTION_OF.get(key)
            if home is None or (sec != "__top__" and home != sec):
                unknown.append(key if sec == "__top__" else f"{sec}.{key}")
                continue
            if key in values:
                raise ConfigurationError(f"key {key} given twice")
            values[key] = _convert(key, raw)
    if unknown:
        raise ConfigurationError("unknown config keys: " + ", ".join(sorted(unknown)))
    cfg = RunConfig(**values)
    if times:
        nu, rbar = cfg.nu, cfg.rbar
        upd = {}
        for key, dest in (("t0", "eps0"), ("t_end", "eps_end")):
            if key in times:
                if dest in values:
                    raise ConfigurationError(f"give either {key} or {dest}, not both")
                if not times[key] > 0:
                    raise ConfigurationError(f"{key} must be positive")
                upd[dest] = math.sqrt(nu * times[key]) / rbar
        cfg = replace(cfg, **upd)
    if "snapshots" not in values:
        cfg = replace(cfg, snapshots=tuple(e for e in cfg.snapshots if cfg.eps0 < e <= cfg.eps_end))
    if "fit_eps_min" not in values:
        cfg = replace(cfg, fit_eps_min=max(cfg.fit_eps_min, cfg.eps0))
    _validate(cfg)
    return cfg


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple) and len(v) == 2 and all(isinstance(x, int) for x in v):
        return f"{v[0]}x{v[1]}"
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_config(cfg: RunConfig) -> str:
    """Canonical document with every key present."""
    out = []
    for sec, keys in _SECTIONS.items():
        out.append(f"[{sec}]")
        out += [f"{k} = {_fmt(getattr(cfg, k))}" for k in keys]
        out.append("")
    return "\n".join(out)


def config_hash(cfg: RunConfig) -> str:
    """Short SHA-256 of the canonical document, ignoring the output directory."""
    return hashlib.sha256(emit_config(replace(cfg, out="")).encode()).hexdigest()[:16]
