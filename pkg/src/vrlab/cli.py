"""Command-line entry point ``vrlab``."""

from __future__ import annotations

import logging
import math
import sys
from pathlib import Path

import click
import numpy as np

from .config import EXPERIMENTS, RunConfig, config_hash, parse_config, parse_grid
from .fields import ConfigurationError, DomainError, PhysicalParams, build_grid


def _fail(msg: str, code: int = 2):
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def _print_report(report) -> None:
    for c in report.criteria:
        if c.status != "NOT_RUN":
            click.echo(c.line())
    ev = report.evaluated
    click.echo(f"{sum(c.passed for c in ev)}/{len(ev)} criteria passed (config {report.config_hash}, {report.wall_clock:.1f} s)")


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose: bool):
    """Viscous vortex ring experiments, diagnostics and kernel tools."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.argument("experiment", type=click.Choice(EXPERIMENTS))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="INI configuration file.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), help="Output directory (overrides the config).")
def run(experiment: str, config_path: str | None, out_dir: str | None):
    """Run EXPERIMENT and write its report, CSV tables, snapshots and figures."""
    from dataclasses import replace

    from .harness import run_experiment

    try:
        cfg = parse_config(Path(config_path).read_text()) if config_path else RunConfig()
    except ConfigurationError as exc:
        _fail(str(exc))
    cfg = replace(cfg, experiment=experiment, out=out_dir or cfg.out)

    def progress(n, eps):
        logging.getLogger("vrlab").info("step %d eps=%.5f", n, eps)

    report = run_experiment(experiment, cfg, out=cfg.out, progress=progress)
    _print_report(report)
    click.echo(f"outputs in {cfg.out}")
    sys.exit(0 if report.all_passed else 1)


@main.command()
@click.argument("directory", type=click.Path(exists=True, file_okay=False))
def diagnose(directory: str):
    """Recompute diagnostics and run-level criteria from a checkpoint directory."""
    from .harness import diagnose_directory
    from .io import FormatError

    try:
        report = diagnose_directory(directory)
    except (FormatError, OSError) as exc:
        _fail(str(exc))
    _print_report(report)
    sys.exit(0 if report.all_passed else 1)


@main.command()
@click.option("--dump", is_flag=True, help="Write (s, F, F~) triples as CSV.")
@click.option("--out", "out_file", type=click.Path(dir_okay=False), help="CSV destination (default stdout).")
@click.option("--save-table", type=click.Path(dir_okay=False), help="Also store the binary table for reuse.")
@click.option("--points-per-decade", default=100, show_default=True, type=click.IntRange(4, 1000))
def kernels(dump: bool, out_file: str | None, save_table: str | None, points_per_decade: int):
    """Build the F, F~ interpolation table."""
    from .io import write_kernel_table
    from .kernels import KernelTable

    table = KernelTable.build(points_per_decade)
    if save_table:
        write_kernel_table(save_table, table, {"points_per_decade": points_per_decade})
    if not dump:
        click.echo(f"table with {table.log_s.size} nodes on s in [{table.s[0]:.1e}, {table.s[-1]:.1e}]")
        return
    lines = ["s,F,F_tilde"]
    lines += [f"{s!r},{f!r},{g!r}" for s, f, g in zip(table.s.tolist(), np.exp(table.log_F).tolist(), np.exp(table.log_Ft).tolist())]
    text = "\n".join(lines) + "\n"
    if out_file:
        Path(out_file).write_text(text)
    else:
        click.echo(text, nl=False)


@main.command()
@click.option("--drift", type=click.Choice(["none", "shear", "rotation"]), default="none", show_default=True)
@click.option("--k1", default=0.5, show_default=True, type=float, help="Drift bound sqrt(t/nu)|U| <= K1.")
@click.option("--k2", default=0.0, show_default=True, type=float, help="Potential budget int ||V||_inf dt.")
@click.option("--grid", "n", default=128, show_default=True, type=click.IntRange(8, 1024))
@click.option("--nu", default=1.0, show_default=True, type=float)
@click.option("--out", "out_file", default="aronson_probes.csv", show_default=True, type=click.Path(dir_okay=False))
def aronson(drift: str, k1: float, k2: float, n: int, nu: float, out_file: str):
    """Estimate a fundamental solution and fit the tilted Gaussian bound."""
    from .aronson import DriftSpec, aronson_check, estimate_fundamental, smoothing_rate

    t_list = [1.0, 2.0, 4.0, 7.0, 10.0]
    if drift == "none":
        spec = DriftSpec.none()
    elif drift == "shear":
        spec = DriftSpec.shear(k1, 1.0, nu)
    else:
        spec = DriftSpec.rotation(k1, 5.0, nu)
    if k2:
        spec = spec.with_potential(k2, t_list[0] / 100.0, t_list[-1])
    est = estimate_fundamental(spec, nu, t_list, n=n)
    rep = aronson_check(est)
    rate = smoothing_rate(est.times, [est.linf(k) for k in range(len(est.times))])
    click.echo(f"drift = {spec.name}")
    click.echo(f"K1 = {spec.K1!r}")
    click.echo(f"K2 = {spec.K2!r}")
    click.echo(f"C2 = {rep.C!r}")
    click.echo(f"C2_times_4pi = {rep.C * 4 * math.pi!r}")
    click.echo(f"excess_over_heat_constant = {rep.max_violation!r}")
    click.echo(f"smoothing_exponent = {rate!r}")
    click.echo(f"probes = {rep.probes}")
    click.echo(f"skipped_below_floor = {rep.skipped}")
    header = "t,x,y,phi,lhs"
    np.savetxt(out_file, rep.table, delimiter=",", header=header, comments="", fmt="%.17g")
    click.echo(f"probe_table = {out_file}")


def _domain(text: str) -> tuple[float, float, float]:
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        vals = ()
    if len(vals) != 3:
        raise click.BadParameter("expected RMAX,ZMIN,ZMAX")
    return vals


@main.command()
@click.option("--t0", type=float, default=0.01, show_default=True)
@click.option("--t-end", type=float, default=0.02, show_default=True)
@click.option("--gamma-over-nu", type=float, default=10.0, show_default=True)
@click.option("--grid", "grid_spec", default="160x200", show_default=True, help="NRxNZ cells.")
@click.option("--domain", default="2.0,-1.25,1.25", show_default=True, help="RMAX,ZMIN,ZMAX in units of the ring radius.")
@click.option("--snap-every", type=float, default=0.0, help="Snapshot interval in t (0: start and end only).")
@click.option("--upwind", is_flag=True, help="Upwind advective fluxes.")
@click.option("--out", "out_dir", default="vrlab_evolve", show_default=True, type=click.Path(file_okay=False))
def evolve(t0, t_end, gamma_over_nu, grid_spec, domain, snap_every, upwind, out_dir):
    """Physical-variable run from the Gaussian filament regularisation, with checkpoints."""
    from .evolution import EvolveOptions, evolve as run_evolve, make_filament_initial
    from .io import write_index, write_snapshot

    try:
        nr, nz = parse_grid(grid_spec)
        r_max, z_min, z_max = _domain(domain)
        params = PhysicalParams.from_gamma(gamma_over_nu)
        grid = build_grid(r_max, z_min, z_max, nr, nz)
        w0 = make_filament_initial(params, t0, grid)
    except (ConfigurationError, DomainError) as exc:
        _fail(str(exc))
    snaps = tuple(np.arange(t0 + snap_every, t_end, snap_every)) if snap_every > 0 else ()
    traj = run_evolve(w0, t0, t_end, params, EvolveOptions(upwind=upwind, snapshot_times=snaps))
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    chash = config_hash(RunConfig(gamma_over_nu=gamma_over_nu, upwind=upwind))
    meta = {"config_hash": chash, "kind": "physical", "gamma_over_nu": repr(params.gamma), "nu": repr(params.nu), "rbar": repr(params.rbar), "zbar": repr(params.zbar)}
    entries = []
    for k, st in enumerate(traj.states):
        name = f"snap_{k:04d}.vrlab"
        write_snapshot(d / name, grid, {"omega": st.omega.values, "ur": st.velocity.ur, "uz": st.velocity.uz}, {**meta, "t": repr(st.time), "step": str(st.step_count)})
        entries.append({"file": name, "t": st.time, "eps": params.eps(st.time), "step": st.step_count})
    write_index(d / "index.txt", entries, meta)
    imp = np.asarray(traj.impulse_history)
    click.echo(f"{len(entries)} snapshots, {traj.final.step_count} steps, impulse drift {abs(imp[-1] / imp[0] - 1):.2e}; written to {d}")


if __name__ == "__main__":
    main()
