from dataclasses import replace

import numpy as np
import pytest

from vrlab.config import RunConfig
from vrlab.fields import ConfigurationError
from vrlab.harness import CRITERIA, ExperimentError, diagnose_directory, run_experiment, write_outputs
from vrlab.io import FormatError, read_index, read_snapshot

TINY = RunConfig(grid=(96, 96), half_width=6.0, eps0=0.05, eps_end=0.1, snapshots=(0.1, 0.071), dense_snapshots=0, fit_eps_min=0.05)


@pytest.fixture(scope="module")
def tiny_runs(tmp_path_factory):
    a = tmp_path_factory.mktemp("run_a")
    b = tmp_path_factory.mktemp("run_b")
    ra = run_experiment("short_time", TINY, out=a)
    rb = run_experiment("short_time", replace(TINY, out="ignored"), out=b)
    return ra, a, rb, b


def test_every_criterion_listed_once(tiny_runs):
    report = tiny_runs[0]
    assert [c.number for c in report.criteria] == sorted(CRITERIA)
    text = report.to_text()
    for n in CRITERIA:
        assert text.count(f"criterion.{n}.status = ") == 1


def test_foreign_criteria_not_run(tiny_runs):
    report = tiny_runs[0]
    for n in (5, 6, 7, 8, 11, 12, 13):
        c = report.criterion(n)
        assert c.status == "NOT_RUN" and "owned by" in c.note
    # conservation is always decidable from the run itself
    assert report.criterion(4).status in ("PASS", "FAIL")


def test_outputs_are_deterministic(tiny_runs):
    ra, a, rb, b = tiny_runs
    assert ra.config_hash == rb.config_hash
    for name in ("diagnostics.csv", "history.csv", "index.txt"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert (a / "snap_0001.vrlab").read_bytes() == (b / "snap_0001.vrlab").read_bytes()


def test_config_hash_in_every_file(tiny_runs):
    report, d = tiny_runs[0], tiny_runs[1]
    h = report.config_hash
    for p in d.glob("*.csv"):
        assert p.read_text().splitlines()[0] == f"# config_hash = {h}"
    meta, entries = read_index(d / "index.txt")
    assert meta["config_hash"] == h
    snap = read_snapshot(d / entries[-1]["file"])
    assert snap.meta["config_hash"] == h
    assert set(snap.arrays) == {"f", "ur", "uz"}
    assert float(snap.meta["eps"]) == pytest.approx(0.1)
    assert f"config_hash = {h}" in (d / "report.txt").read_text()
    assert (d / "fig_distances.png").stat().st_size > 0


def test_diagnose_reproduces_run(tiny_runs, tmp_path):
    report, d = tiny_runs[0], tiny_runs[1]
    before = (d / "diagnostics.csv").read_bytes()
    again = diagnose_directory(d)
    assert (d / "diagnostics.csv").read_bytes() == before
    for n in (4, 10):
        assert again.criterion(n).measured == pytest.approx(report.criterion(n).measured)


def test_empty_series_writes_report_and_config_only(tiny_runs, tmp_path):
    bare = replace(tiny_runs[0], tables={}, series=None)
    write_outputs(bare, None, tmp_path)
    assert sorted(p.name for p in tmp_path.iterdir()) == ["config.ini", "report.txt"]


def test_corrupted_snapshot_reported_on_diagnose(tiny_runs, tmp_path):
    src = tiny_runs[1]
    for p in src.iterdir():
        (tmp_path / p.name).write_bytes(p.read_bytes())
    bad = tmp_path / "snap_0001.vrlab"
    bad.write_bytes(b"BROKEN" + bad.read_bytes()[6:])
    with pytest.raises(FormatError, match="snap_0001.vrlab"):
        diagnose_directory(tmp_path, write=False)


def test_unknown_experiment():
    with pytest.raises(ConfigurationError):
        run_experiment("nope", TINY)


def test_failures_carry_experiment_context():
    broken = replace(TINY, bs_eps=-0.05)
    with pytest.raises(ExperimentError, match="bs_crosscheck"):
        run_experiment("bs_crosscheck", broken)


def test_kernel_suite_report():
    r = run_experiment("kernel_suite", RunConfig())
    assert r.criterion(6).passed
    assert [c.number for c in r.evaluated] == [6]
    assert r.all_passed
    h = np.array(r.tables["h_tilde"]["rows"])
    assert np.all(np.diff(h[:, 1]) < 0)
