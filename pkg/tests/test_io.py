import numpy as np
import pytest

from vrlab.fields import Grid, build_grid
from vrlab.io import (
    FormatError,
    read_index,
    read_kernel_table,
    read_snapshot,
    write_index,
    write_kernel_table,
    write_snapshot,
)
from vrlab.kernels import KernelTable


@pytest.fixture
def grid():
    return build_grid(2.0, -1.0, 1.0, 6, 8)


def test_snapshot_roundtrip(tmp_path, grid, rng):
    a, b = rng.normal(size=grid.shape), rng.normal(size=grid.shape)
    p = tmp_path / "s.vrlab"
    write_snapshot(p, grid, {"f": a, "ur": b}, {"eps": 0.05, "config_hash": "abc"})
    snap = read_snapshot(p)
    assert snap.grid == grid
    assert list(snap.arrays) == ["f", "ur"]
    assert np.array_equal(snap.arrays["f"], a) and np.array_equal(snap.arrays["ur"], b)
    assert snap.meta == {"eps": "0.05", "config_hash": "abc"}
    assert p.read_bytes().startswith(b"VRLAB1\n")


def test_window_grid_roundtrip(tmp_path):
    g = Grid(3.0, -3.0, 3.0, 8, 8, r_min=-3.0, planar=True)
    p = tmp_path / "w.vrlab"
    write_snapshot(p, g, {"f": np.zeros(g.shape)})
    assert read_snapshot(p).grid == g


@pytest.mark.parametrize("corrupt", [lambda b: b"XXLAB1" + b[6:], lambda b: b[:-8], lambda b: b.replace(b"end_header", b"end_heder")])
def test_corrupted_snapshot_names_the_file(tmp_path, grid, corrupt):
    p = tmp_path / "bad.vrlab"
    write_snapshot(p, grid, {"f": np.ones(grid.shape)})
    p.write_bytes(corrupt(p.read_bytes()))
    with pytest.raises(FormatError, match="bad.vrlab"):
        read_snapshot(p)


def test_bad_magic_message(tmp_path, grid):
    p = tmp_path / "x.vrlab"
    write_snapshot(p, grid, {"f": np.ones(grid.shape)})
    p.write_bytes(b"JUNK" + p.read_bytes()[6:])
    with pytest.raises(FormatError, match="bad magic"):
        read_snapshot(p)


def test_snapshot_argument_checks(tmp_path, grid):
    with pytest.raises(ValueError):
        write_snapshot(tmp_path / "a", grid, {})
    with pytest.raises(ValueError):
        write_snapshot(tmp_path / "a", grid, {"f": np.zeros((2, 2))})
    with pytest.raises(ValueError):
        write_snapshot(tmp_path / "a", grid, {"a,b": np.zeros(grid.shape)})
    assert not list(tmp_path.iterdir())


def test_missing_file_is_os_error(tmp_path):
    with pytest.raises(OSError, match="nope.vrlab"):
        read_snapshot(tmp_path / "nope.vrlab")


def test_kernel_table_roundtrip(tmp_path):
    t = KernelTable.build(10)
    p = tmp_path / "k.bin"
    write_kernel_table(p, t, {"points_per_decade": 10})
    t2 = read_kernel_table(p)
    assert np.array_equal(t.log_F, t2.log_F) and np.array_equal(t.log_s, t2.log_s)
    s = np.array([1e-3, 1.0, 30.0])
    assert np.array_equal(t(s)[0], t2(s)[0])
    with pytest.raises(FormatError):
        read_snapshot(p)


def test_index_roundtrip(tmp_path):
    entries = [{"file": "snap_0000.vrlab", "t": 1e-4, "eps": 0.01, "step": 0}, {"file": "snap_0001.vrlab", "t": 4e-4, "eps": 0.02, "step": 17}]
    p = tmp_path / "index.txt"
    write_index(p, entries, {"config_hash": "deadbeef", "kind": "physical"})
    meta, got = read_index(p)
    assert meta == {"config_hash": "deadbeef", "kind": "physical"}
    assert got == entries


def test_index_errors(tmp_path):
    p = tmp_path / "index.txt"
    p.write_text("a = b\n")
    with pytest.raises(FormatError):
        read_index(p)
    p.write_text("file\tt\teps\tstep\nx\t1\n")
    with pytest.raises(FormatError, match="index.txt"):
        read_index(p)
