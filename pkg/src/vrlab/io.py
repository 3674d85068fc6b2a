"""Binary snapshot files, kernel-table dumps and checkpoint indices.

A snapshot is a text header followed by little-endian float64 data::

    VRLAB1
    key = value
    ...
    end_header
    <row-major array of shape (nfields, nr+1, nz+1)>

Kernel tables use the same layout with magic ``VRKRN1`` and a (3, n) array
holding log s, log F and log F~.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fields import Grid
from .kernels import KernelTable

__all__ = [
    "FormatError",
    "SNAPSHOT_MAGIC",
    "KERNEL_MAGIC",
    "Snapshot",
    "write_snapshot",
    "read_snapshot",
    "write_kernel_table",
    "read_kernel_table",
    "write_index",
    "read_index",
]

SNAPSHOT_MAGIC = "VRLAB1"
KERNEL_MAGIC = "VRKRN1"
_END = "end_header"
_DTYPE = np.dtype("<f8")


class FormatError(ValueError):
    """Malformed or foreign file; the message always names the path."""


@dataclass(frozen=True, eq=False)
class Snapshot:
    grid: Grid
    arrays: dict
    meta: dict


def _write(path: Path, magic: str, header: dict, data: np.ndarray) -> None:
    lines = [magic]
    for k, v in header.items():
        k, v = str(k), str(v)
        if "\n" in v or "=" in k:
            raise ValueError(f"header entry {k!r} cannot be serialised")
        lines.append(f"{k} = {v}")
    lines.append(_END)
    blob = ("\n".join(lines) + "\n").encode("utf-8")
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    try:
        with open(tmp, "wb") as fh:
            fh.write(blob)
            fh.write(np.ascontiguousarray(data, dtype=_DTYPE).tobytes(order="C"))
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _read(path: Path, magic: str) -> tuple[dict, bytes]:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    first = raw[: len(magic) + 1]
    if first != (magic + "\n").encode():
        raise FormatError(f"{path}: bad magic (expected {magic})")
    marker = ("\n" + _END + "\n").encode()
    end = raw.find(marker)
    if end < 0:
        raise FormatError(f"{path}: header not terminated")
    header = {}
    for line in raw[len(magic) + 1 : end].decode("utf-8").splitlines():
        if not line.strip():
            continue
        if " = " not in line:
            raise FormatError(f"{path}: malformed header line {line!r}")
        k, v = line.split(" = ", 1)
        header[k.strip()] = v
    return header, raw[end + len(marker) :]


def write_snapshot(path, grid: Grid, arrays: dict, meta: dict | None = None) -> None:
    """Write named arrays sampled on ``grid``.

    Parameters
    ----------
    path : path-like
    grid : Grid
    arrays : dict of str -> ndarray
        Each of shape ``grid.shape``; written in insertion order.
    meta : dict, optional
        Extra header entries (time, eps, params, config hash ...).
    """
    names = list(arrays)
    if not names:
        raise ValueError("snapshot needs at least one array")
    for n in names:
        if np.shape(arrays[n]) != grid.shape:
            raise ValueError(f"array {n!r} has shape {np.shape(arrays[n])}, grid is {grid.shape}")
        if "," in n:
            raise ValueError("array names cannot contain commas")
    header = dict(grid.to_header())
    header["fields"] = ",".join(names)
    for k, v in (meta or {}).items():
        header[k] = v if isinstance(v, str) else repr(v)
    _write(path, SNAPSHOT_MAGIC, header, np.stack([np.asarray(arrays[n], dtype=float) for n in names]))


def read_snapshot(path) -> Snapshot:
    header, body = _read(path, SNAPSHOT_MAGIC)
    try:
        grid = Grid.from_header(header)
        names = header["fields"].split(",")
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: incomplete header ({exc})") from exc
    n = len(names) * grid.shape[0] * grid.shape[1]
    if len(body) != n * _DTYPE.itemsize:
        raise FormatError(f"{path}: expected {n} values, found {len(body) // _DTYPE.itemsize}")
    data = np.frombuffer(body, dtype=_DTYPE).reshape(len(names), *grid.shape).astype(float)
    grid_keys = set(grid.to_header()) | {"fields"}
    meta = {k: v for k, v in header.items() if k not in grid_keys}
    return Snapshot(grid, {k: data[i] for i, k in enumerate(names)}, meta)


def write_kernel_table(path, table: KernelTable, meta: dict | None = None) -> None:
    header = {"n": str(table.log_s.size)}
    header.update({k: str(v) for k, v in (meta or {}).items()})
    _write(path, KERNEL_MAGIC, header, np.stack([table.log_s, table.log_F, table.log_Ft]))


def read_kernel_table(path) -> KernelTable:
    header, body = _read(path, KERNEL_MAGIC)
    try:
        n = int(header["n"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: missing table length") from exc
    if len(body) != 3 * n * _DTYPE.itemsize:
        raise FormatError(f"{path}: truncated kernel table")
    a = np.frombuffer(body, dtype=_DTYPE).reshape(3, n).astype(float)
    return KernelTable(a[0], a[1], a[2])


def write_index(path, entries: list[dict], meta: dict) -> None:
    """Checkpoint index: ``key = value`` header, then one tab-separated line per snapshot."""
    cols = ["file", "t", "eps", "step"]
    lines = ["# vrlab checkpoint index"]
    lines += [f"{k} = {v}" for k, v in meta.items()]
    lines.append("\t".join(cols))
    for e in entries:
        lines.append("\t".join(e[c] if isinstance(e[c], str) else repr(e[c]) for c in cols))
    Path(path).write_text("\n".join(lines) + "\n")


def read_index(path) -> tuple[dict, list[dict]]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    meta, entries, cols = {}, [], None
    for line in text.splitlines():
        if not line or line.startswith("#"):
            continue
        if cols is None and " = " in line:
            k, v = line.split(" = ", 1)
            meta[k] = v
        elif cols is None:
            cols = line.split("\t")
        else:
            vals = line.split("\t")
            if len(vals) != len(cols):
                raise FormatError(f"{path}: malformed index row {line!r}")
            row = dict(zip(cols, vals))
            entries.append({"file": row["file"], "t": float(row["t"]), "eps": float(row["eps"]), "step": int(row["step"])})
    if cols is None:
        raise FormatError(f"{path}: no index table")
    return meta, entries
