"""CSV tables and binary state snapshots.

CSV: first line ``# config_sha256=<hex>``, then a header row, then rows
with every float printed as ``%.17g`` so files compare byte for byte.

Snapshot ``<name>.bin`` layout, all little-endian:

====== ======== ==============================================
offset type     content
====== ======== ==============================================
0      8 bytes  magic ``RLSNAP01``
8      uint32   dim
12     uint32   cells along axes 0, 1, 2 (unused axes hold 1)
24     uint32   ordinate count (0 for a temperature-only state)
28     float64  time
36     float64  temperature, C order over the grid shape
...    float64  intensity, C order over grid shape + (ordinates,)
====== ======== ==============================================

A ``<name>.json`` sidecar holds the grid extents and periodicity, the
run parameters and the config hash.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import KineticState, make_grid

MAGIC = b"RLSNAP01"
_HEADER = struct.Struct("<8sIIIII d")


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence], config_sha: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# config_sha256={config_sha}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            if len(row) != len(columns):
                raise ValueError(f"row has {len(row)} values, header has {len(columns)}")
            fh.write(",".join(format_value(v) for v in row) + "\n")
    return path


def read_csv(path):
    """Return ``(config_sha, columns, float array of rows)``."""
    with open(path) as fh:
        first = fh.readline().strip()
        if not first.startswith("# config_sha256="):
            raise ValueError(f"{path}: missing config hash comment line")
        cols = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return first.split("=", 1)[1], cols, data.reshape(-1, len(cols))


def write_snapshot(path_stem, time: float, temperature: np.ndarray, grid,
                   intensity: Optional[np.ndarray] = None, meta: Optional[dict] = None) -> Path:
    stem = Path(path_stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    counts = list(grid.cells_per_axis) + [1] * (3 - grid.dim)
    nq = 0 if intensity is None else intensity.shape[-1]
    with open(stem.with_suffix(".bin"), "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, grid.dim, *counts, nq, float(time)))
        fh.write(np.ascontiguousarray(temperature, dtype="<f8").tobytes())
        if intensity is not None:
            fh.write(np.ascontiguousarray(intensity, dtype="<f8").tobytes())
    side = {"time": float(time), "dim": grid.dim, "cells": list(grid.cells_per_axis),
            "extent": [float(e) for e in grid.extent_per_axis],
            "periodic": [bool(p) for p in grid.periodic_per_axis], "ordinates": nq}
    side.update(meta or {})
    with open(stem.with_suffix(".json"), "w") as fh:
        json.dump(side, fh, indent=2, sort_keys=True)
    return stem.with_suffix(".bin")


def read_snapshot(path):
    """Return ``(time, temperature, intensity or None, grid, sidecar dict)``."""
    path = Path(path)
    raw = path.with_suffix(".bin").read_bytes()
    magic, dim, c0, c1, c2, nq, time = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: not a snapshot file")
    side = json.loads(path.with_suffix(".json").read_text())
    shape = tuple([c0, c1, c2][:dim])
    grid = make_grid(dim, list(shape), side["extent"], side["periodic"])
    n = int(np.prod(shape))
    off = _HEADER.size
    T = np.frombuffer(raw, dtype="<f8", count=n, offset=off).reshape(shape).astype(float)
    psi = None
    if nq:
        psi = np.frombuffer(raw, dtype="<f8", count=n * nq, offset=off + 8 * n)
        psi = psi.reshape(shape + (nq,)).astype(float)
    return time, T, psi, grid, side


def load_kinetic_snapshot(path) -> KineticState:
    time, T, psi, grid, _ = read_snapshot(path)
    if psi is None:
        raise ValueError(f"{path}: snapshot has no intensity field")
    return KineticState(time, T, psi, grid)
