"""Binary snapshot format and CSV time series.

Snapshot layout (all little-endian, no padding)::

    magic        6 bytes   b"MSFLD1"
    version      u32       1
    N            u32
    L            f64
    t            f64
    gamma        f64
    field_count  u32
    field table  field_count x (name: 8 bytes ASCII, NUL padded; kind: u32)
                 kind 1 = complex scalar, kind 2 = real 3-vector
    payload      fields in table order, f64 values, x-fastest index order;
                 complex values interleaved (re, im); a 3-vector stores its
                 components one after another.
"""
from __future__ import annotations

import csv
import math
import struct
from pathlib import Path

import numpy as np

from .diagnostics import DiagnosticRecord
from .physics import State
from .spectral import Grid

MAGIC = b"MSFLD1"
VERSION = 1
KIND_COMPLEX = 1
KIND_VEC3 = 2
_HEAD = struct.Struct("<6sIIdddI")
_ENTRY = struct.Struct("<8sI")
FIELDS = (("u", KIND_COMPLEX), ("A", KIND_VEC3), ("At", KIND_VEC3))

CSV_COLUMNS = DiagnosticRecord.columns()


class FormatError(ValueError):
    pass


def _values_per_point(kind: int) -> int:
    if kind == KIND_COMPLEX:
        return 2
    if kind == KIND_VEC3:
        return 3
    raise FormatError(f"unknown field kind {kind}")


def encode_snapshot(state: State, gamma: float = math.nan) -> bytes:
    g = state.grid
    parts = [_HEAD.pack(MAGIC, VERSION, g.N, g.L, state.t, gamma, len(FIELDS))]
    parts += [_ENTRY.pack(name.encode("ascii"), kind) for name, kind in FIELDS]
    parts.append(np.ravel(state.u, order="F").astype("<c16").tobytes())
    for F in (state.A, state.At):
        for comp in F:
            parts.append(np.ravel(comp, order="F").astype("<f8").tobytes())
    return b"".join(parts)


def write_snapshot(state: State, path, gamma: float = math.nan) -> None:
    data = encode_snapshot(state, gamma)
    with open(path, "wb") as fh:
        fh.write(data)


def decode_snapshot(buf: bytes, grid: Grid | None = None) -> tuple[State, dict]:
    if len(buf) < _HEAD.size:
        raise FormatError(f"truncated header: {len(buf)} bytes")
    magic, version, N, L, t, gamma, count = _HEAD.unpack_from(buf, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}, expected {VERSION}")
    off = _HEAD.size
    if len(buf) < off + count * _ENTRY.size:
        raise FormatError("truncated field table")
    table = []
    for _ in range(count):
        name, kind = _ENTRY.unpack_from(buf, off)
        off += _ENTRY.size
        table.append((name.rstrip(b"\0").decode("ascii"), kind))
    if sorted(n for n, _ in table) != sorted(n for n, _ in FIELDS):
        raise FormatError(f"field table {table} does not hold u, A, At")
    expected = sum(_values_per_point(k) for _, k in table) * N**3 * 8
    if len(buf) - off != expected:
        raise FormatError(f"payload is {len(buf) - off} bytes but header N={N} "
                          f"with {count} fields requires {expected} bytes")
    if grid is not None and (grid.N != N or grid.L != L):
        raise FormatError(f"snapshot grid (N={N}, L={L}) does not match requested "
                          f"grid (N={grid.N}, L={grid.L})")
    arrays = {}
    n3 = N**3
    for name, kind in table:
        if kind == KIND_COMPLEX:
            a = np.frombuffer(buf, "<c16", n3, off)
            arrays[name] = np.ascontiguousarray(a.reshape((N, N, N), order="F"), complex)
            off += 16 * n3
        else:
            comps = []
            for _ in range(3):
                a = np.frombuffer(buf, "<f8", n3, off)
                comps.append(a.reshape((N, N, N), order="F"))
                off += 8 * n3
            arrays[name] = np.ascontiguousarray(np.stack(comps), dtype=np.float64)
    grid = grid or Grid(N, L)
    header = {"version": version, "N": N, "L": L, "t": t, "gamma": gamma, "fields": table}
    return State(grid, t, arrays["u"], arrays["A"], arrays["At"]), header


def read_snapshot(path, grid: Grid | None = None) -> tuple[State, dict]:
    with open(path, "rb") as fh:
        return decode_snapshot(fh.read(), grid)


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_timeseries(records, path) -> None:
    """Write diagnostics as CSV with a fixed header and 17 significant digits."""
    records = list(records)
    times = [r.t for r in records]
    if any(b < a for a, b in zip(times, times[1:])):
        raise ValueError("records must be time-sorted")
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow([_fmt(v) for v in r.values()])


class TimeseriesWriter:
    """Streaming variant of :func:`write_timeseries`."""

    def __init__(self, path):
        self._fh = open(path, "w", newline="", encoding="ascii")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(CSV_COLUMNS)
        self._last = -math.inf

    def write(self, rec: DiagnosticRecord) -> None:
        if rec.t < self._last:
            raise ValueError("records must be time-sorted")
        self._last = rec.t
        self._w.writerow([_fmt(v) for v in rec.values()])
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_timeseries(path) -> list[DiagnosticRecord]:
    with open(path, newline="", encoding="ascii") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != CSV_COLUMNS:
        raise FormatError(f"unexpected CSV header in {path}")
    return [DiagnosticRecord(*map(float, row)) for row in rows[1:]]


def snapshot_path(output_dir, prefix: str, index: int) -> Path:
    return Path(output_dir) / f"{prefix}_{index:05d}.msf"
