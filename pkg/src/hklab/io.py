"""Binary field snapshots and structured-text records.

Snapshot layout (little endian): a 64-byte header, the lattice basis as
``dim x dim`` float64, then each array as ``uint32 ndim``, ``ndim`` uint32
extents and C-ordered float64 data.
"""

import struct
from dataclasses import dataclass

import numpy as np
import yaml

from .gluing import NeckField
from .models import Lattice3

MAGIC = b"HKLB"
VERSION = 1
KIND_NECK = 1
KIND_TORUS = 2
_HEADER = struct.Struct("<4sHHI6Idd")
HEADER_SIZE = 64


@dataclass
class Snapshot:
    kind: int
    basis: np.ndarray
    arrays: list
    n_r: int = 0
    grid: tuple = ()
    rho: float = 0.0
    delta: float = 0.0


def write_snapshot(path, snap):
    basis = np.ascontiguousarray(snap.basis, dtype="<f8")
    dim = basis.shape[0]
    grid = tuple(snap.grid) + (0,) * (4 - len(snap.grid))
    head = _HEADER.pack(MAGIC, VERSION, snap.kind, len(snap.arrays), dim, snap.n_r, *grid, snap.rho, snap.delta)
    with open(path, "wb") as fh:
        fh.write(head.ljust(HEADER_SIZE, b"\0"))
        fh.write(basis.tobytes())
        for arr in snap.arrays:
            arr = np.ascontiguousarray(arr, dtype="<f8")
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def read_snapshot(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, version, kind, n_arrays, dim, n_r, g0, g1, g2, g3, rho, delta = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise ValueError("not a snapshot file")
    if version != VERSION:
        raise ValueError(f"unsupported snapshot version {version}")
    pos = HEADER_SIZE
    basis = np.frombuffer(raw, "<f8", dim * dim, pos).reshape(dim, dim).copy()
    pos += 8 * dim * dim
    arrays = []
    for _ in range(n_arrays):
        (ndim,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        shape = struct.unpack_from(f"<{ndim}I", raw, pos)
        pos += 4 * ndim
        count = int(np.prod(shape))
        arrays.append(np.frombuffer(raw, "<f8", count, pos).reshape(shape).copy())
        pos += 8 * count
    grid = tuple(g for g in (g0, g1, g2, g3) if g)
    return Snapshot(kind, basis, arrays, n_r, grid, rho, delta)


def write_neck(path, nf):
    snap = Snapshot(KIND_NECK, nf.lattice.basis, [nf.t, nf.a, nf.b], nf.n_r, nf.a.shape[-3:], nf.rho, nf.delta)
    write_snapshot(path, snap)


def read_neck(path):
    s = read_snapshot(path)
    if s.kind != KIND_NECK:
        raise ValueError("snapshot does not hold a neck field")
    t, a, b = s.arrays
    return NeckField(Lattice3(s.basis), s.rho, t, a, b, s.delta)


def write_torus_field(path, basis, arrays):
    arrays = [np.asarray(a) for a in arrays]
    grid = arrays[0].shape[-np.asarray(basis).shape[0]:]
    write_snapshot(path, Snapshot(KIND_TORUS, np.asarray(basis), arrays, 0, grid))


def dump_yaml(obj, path=None):
    text = yaml.safe_dump(obj, sort_keys=False)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def load_yaml(path):
    with open(path) as fh:
        return yaml.safe_load(fh)
