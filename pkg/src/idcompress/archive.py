"""Binary formats: compressed archives and raw snapshot frames.

Archive layout (all integers little-endian)::

    b"SPID"  u32 version
    u32 len  <len bytes of UTF-8 JSON metadata>  u32 crc32(metadata)
    u32 block_count
    block_count x ( u64 len  <section>  u32 crc32(section) )

    section := index_array(union) index_array(skeleton) matrix(skeleton) matrix(coeffs)
    index_array := u64 count, count x i64
    matrix := u64 rows, u64 cols, rows*cols x f64 in column-major order

Raw frames are ``m`` float64 little-endian values per snapshot, frames back
to back, with a JSON sidecar giving ``m``, ``n`` and the grid.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from .blocking import assemble, partition_blocks
from .errors import (
    BadMagic,
    ChecksumMismatch,
    DimensionMismatch,
    TruncatedPayload,
    UnstructuredNoInterp,
    VersionUnsupported,
)
from .grid import GridGeom, InterpOperator, SubsampleSpec, apply_interpolator, build_interpolator

MAGIC = b"SPID"
VERSION = 1
_F64 = np.dtype("<f8")
_I64 = np.dtype("<i8")


@dataclass(eq=False)
class BlockPayload:
    union_indices: np.ndarray
    skeleton_indices: np.ndarray
    skeleton: np.ndarray
    coeffs: np.ndarray

    @property
    def rank(self) -> int:
        return int(self.skeleton_indices.size)

    @property
    def stored_entries(self) -> int:
        return int(self.skeleton.size + self.coeffs.size)


@dataclass(eq=False)
class Archive:
    metadata: dict
    blocks: list = field(default_factory=list)

    def __eq__(self, other):
        return isinstance(other, Archive) and encode(self) == encode(other)

    @property
    def geom(self) -> GridGeom:
        return GridGeom.from_dict(self.metadata["grid"])

    @property
    def ranks(self) -> list:
        return [b.rank for b in self.blocks]


def _canonical_json(meta: dict) -> bytes:
    return json.dumps(meta, sort_keys=True, separators=(",", ":"), allow_nan=False).encode("utf-8")


def _pack_index(arr) -> bytes:
    a = np.ascontiguousarray(arr, dtype=_I64)
    return struct.pack("<Q", a.size) + a.tobytes()


def _pack_matrix(mat) -> bytes:
    a = np.asarray(mat, dtype=np.float64)
    return struct.pack("<QQ", *a.shape) + np.asfortranarray(a).astype(_F64).tobytes(order="F")


def encode(archive: Archive) -> bytes:
    meta = _canonical_json(archive.metadata)
    out = [MAGIC, struct.pack("<I", VERSION), struct.pack("<I", len(meta)), meta,
           struct.pack("<I", zlib.crc32(meta)), struct.pack("<I", len(archive.blocks))]
    for blk in archive.blocks:
        section = (_pack_index(blk.union_indices) + _pack_index(blk.skeleton_indices)
                   + _pack_matrix(blk.skeleton) + _pack_matrix(blk.coeffs))
        out += [struct.pack("<Q", len(section)), section, struct.pack("<I", zlib.crc32(section))]
    return b"".join(out)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = memoryview(buf)
        self.pos = 0

    def take(self, n: int) -> memoryview:
        if n < 0 or self.pos + n > len(self.buf):
            raise TruncatedPayload(f"need {n} bytes at offset {self.pos}, {len(self.buf) - self.pos} left")
        view = self.buf[self.pos : self.pos + n]
        self.pos += n
        return view

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def index_array(self) -> np.ndarray:
        (count,) = self.unpack("<Q")
        return np.frombuffer(self.take(8 * count), dtype=_I64).astype(np.int64)

    def matrix(self) -> np.ndarray:
        rows, cols = self.unpack("<QQ")
        data = np.frombuffer(self.take(8 * rows * cols), dtype=_F64).astype(np.float64)
        return data.reshape((rows, cols), order="F")


def decode(data: bytes) -> Archive:
    rd = _Reader(data)
    if bytes(rd.take(4)) != MAGIC:
        raise BadMagic("not an idcompress archive")
    (version,) = rd.unpack("<I")
    if version != VERSION:
        raise VersionUnsupported(f"archive version {version}, this build reads {VERSION}")
    (meta_len,) = rd.unpack("<I")
    meta = bytes(rd.take(meta_len))
    (crc,) = rd.unpack("<I")
    if zlib.crc32(meta) != crc:
        raise ChecksumMismatch("metadata checksum mismatch")
    metadata = json.loads(meta.decode("utf-8"))
    (count,) = rd.unpack("<I")
    blocks = []
    for i in range(count):
        (length,) = rd.unpack("<Q")
        section = bytes(rd.take(length))
        (crc,) = rd.unpack("<I")
        if zlib.crc32(section) != crc:
            raise ChecksumMismatch(f"block {i} checksum mismatch")
        sr = _Reader(section)
        blk = BlockPayload(sr.index_array(), sr.index_array(), sr.matrix(), sr.matrix())
        if sr.pos != len(section):
            raise TruncatedPayload(f"block {i} section has trailing bytes")
        blocks.append(blk)
    if rd.pos != len(rd.buf):
        raise TruncatedPayload("trailing bytes after the last block")
    return Archive(metadata, blocks)


def write_archive(archive: Archive, path) -> bytes:
    data = encode(archive)
    Path(path).write_bytes(data)
    return data


def read_archive(path) -> Archive:
    return decode(Path(path).read_bytes())


def block_interpolator(meta: dict, spec: SubsampleSpec) -> Optional[InterpOperator]:
    """Rebuild one block's interpolation operator from the stored recipe."""
    recipe = meta.get("interp", "none")
    if meta.get("skeleton_form") == "fine":
        return None
    if recipe == "multilinear":
        return build_interpolator(spec)
    if recipe == "identity":
        return None
    raise UnstructuredNoInterp(f"coarse skeletons with interpolation recipe {recipe!r} cannot be lifted")


def block_specs(meta: dict) -> list:
    geom = GridGeom.from_dict(meta["grid"])
    blocks = partition_blocks(geom, meta["plan"]["blocks_per_axis"])
    return [(blk, SubsampleSpec.from_dict(blk.geom, meta["subsample"])) for blk in blocks]


def decompress(archive: Archive) -> np.ndarray:
    """Lift coarse skeletons (if any), multiply out each block, assemble."""
    meta = archive.metadata
    specs = block_specs(meta)
    if len(specs) != len(archive.blocks):
        raise DimensionMismatch(f"metadata describes {len(specs)} blocks, archive holds {len(archive.blocks)}")
    parts = []
    for (blk, spec), payload in zip(specs, archive.blocks):
        skel = payload.skeleton
        op = block_interpolator(meta, spec)
        if op is not None:
            skel = apply_interpolator(op, skel)
        if skel.shape[0] != blk.rows.size:
            raise DimensionMismatch(f"block {blk.index} skeleton has {skel.shape[0]} rows, expected {blk.rows.size}")
        parts.append((blk.rows, skel @ payload.coeffs))
    return assemble(parts, meta["m"])


# raw snapshot frames


def write_frames(path, columns) -> int:
    """Append each column as one frame; returns the number of frames."""
    n = 0
    with open(path, "wb") as fh:
        if isinstance(columns, np.ndarray):
            columns = columns.T
        for col in columns:
            fh.write(np.ascontiguousarray(col, dtype=_F64).tobytes())
            n += 1
    return n


def iter_frames(path, m: int) -> Iterator[np.ndarray]:
    """Yield frames one at a time; only one frame is held in memory."""
    with open(path, "rb") as fh:
        while True:
            raw = fh.read(8 * m)
            if not raw:
                return
            if len(raw) != 8 * m:
                raise TruncatedPayload(f"partial frame of {len(raw)} bytes, expected {8 * m}")
            yield np.frombuffer(raw, dtype=_F64).astype(np.float64)


def read_frames(path, m: int) -> np.ndarray:
    cols = list(iter_frames(path, m))
    if not cols:
        return np.zeros((m, 0), order="F")
    return np.asfortranarray(np.column_stack(cols))


def write_sidecar(path, geom: GridGeom, n: int, **extra) -> dict:
    meta = {"m": geom.m, "n": int(n), "grid": geom.to_dict()}
    if geom.is_structured:
        meta["dims"] = list(geom.dims)
    meta.update(extra)
    Path(path).write_text(json.dumps(meta, sort_keys=True, indent=1), encoding="utf-8")
    return meta


def read_sidecar(path) -> dict:
    meta = json.loads(Path(path).read_text(encoding="utf-8"))
    if "grid" not in meta:
        if "dims" not in meta:
            raise DimensionMismatch("sidecar needs either 'grid' or 'dims'")
        meta["grid"] = GridGeom.structured(meta["dims"]).to_dict()
    return meta
