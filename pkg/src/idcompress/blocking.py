"""Spatial partitioning and the two-stage blocked ID.

Stage 1 compresses each temporal chunk of a block with a fixed rank. Stage 2
runs a tolerance-based ID on the concatenated stage-1 skeletons and folds the
block-diagonal stage-1 coefficients into a single ``k x n`` coefficient
matrix, never forming the block-diagonal matrix itself.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .datagen import even_split
from .errors import BlockTooSmall, CoverageGap, DimensionMismatch, ZeroMatrix
from .grid import GridGeom, InterpOperator, SubsampleSpec, apply_interpolator, subsample
from .idcore import IdFactors, column_id
from .linalg import FixedRank, RankRule, Tolerance, as_matrix

DEFAULT_STAGE2_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class Block:
    """One spatial block: its global row indices (increasing) and local grid."""

    index: int
    rows: np.ndarray
    geom: GridGeom


@dataclass(frozen=True, eq=False)
class PartitionPlan:
    geom: GridGeom
    blocks_per_axis: tuple
    time_chunk: int

    def __post_init__(self):
        if self.time_chunk < 1:
            raise ValueError("time_chunk must be >= 1")
        object.__setattr__(self, "blocks_per_axis", tuple(int(b) for b in self.blocks_per_axis))

    def blocks(self) -> list:
        return partition_blocks(self.geom, self.blocks_per_axis)

    def chunk_count(self, n: int) -> int:
        return -(-n // self.time_chunk)

    def to_dict(self) -> dict:
        return {"blocks_per_axis": list(self.blocks_per_axis), "time_chunk": self.time_chunk}


def partition_blocks(geom: GridGeom, blocks_per_axis: Sequence[int]) -> list:
    """Axis-aligned boxes in lexicographic block order (last axis fastest)."""
    nb = tuple(int(b) for b in blocks_per_axis)
    if len(nb) == 1 and geom.ndim > 1:
        nb = nb * geom.ndim
    if len(nb) != geom.ndim:
        raise DimensionMismatch(f"{len(nb)} block counts for a {geom.ndim}-axis grid")
    if any(b < 1 for b in nb):
        raise BlockTooSmall("blocks per axis must be >= 1")

    if geom.is_structured:
        if any(b > d for b, d in zip(nb, geom.dims)):
            raise BlockTooSmall(f"more blocks than points on some axis: {nb} vs {geom.dims}")
        ranges = []
        for d, b in zip(geom.dims, nb):
            sizes = even_split(d, b)
            starts = np.cumsum([0] + sizes[:-1])
            ranges.append([np.arange(s, s + z) for s, z in zip(starts, sizes)])
        out = []
        for i, combo in enumerate(itertools.product(*ranges)):
            mesh = np.meshgrid(*combo, indexing="ij")
            rows = np.ravel_multi_index(tuple(g.ravel() for g in mesh), geom.dims).astype(np.int64)
            sub = GridGeom.structured(
                [len(c) for c in combo],
                [per and b == 1 for per, b in zip(geom.periodic, nb)],
                geom.spacing,
                [o + h * c[0] for o, h, c in zip(geom.origin, geom.spacing, combo)],
                min_points=1,
            )
            out.append(Block(i, rows, sub))
        return out

    pts = geom.points
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    bins = np.minimum(np.floor((pts - lo) / span * np.array(nb)).astype(np.int64), np.array(nb) - 1)
    flat = np.ravel_multi_index(tuple(bins.T), nb)
    out = []
    for i in range(int(np.prod(nb))):
        rows = np.flatnonzero(flat == i).astype(np.int64)
        if rows.size == 0:
            raise BlockTooSmall(f"block {i} of the unstructured partition holds no points")
        out.append(Block(i, rows, GridGeom.unstructured(pts[rows])))
    return out


def partition(geom: GridGeom, blocks_per_axis: Sequence[int]) -> list:
    """Disjoint covering row-index sets, one per block."""
    return [b.rows for b in partition_blocks(geom, blocks_per_axis)]


def assemble(blocks, m: Optional[int] = None) -> np.ndarray:
    """Scatter ``(rows, block_matrix)`` pairs back into one matrix."""
    blocks = list(blocks)
    if not blocks:
        raise CoverageGap("no blocks to assemble")
    total = sum(len(r) for r, _ in blocks)
    m = total if m is None else m
    n = np.asarray(blocks[0][1]).shape[1]
    out = np.zeros((m, n), order="F")
    seen = np.zeros(m, dtype=bool)
    for rows, data in blocks:
        rows = np.asarray(rows, dtype=np.int64)
        data = np.asarray(data)
        if data.shape != (rows.size, n):
            raise DimensionMismatch(f"block data shape {data.shape} does not match {rows.size} rows x {n}")
        if rows.size and (rows.min() < 0 or rows.max() >= m or seen[rows].any()):
            raise CoverageGap("block row sets overlap or fall outside the matrix")
        seen[rows] = True
        out[rows] = data
    if not seen.all():
        raise CoverageGap(f"{int((~seen).sum())} rows are not covered by any block")
    return out


def id_or_empty(a, rule: RankRule, *, allow_deficient: bool = False) -> IdFactors:
    """Column ID that maps an identically zero matrix to rank-0 factors."""
    a = as_matrix(a)
    try:
        return column_id(a, rule, allow_deficient=allow_deficient)
    except ZeroMatrix:
        return IdFactors.empty(*a.shape)


def compress_blocks(a, geom: GridGeom, blocks_per_axis, rule: RankRule) -> list:
    """Plain column ID on each spatial block; returns ``[(Block, IdFactors)]``."""
    a = as_matrix(a)
    if a.shape[0] != geom.m:
        raise DimensionMismatch(f"matrix has {a.shape[0]} rows, grid has {geom.m}")
    return [(blk, id_or_empty(a[blk.rows], rule)) for blk in partition_blocks(geom, blocks_per_axis)]


def reconstruct_blocks(results, m: int) -> np.ndarray:
    return assemble(((blk.rows, f.skeleton @ f.coeffs) for blk, f in results), m)


def stage1_from_sketch(b, k: int) -> IdFactors:
    """Fixed-rank ID of one chunk's coarse sketch, rank clamped to the chunk
    shape and to its numerical rank."""
    b = as_matrix(b)
    rank = min(int(k), *b.shape)
    return id_or_empty(b, FixedRank(rank), allow_deficient=True)


def stage1_compress(chunk, spec: SubsampleSpec, k: int) -> IdFactors:
    """Stage 1 on a fine-grid chunk: subsample, then fixed-rank ID."""
    return stage1_from_sketch(subsample(chunk, spec), k)


@dataclass(frozen=True, eq=False)
class TwoStageFactors:
    """``A ~= (M) final_skeleton @ final_coeffs`` for one spatial block.

    ``union_indices`` are the stage-1 skeleton columns as global snapshot
    indices, sorted; ``skeleton_indices`` are the global indices of the
    final skeleton in stage-2 selection order.
    """

    stage1: tuple
    union_indices: np.ndarray
    skeleton_indices: np.ndarray
    final_skeleton: np.ndarray
    stage2_coeffs: np.ndarray
    final_coeffs: np.ndarray
    interp: Optional[InterpOperator] = None

    @property
    def achieved_rank(self) -> int:
        return int(self.skeleton_indices.size)

    @property
    def n(self) -> int:
        return self.final_coeffs.shape[1]


def chunk_offsets(widths: Sequence[int]) -> np.ndarray:
    return np.concatenate([[0], np.cumsum(widths)[:-1]]).astype(np.int64)


def global_to_local(index: int, widths: Sequence[int]) -> tuple:
    offsets = chunk_offsets(widths)
    j = int(np.searchsorted(offsets, index, side="right") - 1)
    return j, int(index - offsets[j])


def local_to_global(chunk: int, local: int, widths: Sequence[int]) -> int:
    return int(chunk_offsets(widths)[chunk] + local)


def _sorted_stage1(f: IdFactors):
    order = np.argsort(f.skeleton_indices, kind="stable")
    return order, f.skeleton_indices[order], f.skeleton[:, order], f.coeffs[order]


def stage2_compress(
    stage1: Sequence[IdFactors], tol: float = DEFAULT_STAGE2_TOL, interp: Optional[InterpOperator] = None
) -> TwoStageFactors:
    if not stage1:
        raise ValueError("stage 2 needs at least one stage-1 result")
    rows = stage1[0].skeleton.shape[0]
    if any(f.skeleton.shape[0] != rows for f in stage1):
        raise DimensionMismatch("stage-1 skeletons have inconsistent row counts")
    widths = [f.source_cols for f in stage1]
    offsets = chunk_offsets(widths)
    n = int(sum(widths))

    union, skels, coeffs = [], [], []
    for off, f in zip(offsets, stage1):
        _, idx, skel, c = _sorted_stage1(f)
        union.append(idx + off)
        skels.append(skel)
        coeffs.append(c)
    union_idx = np.concatenate(union).astype(np.int64)
    assert np.all(np.diff(union_idx) > 0), "stage-1 global indices must be unique"
    concat = np.asfortranarray(np.hstack(skels)) if union_idx.size else np.zeros((rows, 0), order="F")

    if union_idx.size == 0:
        second = IdFactors.empty(rows, 0)
    else:
        second = id_or_empty(concat, Tolerance(tol))
    k2 = second.achieved_rank

    # C1' = C1 @ blockdiag(C_0, ..., C_{N-1}), one column block per chunk
    final = np.zeros((k2, n), order="F")
    pos = 0
    for off, width, c in zip(offsets, widths, coeffs):
        kj = c.shape[0]
        if kj:
            final[:, off : off + width] = second.coeffs[:, pos : pos + kj] @ c
        pos += kj

    return TwoStageFactors(
        stage1=tuple(stage1),
        union_indices=union_idx,
        skeleton_indices=union_idx[second.skeleton_indices],
        final_skeleton=second.skeleton,
        stage2_coeffs=second.coeffs,
        final_coeffs=final,
        interp=interp,
    )


def materialize_block_diagonal(stage1: Sequence[IdFactors]) -> np.ndarray:
    """The explicit block-diagonal stage-1 coefficient matrix, rows ordered
    like ``union_indices``. For verification only."""
    blocks = [_sorted_stage1(f)[3] for f in stage1]
    k = sum(b.shape[0] for b in blocks)
    n = sum(f.source_cols for f in stage1)
    out = np.zeros((k, n), order="F")
    r = c = 0
    for b in blocks:
        out[r : r + b.shape[0], c : c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out


def reconstruct_two_stage(tsf: TwoStageFactors) -> np.ndarray:
    skel = tsf.final_skeleton
    if tsf.interp is not None:
        skel = apply_interpolator(tsf.interp, skel)
    return np.asfortranarray(skel @ tsf.final_coeffs)


def two_stage_id(a, spec: SubsampleSpec, time_chunk: int, k: int, tol: float = DEFAULT_STAGE2_TOL,
                 interp: Optional[InterpOperator] = None) -> TwoStageFactors:
    """Batch form of the two-stage scheme on one block (no streaming)."""
    a = as_matrix(a)
    n = a.shape[1]
    stage1 = [stage1_compress(a[:, s : s + time_chunk], spec, k) for s in range(0, n, time_chunk)]
    return stage2_compress(stage1, tol, interp)
