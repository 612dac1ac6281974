"""In-situ streaming compressor.

A single ordered producer yields fine-grid snapshots. Each snapshot is split
into spatial blocks, subsampled, and written into the block's open chunk
buffer; the fine snapshot is dropped right after. When a chunk fills (the
``t_crit`` boundary) the buffer is handed to a stage-1 task and ingestion
continues. After the last snapshot, stage 2 runs per block and the results
are packed into an :class:`~idcompress.archive.Archive`.

Numeric buffers move between tasks by ownership transfer only; the event
log is the one shared, append-only structure. Archives do not depend on
scheduling order or worker count.
"""

from __future__ import annotations

import threading
import time
from collections import deque
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .archive import Archive, BlockPayload
from .blocking import DEFAULT_STAGE2_TOL, Block, PartitionPlan, stage1_from_sketch, stage2_compress
from .errors import DimensionMismatch, EmptyLog, NonFiniteInput, ShortStream, StageFailure
from .grid import SubsampleSpec, build_interpolator

SNAPSHOT_INGESTED = "SnapshotIngested"
CHUNK_CLOSED = "ChunkClosed"
STAGE1_DONE = "Stage1Done"
STAGE2_DONE = "Stage2Done"


@dataclass(frozen=True)
class TaskEvent:
    kind: str
    block: int
    chunk: int
    start: float
    end: float
    snapshot: int = -1


class EventLog:
    def __init__(self):
        self._lock = threading.Lock()
        self._events: list[TaskEvent] = []

    def append(self, event: TaskEvent) -> None:
        with self._lock:
            self._events.append(event)

    def events(self) -> list:
        with self._lock:
            return list(self._events)


@dataclass
class MemoryStats:
    peak_fine_values: int = 0
    peak_coarse_values: int = 0
    fine_values: int = 0
    coarse_values: int = 0


class BufferManager:
    """Accounts for every fine snapshot and coarse chunk buffer the pipeline
    holds, so the single-pass memory contract can be checked."""

    def __init__(self):
        self._lock = threading.Lock()
        self.stats = MemoryStats()

    def hold_fine(self, values: int) -> None:
        with self._lock:
            s = self.stats
            s.fine_values += values
            s.peak_fine_values = max(s.peak_fine_values, s.fine_values)

    def release_fine(self, values: int) -> None:
        with self._lock:
            self.stats.fine_values -= values

    def alloc_coarse(self, rows: int, cols: int) -> np.ndarray:
        with self._lock:
            s = self.stats
            s.coarse_values += rows * cols
            s.peak_coarse_values = max(s.peak_coarse_values, s.coarse_values)
        return np.zeros((rows, cols), order="F")

    def free_coarse(self, buf: np.ndarray) -> None:
        with self._lock:
            self.stats.coarse_values -= buf.shape[0] * buf.shape[1]


@dataclass(frozen=True)
class StreamConfig:
    """``stage1_rank`` is the fixed stage-1 rank k; chunks close every
    ``plan.time_chunk`` snapshots. ``workers <= 1`` runs stage-1 inline."""

    plan: PartitionPlan
    strides: tuple = (1,)
    include_boundary: bool = True
    stage1_rank: int = 1
    stage2_tol: float = DEFAULT_STAGE2_TOL
    workers: int = 1
    max_pending: int = 2
    qoi: str = ""
    provenance: str = ""

    def block_spec(self, blk: Block) -> SubsampleSpec:
        strides = tuple(self.strides)
        if blk.geom.is_structured and len(strides) == 1:
            strides = strides * blk.geom.ndim
        return SubsampleSpec(blk.geom, strides, self.include_boundary)

    def subsample_dict(self) -> dict:
        return {"strides": [int(s) for s in self.strides], "include_boundary": self.include_boundary}

    def interp_recipe(self) -> str:
        if self.plan.geom.is_structured:
            return "multilinear"
        return "identity" if all(int(s) == 1 for s in self.strides) else "none"


@dataclass
class PipelineResult:
    archive: Archive
    events: list
    memory: MemoryStats
    factors: list = field(default_factory=list)


class _BlockState:
    def __init__(self, blk: Block, gather: np.ndarray):
        self.blk = blk
        self.gather = gather
        self.buf: Optional[np.ndarray] = None
        self.pending: deque = deque()
        self.results: dict = {}


def run_pipeline(producer: Iterable, config: StreamConfig) -> PipelineResult:
    plan = config.plan
    geom = plan.geom
    m = geom.m
    chunk = plan.time_chunk
    recipe = config.interp_recipe()

    states = []
    for blk in plan.blocks():
        spec = config.block_spec(blk)
        if recipe == "multilinear":
            build_interpolator(spec)  # fail fast on ExtrapolationRequired
        states.append(_BlockState(blk, blk.rows[spec.rows]))

    log = EventLog()
    mem = BufferManager()
    pool = ThreadPoolExecutor(max_workers=config.workers) if config.workers > 1 else None

    def stage1(b: int, j: int, buf: np.ndarray, width: int):
        start = time.perf_counter()
        try:
            f = stage1_from_sketch(buf[:, :width], config.stage1_rank)
        except Exception as exc:
            raise StageFailure(b, j, f"{type(exc).__name__}: {exc}") from exc
        finally:
            mem.free_coarse(buf)
        log.append(TaskEvent(STAGE1_DONE, b, j, start, time.perf_counter()))
        return f

    def collect(st: _BlockState, j: int, fut: Future) -> None:
        st.results[j] = fut.result()

    def close_chunk(j: int, width: int) -> None:
        now = time.perf_counter()
        for b, st in enumerate(states):
            buf, st.buf = st.buf, None
            log.append(TaskEvent(CHUNK_CLOSED, b, j, now, now))
            if pool is None:
                st.results[j] = stage1(b, j, buf, width)
                continue
            while len(st.pending) >= config.max_pending:
                collect(st, *st.pending.popleft())
            st.pending.append((j, pool.submit(stage1, b, j, buf, width)))

    count = 0
    fill = 0
    chunk_id = 0
    try:
        it = iter(producer)
        while True:
            t0 = time.perf_counter()
            try:
                snap = next(it)
            except StopIteration:
                break
            snap = np.asarray(snap, dtype=np.float64).ravel()
            if snap.size != m:
                raise DimensionMismatch(f"snapshot {count} has {snap.size} values, grid has {m}")
            if not np.isfinite(snap).all():
                raise NonFiniteInput(f"snapshot {count} contains NaN or infinite entries")
            mem.hold_fine(m)
            for st in states:
                if st.buf is None:
                    st.buf = mem.alloc_coarse(st.gather.size, chunk)
                st.buf[:, fill] = snap[st.gather]
            del snap
            mem.release_fine(m)
            fill += 1
            log.append(TaskEvent(SNAPSHOT_INGESTED, -1, chunk_id, t0, time.perf_counter(), count))
            count += 1
            if fill == chunk:
                close_chunk(chunk_id, fill)
                chunk_id += 1
                fill = 0
        if count == 0:
            raise ShortStream("producer yielded no snapshots")
        if fill:
            close_chunk(chunk_id, fill)
            chunk_id += 1
        for st in states:
            while st.pending:
                collect(st, *st.pending.popleft())

        def stage2(b: int, st: _BlockState):
            start = time.perf_counter()
            tsf = stage2_compress([st.results[j] for j in range(chunk_id)], config.stage2_tol)
            log.append(TaskEvent(STAGE2_DONE, b, -1, start, time.perf_counter()))
            return tsf

        if pool is None:
            factors = [stage2(b, st) for b, st in enumerate(states)]
        else:
            futures = [pool.submit(stage2, b, st) for b, st in enumerate(states)]
            factors = [f.result() for f in futures]
    except BaseException:
        if pool is not None:
            for st in states:
                for _, fut in st.pending:
                    fut.cancel()
        raise
    finally:
        if pool is not None:
            pool.shutdown(wait=True)

    metadata = {
        "format": "idcompress",
        "m": m,
        "n": count,
        "qoi": config.qoi,
        "grid": geom.to_dict(),
        "plan": plan.to_dict(),
        "subsample": config.subsample_dict(),
        "rank_rule": {"stage1_rank": int(config.stage1_rank), "stage2_tol": float(config.stage2_tol)},
        "interp": recipe,
        "skeleton_form": "coarse",
        "provenance": config.provenance,
    }
    blocks = [
        BlockPayload(f.union_indices, f.skeleton_indices, f.final_skeleton, f.final_coeffs) for f in factors
    ]
    return PipelineResult(Archive(metadata, blocks), log.events(), mem.stats, factors)


def second_pass(archive: Archive, producer: Iterable) -> Archive:
    """SubID completion: re-read the stream and replace each block's coarse
    skeleton with the full fine-grid columns at its skeleton indices."""
    from .archive import block_specs

    meta = dict(archive.metadata)
    specs = block_specs(meta)
    wanted = [{int(g): p for p, g in enumerate(b.skeleton_indices)} for b in archive.blocks]
    fine = [np.zeros((blk.rows.size, b.rank), order="F") for (blk, _), b in zip(specs, archive.blocks)]
    for i, snap in enumerate(producer):
        snap = np.asarray(snap, dtype=np.float64).ravel()
        for (blk, _), want, out in zip(specs, wanted, fine):
            p = want.get(i)
            if p is not None:
                out[:, p] = snap[blk.rows]
    meta["skeleton_form"] = "fine"
    blocks = [BlockPayload(b.union_indices, b.skeleton_indices, f, b.coeffs) for b, f in zip(archive.blocks, fine)]
    return Archive(meta, blocks)


def overlap_report(events) -> dict:
    """Fraction of stage-1 wall time that overlaps producer/ingestion activity."""
    events = list(events)
    if not events:
        raise EmptyLog("event log is empty")
    prod = sorted((e.start, e.end) for e in events if e.kind == SNAPSHOT_INGESTED)
    work = [(e.start, e.end) for e in events if e.kind == STAGE1_DONE]
    total = sum(b - a for a, b in work)
    if total <= 0.0 or not prod:
        return {"overlap_fraction": 0.0, "stage1_seconds": total, "stage1_tasks": len(work)}
    ps = np.array([p[0] for p in prod])
    pe = np.array([p[1] for p in prod])
    overlap = 0.0
    for a, b in work:
        overlap += float(np.clip(np.minimum(pe, b) - np.maximum(ps, a), 0.0, None).sum())
    return {"overlap_fraction": overlap / total, "stage1_seconds": total, "stage1_tasks": len(work)}
