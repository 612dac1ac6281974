"""Reference data: analytic 2-D Taylor-Green snapshots, synthetic exact-rank
and locally-low-rank matrices, smooth 3-D fields and random point clouds.

Every random generator uses numpy's PCG64 bit generator seeded with the
integer ``seed``, so outputs are reproducible across runs and platforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .grid import GridGeom

TWO_PI = 2.0 * math.pi
QOIS = ("u1", "u2", "p")


def rng_for(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def periodic_box(dims, length: float = TWO_PI) -> GridGeom:
    """Structured periodic grid over ``[0, length)`` per axis."""
    dims = tuple(int(d) for d in dims)
    return GridGeom.structured(dims, [True] * len(dims), [length / d for d in dims], [0.0] * len(dims))


@dataclass(frozen=True)
class TaylorGreenParams:
    """2-D incompressible Taylor-Green vortex sampled at ``t_j = (j + 1) dt``.

    ``nu`` defaults to 0.1; the rank-1 structure of each QoI does not depend
    on it.
    """

    grid: GridGeom = field(default_factory=lambda: periodic_box((20, 20)))
    nu: float = 0.1
    rho: float = 1.0
    dt: float = 0.1
    n: int = 100
    qoi: str = "u1"

    def __post_init__(self):
        if self.nu <= 0 or self.rho <= 0 or self.dt <= 0 or self.n < 1:
            raise ValueError("Taylor-Green parameters need nu, rho, dt > 0 and n >= 1")
        if self.qoi not in QOIS:
            raise ValueError(f"qoi must be one of {QOIS}, got {self.qoi!r}")
        if self.grid.ndim != 2:
            raise ValueError("the analytic Taylor-Green vortex is two-dimensional")

    def times(self) -> np.ndarray:
        return self.dt * np.arange(1, self.n + 1)


def taylor_green_value(qoi: str, x1, x2, t, nu: float = 0.1, rho: float = 1.0):
    x1, x2 = np.asarray(x1, dtype=np.float64), np.asarray(x2, dtype=np.float64)
    if qoi == "u1":
        return np.sin(x1) * np.cos(x2) * np.exp(-2.0 * nu * t)
    if qoi == "u2":
        return -np.cos(x1) * np.sin(x2) * np.exp(-2.0 * nu * t)
    if qoi == "p":
        return rho / 4.0 * (np.cos(2.0 * x1) + np.sin(2.0 * x2)) * np.exp(-4.0 * nu * t)
    raise ValueError(f"unknown qoi {qoi!r}")


def taylor_green_snapshot(params: TaylorGreenParams, t: float) -> np.ndarray:
    if t < 0:
        raise ValueError("t must be nonnegative")
    xy = params.grid.coordinates()
    return taylor_green_value(params.qoi, xy[:, 0], xy[:, 1], t, params.nu, params.rho)


def taylor_green_stream(params: TaylorGreenParams) -> Iterator[np.ndarray]:
    for t in params.times():
        yield taylor_green_snapshot(params, float(t))


def taylor_green_matrix(params: TaylorGreenParams) -> np.ndarray:
    return np.asfortranarray(np.column_stack(list(taylor_green_stream(params))))


def gen_exact_rank(m: int, n: int, r: int, seed: int) -> np.ndarray:
    """Product of seeded ``m x r`` and ``r x n`` factors with entries in [-1, 1]."""
    if r > min(m, n) or r < 0:
        raise ValueError(f"rank {r} not in [0, min(m, n)]")
    if r == 0:
        return np.zeros((m, n), order="F")
    rng = rng_for(seed)
    left = rng.uniform(-1.0, 1.0, (m, r))
    right = rng.uniform(-1.0, 1.0, (r, n))
    return np.asfortranarray(left @ right)


def gen_locally_low_rank(block_rows: Sequence[int], block_ranks: Sequence[int], n: int, seed: int) -> np.ndarray:
    """Stack row blocks that are each exactly low rank but independent of one
    another, so the whole matrix has rank about ``sum(block_ranks)``."""
    if len(block_rows) != len(block_ranks):
        raise ValueError("block_rows and block_ranks differ in length")
    if any(r > n for r in block_ranks):
        raise ValueError("a block rank exceeds n")
    rng = rng_for(seed)
    blocks = []
    for rows, r in zip(block_rows, block_ranks):
        if r == 0:
            blocks.append(np.zeros((rows, n)))
        else:
            blocks.append(rng.uniform(-1.0, 1.0, (rows, r)) @ rng.uniform(-1.0, 1.0, (r, n)))
    return np.asfortranarray(np.vstack(blocks))


def even_split(total: int, parts: int) -> list:
    """Sizes of ``parts`` contiguous pieces; the last absorbs the remainder."""
    base = total // parts
    return [base] * (parts - 1) + [total - base * (parts - 1)]


def gen_decaying_spectrum(m: int, n: int, decay: float, seed: int) -> np.ndarray:
    """``U diag(decay**i) V^T`` with seeded random orthonormal factors."""
    rng = rng_for(seed)
    r = min(m, n)
    u, _ = np.linalg.qr(rng.standard_normal((m, r)))
    v, _ = np.linalg.qr(rng.standard_normal((n, r)))
    sigma = decay ** np.arange(r)
    return np.asfortranarray((u * sigma) @ v.T)


def gen_smooth_field(geom: GridGeom, n: int, seed: int, modes: int = 8, max_wavenumber: int = 2) -> np.ndarray:
    """Sum of ``modes`` low-wavenumber products of cosines over the grid's
    bounding box, each with its own random temporal coefficient sequence."""
    rng = rng_for(seed)
    xyz = geom.coordinates()
    lo, hi = xyz.min(axis=0), xyz.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    unit = (xyz - lo) / span
    space = np.empty((xyz.shape[0], modes))
    for j in range(modes):
        waves = rng.integers(0, max_wavenumber + 1, size=xyz.shape[1])
        phase = rng.uniform(0.0, TWO_PI, size=xyz.shape[1])
        space[:, j] = np.prod(np.cos(math.pi * waves * unit + phase), axis=1)
    time = rng.standard_normal((modes, n)) * (0.7 ** np.arange(modes))[:, None]
    return np.asfortranarray(space @ time)


def vortex_box(dims, spacing: float = math.pi / 32) -> GridGeom:
    """Non-periodic sub-box of the ``[0, 2 pi)^3`` vortex domain with the
    given spacing (the default matches a 64^3 periodic grid)."""
    dims = tuple(int(d) for d in dims)
    return GridGeom.structured(dims, [False] * len(dims), [spacing] * len(dims))


def vortex_field(geom: GridGeom, n: int, dt: float = 0.01, decay: float = 1.0) -> np.ndarray:
    """Rank-1 decaying 3-D vortex velocity ``sin x cos y cos z exp(-decay t)``."""
    xyz = geom.coordinates()
    profile = np.sin(xyz[:, 0]) * np.cos(xyz[:, 1]) * np.cos(xyz[:, 2])
    t = dt * np.arange(1, n + 1)
    return np.asfortranarray(np.outer(profile, np.exp(-decay * t)))


def gen_unstructured_grid(m: int, seed: int, domain=((0.0, TWO_PI), (0.0, TWO_PI))) -> GridGeom:
    """``m`` seeded uniform points in an axis-aligned box ``[lo, hi)`` per axis."""
    if m < 1:
        raise ValueError("m must be >= 1")
    rng = rng_for(seed)
    lo = np.array([d[0] for d in domain], dtype=np.float64)
    hi = np.array([d[1] for d in domain], dtype=np.float64)
    pts = lo + (hi - lo) * rng.random((m, len(domain)))
    return GridGeom.unstructured(pts)
