"""Grid geometry, coarse-grid row subsampling and the interpolation operator
that lifts coarse snapshots back onto the fine grid.

Structured grids flatten in C order: the last axis varies fastest, so a
2-D point ``(i0, i1)`` sits at row ``i0 * dims[1] + i1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .errors import (
    DimensionMismatch,
    EmptySketch,
    ExtrapolationRequired,
    GeometryMismatch,
    InvalidOperator,
    UnstructuredNoInterp,
)


@dataclass(frozen=True, eq=False)
class GridGeom:
    kind: str
    dims: tuple = ()
    periodic: tuple = ()
    spacing: tuple = ()
    origin: tuple = ()
    points: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind == "structured":
            if not 1 <= len(self.dims) <= 3:
                raise GeometryMismatch(f"structured grids have 1-3 axes, got {self.dims}")
            if any(d < 1 for d in self.dims):
                raise GeometryMismatch(f"every axis needs at least 1 point, got {self.dims}")
            for name in ("periodic", "spacing", "origin"):
                if len(getattr(self, name)) != len(self.dims):
                    raise GeometryMismatch(f"{name} arity does not match dims")
        elif self.kind == "unstructured":
            if self.points is None or self.points.ndim != 2 or len(self.points) < 1:
                raise GeometryMismatch("unstructured grids need an (m, d) point array")
        else:
            raise GeometryMismatch(f"unknown grid kind {self.kind!r}")

    @classmethod
    def structured(cls, dims, periodic=None, spacing=None, origin=None, min_points: int = 2) -> "GridGeom":
        """Build a structured grid. Sub-blocks of a partition pass
        ``min_points=1``; whole simulation grids need 2 points per axis."""
        dims = tuple(int(d) for d in dims)
        if any(d < min_points for d in dims):
            raise GeometryMismatch(f"every axis needs at least {min_points} points, got {dims}")
        nd = len(dims)
        periodic = tuple(bool(p) for p in (periodic if periodic is not None else [False] * nd))
        spacing = tuple(float(s) for s in (spacing if spacing is not None else [1.0] * nd))
        origin = tuple(float(o) for o in (origin if origin is not None else [0.0] * nd))
        return cls("structured", dims, periodic, spacing, origin)

    @classmethod
    def unstructured(cls, points) -> "GridGeom":
        pts = np.array(points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        return cls("unstructured", points=pts)

    @property
    def is_structured(self) -> bool:
        return self.kind == "structured"

    @property
    def ndim(self) -> int:
        return len(self.dims) if self.is_structured else self.points.shape[1]

    @property
    def m(self) -> int:
        return int(np.prod(self.dims)) if self.is_structured else len(self.points)

    def coordinates(self) -> np.ndarray:
        """Point coordinates, one row per grid point in flattening order."""
        if not self.is_structured:
            return self.points.copy()
        axes = [o + h * np.arange(d) for d, h, o in zip(self.dims, self.spacing, self.origin)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=1)

    def to_dict(self) -> dict:
        if self.is_structured:
            return {
                "kind": "structured",
                "dims": list(self.dims),
                "periodic": list(self.periodic),
                "spacing": list(self.spacing),
                "origin": list(self.origin),
            }
        return {"kind": "unstructured", "points": self.points.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "GridGeom":
        if d["kind"] == "structured":
            return cls.structured(d["dims"], d.get("periodic"), d.get("spacing"), d.get("origin"), min_points=1)
        return cls.unstructured(d["points"])

    def __eq__(self, other):
        return isinstance(other, GridGeom) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(repr(self.to_dict()))


@dataclass(frozen=True, eq=False)
class SubsampleSpec:
    """Which rows of the fine grid form the coarse sketch.

    Structured grids take every ``strides[axis]``-th index per axis; with
    ``include_boundary`` the last index of each non-periodic axis is always
    kept so the coarse set brackets the fine grid. Unstructured grids use a
    single stride over the point order, or an explicit index list.
    """

    geom: GridGeom
    strides: tuple = (1,)
    include_boundary: bool = True
    indices: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        if self.indices is None:
            if any(int(s) < 1 for s in self.strides):
                raise GeometryMismatch(f"strides must be >= 1, got {self.strides}")
            if self.geom.is_structured and len(self.strides) != len(self.geom.dims):
                if len(self.strides) == 1:
                    object.__setattr__(self, "strides", tuple(self.strides) * len(self.geom.dims))
                else:
                    raise GeometryMismatch("stride arity does not match the grid")
            if not self.geom.is_structured and len(self.strides) != 1:
                raise GeometryMismatch("unstructured grids take a single stride")
        else:
            idx = np.asarray(self.indices, dtype=np.int64)
            if idx.size == 0:
                raise EmptySketch("explicit index list is empty")
            if np.any(np.diff(idx) <= 0) or idx[0] < 0 or idx[-1] >= self.geom.m:
                raise GeometryMismatch("explicit indices must be strictly increasing and in range")
            object.__setattr__(self, "indices", idx)

    def axis_indices(self) -> list:
        if not self.geom.is_structured or self.indices is not None:
            raise GeometryMismatch("per-axis coarse indices exist only for strided structured specs")
        out = []
        for d, s, per in zip(self.geom.dims, self.strides, self.geom.periodic):
            idx = np.arange(0, d, int(s), dtype=np.int64)
            if self.include_boundary and not per and idx[-1] != d - 1:
                idx = np.append(idx, d - 1)
            out.append(idx)
        return out

    @property
    def rows(self) -> np.ndarray:
        """The coarse row set J, strictly increasing."""
        if self.indices is not None:
            return self.indices
        if self.geom.is_structured:
            mesh = np.meshgrid(*self.axis_indices(), indexing="ij")
            return np.ravel_multi_index(tuple(g.ravel() for g in mesh), self.geom.dims).astype(np.int64)
        return np.arange(0, self.geom.m, int(self.strides[0]), dtype=np.int64)

    @property
    def m_c(self) -> int:
        return int(self.rows.size)

    def to_dict(self) -> dict:
        d = {"strides": [int(s) for s in self.strides], "include_boundary": self.include_boundary}
        if self.indices is not None:
            d["indices"] = self.indices.tolist()
        return d

    @classmethod
    def from_dict(cls, geom: GridGeom, d: dict) -> "SubsampleSpec":
        return cls(geom, tuple(d["strides"]), d["include_boundary"], d.get("indices"))


def subsample(a, spec: SubsampleSpec) -> np.ndarray:
    """Select rows J of a matrix, or of a single snapshot column."""
    a = np.asarray(a, dtype=np.float64)
    if a.shape[0] != spec.geom.m:
        raise GeometryMismatch(f"expected {spec.geom.m} rows, got {a.shape[0]}")
    rows = spec.rows
    if rows.size == 0:
        raise EmptySketch("subsample spec selects no rows")
    return np.asfortranarray(a[rows])


@dataclass(frozen=True, eq=False)
class InterpOperator:
    """Sparse map from coarse-grid values (``m_c``) to fine-grid values (``m``).

    ``form`` is ``"multilinear"`` when built from a strided spec (archives
    store only the recipe) or ``"explicit"`` for a user supplied operator.
    """

    matrix: sp.csr_matrix
    form: str
    stencil_size: int
    spec: Optional[SubsampleSpec] = None

    @property
    def shape(self) -> tuple:
        return self.matrix.shape

    def to_dense(self) -> np.ndarray:
        return np.asfortranarray(self.matrix.toarray())

    @classmethod
    def from_triplets(cls, triplets, rows: int, cols: int) -> "InterpOperator":
        t = np.asarray(triplets, dtype=np.float64).reshape(-1, 3)
        r, c, w = t[:, 0].astype(np.int64), t[:, 1].astype(np.int64), t[:, 2]
        if r.size and (r.min() < 0 or r.max() >= rows or c.min() < 0 or c.max() >= cols):
            raise InvalidOperator("triplet index out of range")
        mat = sp.csr_matrix((w, (r, c)), shape=(rows, cols))
        mat.sum_duplicates()
        _check_convex(mat)
        nnz = np.diff(mat.indptr)
        return cls(mat, "explicit", int(nnz.max()) if nnz.size else 0)

    def triplets(self) -> np.ndarray:
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return np.column_stack([coo.row[order], coo.col[order], coo.data[order]])


def _check_convex(mat: sp.csr_matrix) -> None:
    if mat.data.size and mat.data.min() < 0:
        raise InvalidOperator("interpolation weights must be nonnegative")
    sums = np.asarray(mat.sum(axis=1)).ravel()
    if np.any(np.abs(sums - 1.0) > 1e-12):
        raise InvalidOperator("interpolation weights must sum to 1 per row")


def _axis_operator(dim: int, coarse: np.ndarray, periodic: bool) -> sp.csr_matrix:
    fine = np.arange(dim)
    lo = np.searchsorted(coarse, fine, side="right") - 1
    exact = coarse[lo] == fine
    hi = lo + 1
    beyond = hi >= coarse.size
    if np.any(beyond & ~exact):
        if not periodic:
            raise ExtrapolationRequired(
                f"fine index {int(fine[beyond & ~exact][0])} lies past the last coarse point"
            )
    hi_pos = np.where(beyond, coarse[0] + dim, coarse[np.minimum(hi, coarse.size - 1)])
    hi = np.where(beyond, 0, hi)
    frac = (fine - coarse[lo]) / (hi_pos - coarse[lo])

    rows = np.concatenate([fine[exact], fine[~exact], fine[~exact]])
    cols = np.concatenate([lo[exact], lo[~exact], hi[~exact]])
    vals = np.concatenate([np.ones(exact.sum()), 1.0 - frac[~exact], frac[~exact]])
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(dim, coarse.size))
    mat.sum_duplicates()
    return mat


def build_interpolator(spec: SubsampleSpec) -> InterpOperator:
    """Tensor-product (bi/tri)linear interpolation from the coarse set of a
    strided structured spec; periodic axes wrap their last cell to index 0."""
    if not spec.geom.is_structured or spec.indices is not None:
        raise UnstructuredNoInterp("multilinear interpolation needs a strided structured grid")
    mat = None
    for d, coarse, per in zip(spec.geom.dims, spec.axis_indices(), spec.geom.periodic):
        axis = _axis_operator(d, coarse, per)
        mat = axis if mat is None else sp.kron(mat, axis, format="csr")
    mat = sp.csr_matrix(mat)
    mat.sum_duplicates()
    mat.sort_indices()
    return InterpOperator(mat, "multilinear", 2 ** len(spec.geom.dims), spec)


def apply_interpolator(op: InterpOperator, coarse) -> np.ndarray:
    coarse = np.asarray(coarse, dtype=np.float64)
    vector = coarse.ndim == 1
    if coarse.shape[0] != op.shape[1]:
        raise DimensionMismatch(f"coarse data has {coarse.shape[0]} rows, operator expects {op.shape[1]}")
    if vector:
        return op.matrix @ coarse
    if coarse.shape[1] == 0:
        return np.zeros((op.shape[0], 0), order="F")
    return np.asfortranarray(op.matrix @ coarse)


def read_triplets(path, rows: int, cols: int) -> InterpOperator:
    """Read ``row col weight`` lines (0-based) into an explicit operator."""
    data = np.loadtxt(Path(path), dtype=np.float64, ndmin=2)
    return InterpOperator.from_triplets(data, rows, cols)


def write_triplets(op: InterpOperator, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r, c, w in op.triplets():
            fh.write(f"{int(r)} {int(c)} {float(w)!r}\n")
