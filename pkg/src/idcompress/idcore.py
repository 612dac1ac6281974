"""Column interpolative decompositions: plain ID, subsampled ID (SubID) and
single-pass ID (SPID), plus reconstruction."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Union

import numpy as np

from .errors import DimensionMismatch, EmptySketch, NonFiniteInput
from .grid import InterpOperator, SubsampleSpec, apply_interpolator, build_interpolator, subsample
from .linalg import RankRule, as_matrix, mgsqr, solve_upper_triangular

log = logging.getLogger(__name__)

# Called as observer(factors, source_matrix) after every column_id; used by
# the test suite to audit every ID it produces.
_observers: list[Callable] = []


def add_id_observer(fn: Callable) -> None:
    _observers.append(fn)


def remove_id_observer(fn: Callable) -> None:
    _observers.remove(fn)


@dataclass(frozen=True, eq=False)
class IdFactors:
    """``A ~= skeleton @ coeffs`` with ``skeleton = A[:, skeleton_indices]``.

    Indices stay in pivot-selection order so that ``coeffs[:, skeleton_indices]``
    is exactly the identity.
    """

    skeleton_indices: np.ndarray
    coeffs: np.ndarray
    skeleton: np.ndarray
    source_cols: int

    @property
    def achieved_rank(self) -> int:
        return int(self.skeleton_indices.size)

    @property
    def shape(self) -> tuple:
        return (self.skeleton.shape[0], self.source_cols)

    @classmethod
    def empty(cls, m: int, n: int) -> "IdFactors":
        """Rank-0 factors of an all-zero m x n block."""
        return cls(
            np.zeros(0, dtype=np.int64), np.zeros((0, n), order="F"), np.zeros((m, 0), order="F"), n
        )


@dataclass(frozen=True, eq=False)
class SpidFactors:
    base: IdFactors
    interp: InterpOperator

    def __post_init__(self):
        if self.base.skeleton.shape[0] != self.interp.shape[1]:
            raise DimensionMismatch("coarse skeleton rows do not match the interpolation operator")

    @property
    def achieved_rank(self) -> int:
        return self.base.achieved_rank


def coefficients_from_qr(qr, n: int) -> np.ndarray:
    """``C = [I_k | R11^-1 R12] Z^T`` laid out in original column order."""
    k = qr.rank
    r11 = qr.r_mat[:, :k]
    r12 = qr.r_mat[:, k:]
    coeffs = np.zeros((k, n), order="F")
    coeffs[:, qr.pivots[:k]] = np.eye(k)
    if n > k:
        coeffs[:, qr.pivots[k:]] = solve_upper_triangular(r11, r12)
    return coeffs


def column_id(a, rule: RankRule, *, allow_deficient: bool = False) -> IdFactors:
    """Column ID ``A ~= A[:, I] @ C`` from a pivoted MGS QR of ``a``."""
    a = as_matrix(a)
    qr = mgsqr(a, rule, allow_deficient=allow_deficient)
    idx = qr.skeleton_indices.copy()
    factors = IdFactors(idx, coefficients_from_qr(qr, a.shape[1]), np.asfortranarray(a[:, idx]), a.shape[1])
    for fn in _observers:
        fn(factors, a)
    return factors


def sub_id(a, spec: SubsampleSpec, rule: RankRule) -> IdFactors:
    """SubID: indices and coefficients from the sketch ``A[J, :]``, skeleton
    read back from the full matrix (the second pass)."""
    a = as_matrix(a)
    b = subsample(a, spec)
    if b.shape[0] == 0:
        raise EmptySketch("subsample spec selects no rows")
    f = column_id(b, rule)
    return IdFactors(f.skeleton_indices, f.coeffs, np.asfortranarray(a[:, f.skeleton_indices]), a.shape[1])


def _iter_columns(source) -> Iterable[np.ndarray]:
    if isinstance(source, np.ndarray):
        if source.ndim != 2:
            raise DimensionMismatch("matrix source must be 2-D")
        for j in range(source.shape[1]):
            yield source[:, j]
    else:
        yield from source


def spid(
    source: Union[np.ndarray, Iterable[np.ndarray]],
    spec: SubsampleSpec,
    rule: RankRule,
    interp: Optional[InterpOperator] = None,
) -> SpidFactors:
    """Single-pass ID ``A ~= M @ B[:, I] @ C``.

    ``source`` is a matrix or any iterable of snapshot columns. Each column is
    subsampled as soon as it arrives; only the coarse sketch is kept.
    Unstructured grids need an explicit ``interp``.
    """
    if interp is None:
        interp = build_interpolator(spec)
    rows = spec.rows
    m = spec.geom.m
    cols = []
    for col in _iter_columns(source):
        col = np.asarray(col, dtype=np.float64).ravel()
        if col.size != m:
            raise DimensionMismatch(f"snapshot has {col.size} values, grid has {m}")
        coarse = col[rows]
        if not np.isfinite(coarse).all():
            raise NonFiniteInput("snapshot contains NaN or infinite entries")
        cols.append(coarse)
    if not cols:
        raise EmptySketch("no snapshots supplied")
    b = np.asfortranarray(np.column_stack(cols))
    return SpidFactors(column_id(b, rule), interp)


def reconstruct(factors: Union[IdFactors, SpidFactors]) -> np.ndarray:
    if isinstance(factors, SpidFactors):
        skel = apply_interpolator(factors.interp, factors.base.skeleton)
        coeffs = factors.base.coeffs
    else:
        skel, coeffs = factors.skeleton, factors.coeffs
    if skel.shape[1] != coeffs.shape[0]:
        raise DimensionMismatch(f"skeleton has {skel.shape[1]} columns, coefficients have {coeffs.shape[0]} rows")
    return np.asfortranarray(skel @ coeffs)


def check_spectral_bound(a, factors: IdFactors) -> bool:
    """Diagnostic: ``||A - A[:,I] C||_2 <= sqrt(1 + k(n-k)) sigma_{k+1}(A)``.

    Pivoted MGS does not guarantee this, so a failure is logged, not raised.
    """
    from .linalg import spectral_norm, sym_eigvals

    a = as_matrix(a)
    k, n = factors.achieved_rank, a.shape[1]
    gram = a.T @ a if n <= a.shape[0] else a @ a.T
    eig = np.clip(sym_eigvals(gram), 0.0, None)
    sigma_next = math.sqrt(eig[k]) if k < eig.size else 0.0
    err = spectral_norm(a - reconstruct(factors))
    bound = math.sqrt(1 + k * (n - k)) * sigma_next
    ok = err <= bound * (1 + 1e-8) + 1e-14 * math.sqrt(eig[0])
    if not ok:
        log.warning("spectral ID bound exceeded: error %.3e > bound %.3e (k=%d)", err, bound, k)
    return ok
