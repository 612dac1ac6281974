"""Dense kernels: pivoted modified Gram-Schmidt QR, triangular solves, norms,
and a cyclic Jacobi eigensolver used as a verification oracle.

Matrices are plain ``numpy.ndarray`` objects of dtype float64. Kernels copy
their inputs into Fortran (column-major) order before touching them so the
floating-point operation order depends only on the input values, never on
the caller's memory layout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from numba import njit

from .errors import (
    DimensionMismatch,
    NonFiniteInput,
    NotSquare,
    NotSymmetric,
    RankUnreachable,
    SingularPivot,
    ZeroMatrix,
)

# column norm below which a matrix counts as identically zero
ZERO_NORM = 1e-300
# residual collapse threshold, relative to the largest initial column norm
COLLAPSE_RTOL = 1e-14
# |diag| threshold for back-substitution, relative to the largest |diag|
SINGULAR_RTOL = 1e-14


def as_matrix(a, *, allow_empty: bool = False) -> np.ndarray:
    """Validate ``a`` as a finite 2-D float64 matrix and return a column-major copy."""
    arr = np.array(a, dtype=np.float64, order="F", copy=True)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1, order="F")
    if arr.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got shape {arr.shape}")
    if not allow_empty and (arr.shape[0] < 1 or arr.shape[1] < 1):
        raise DimensionMismatch(f"matrix must have at least one row and column, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise NonFiniteInput("matrix contains NaN or infinite entries")
    return arr


@dataclass(frozen=True)
class FixedRank:
    k: int

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"FixedRank needs an integer k >= 1, got {self.k!r}")


@dataclass(frozen=True)
class Tolerance:
    tol: float

    def __post_init__(self):
        if not (0.0 < self.tol < 1.0):
            raise ValueError(f"Tolerance needs 0 < tol < 1, got {self.tol!r}")


RankRule = Union[FixedRank, Tolerance]


@dataclass(frozen=True)
class QrFactorization:
    """Output of :func:`mgsqr`.

    ``r_mat`` is ``rank x n`` in pivoted column order, so its leading
    ``rank x rank`` block is upper triangular. ``residual`` holds the
    orthogonalized remainder of the unselected columns (``m x (n - rank)``,
    in the order of ``pivots[rank:]``); its norms equal those of the trailing
    triangular block a full factorization would produce.
    """

    q: np.ndarray
    r_mat: np.ndarray
    pivots: np.ndarray
    rank: int
    residual: np.ndarray
    pivot_norms: np.ndarray

    @property
    def skeleton_indices(self) -> np.ndarray:
        return self.pivots[: self.rank]


def mgsqr(a, rule: RankRule, *, allow_deficient: bool = False) -> QrFactorization:
    """Greedy column-pivoted modified Gram-Schmidt QR.

    Each step picks the unprocessed column with the largest residual 2-norm
    (lowest original index on ties) and removes its direction from every
    remaining column, with one re-orthogonalization pass. ``FixedRank(k)``
    stops after ``k`` steps; ``Tolerance(tol)`` stops once the largest
    residual column norm is at most ``tol`` times the largest initial column
    norm.

    With ``allow_deficient`` a fixed-rank request that exceeds the numerical
    rank stops early instead of raising :class:`RankUnreachable`.
    """
    w = as_matrix(a)
    m, n = w.shape
    norms0 = np.sqrt(np.einsum("ij,ij->j", w, w))
    scale = float(norms0.max())
    if scale < ZERO_NORM:
        raise ZeroMatrix("all columns have (numerically) zero norm")

    kmax = min(m, n)
    if isinstance(rule, FixedRank):
        if rule.k > kmax:
            raise RankUnreachable(f"rank {rule.k} exceeds min(m, n) = {kmax}")
        steps = rule.k
        stop_norm = -1.0
    elif isinstance(rule, Tolerance):
        steps = kmax
        stop_norm = rule.tol * scale
    else:
        raise TypeError(f"unknown rank rule {rule!r}")

    q = np.zeros((m, steps), order="F")
    r = np.zeros((steps, n), order="F")
    active = np.ones(n, dtype=bool)
    selected: list[int] = []
    pivot_norms: list[float] = []
    collapse = COLLAPSE_RTOL * scale

    for j in range(steps):
        norms = np.full(n, -np.inf)
        idx = np.flatnonzero(active)
        sub = w[:, idx]
        norms[idx] = np.sqrt(np.einsum("ij,ij->j", sub, sub))
        p = int(np.argmax(norms))  # first maximum == lowest original index
        best = float(norms[p])
        if best <= stop_norm:
            break
        if best < collapse:
            if stop_norm < 0 and not allow_deficient:
                raise RankUnreachable(
                    f"residual collapsed after {j} steps; numerical rank < {steps}"
                )
            break

        v = w[:, p].copy()
        if j:
            # re-orthogonalize the pivot against the accepted basis
            corr = q[:, :j].T @ v
            v -= q[:, :j] @ corr
            r[:j, p] += corr
        rho = float(np.linalg.norm(v))
        qj = v / rho
        q[:, j] = qj
        r[j, p] = rho
        active[p] = False
        selected.append(p)
        pivot_norms.append(best)

        rest = np.flatnonzero(active)
        if rest.size:
            block = w[:, rest]
            c1 = qj @ block
            block -= np.outer(qj, c1)
            c2 = qj @ block
            block -= np.outer(qj, c2)
            w[:, rest] = block
            r[j, rest] = c1 + c2

    rank = len(selected)
    rest = np.flatnonzero(active)
    pivots = np.concatenate([np.asarray(selected, dtype=np.int64), rest.astype(np.int64)])
    return QrFactorization(
        q=np.asfortranarray(q[:, :rank]),
        r_mat=np.asfortranarray(r[:rank][:, pivots]),
        pivots=pivots,
        rank=rank,
        residual=np.asfortranarray(w[:, rest]),
        pivot_norms=np.asarray(pivot_norms),
    )


def solve_upper_triangular(r11, rhs) -> np.ndarray:
    """Back-substitution for ``r11 @ x = rhs`` with ``r11`` upper triangular."""
    r11 = np.asarray(r11, dtype=np.float64)
    rhs = np.asarray(rhs, dtype=np.float64)
    vector = rhs.ndim == 1
    if vector:
        rhs = rhs.reshape(-1, 1)
    k = r11.shape[0]
    if r11.ndim != 2 or r11.shape[1] != k:
        raise NotSquare(f"r11 must be square, got {r11.shape}")
    if rhs.shape[0] != k:
        raise DimensionMismatch(f"rhs has {rhs.shape[0]} rows, expected {k}")
    diag = np.abs(np.diag(r11))
    if k and (diag.max() == 0.0 or diag.min() < SINGULAR_RTOL * diag.max()):
        raise SingularPivot("triangular factor has a (near-)zero diagonal entry")

    x = np.zeros(rhs.shape, order="F")
    for i in range(k - 1, -1, -1):
        acc = rhs[i] - r11[i, i + 1 :] @ x[i + 1 :]
        x[i] = acc / r11[i, i]
    return x.ravel() if vector else x


@njit(cache=True)
def _jacobi_eigen(s, rtol, max_sweeps):
    a = s.copy()
    n = a.shape[0]
    vecs = np.eye(n)
    fro = math.sqrt(np.sum(a * a))
    for _ in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(n):
                if i != j:
                    off += a[i, j] * a[i, j]
        if math.sqrt(off) <= rtol * fro:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                sn = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - sn * akq
                    a[k, q] = sn * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - sn * aqk
                    a[q, k] = sn * apk + c * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    vkp = vecs[k, p]
                    vkq = vecs[k, q]
                    vecs[k, p] = c * vkp - sn * vkq
                    vecs[k, q] = sn * vkp + c * vkq
    return np.diag(a).copy(), vecs


def _checked_symmetric(s) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise NotSquare(f"expected a square matrix, got shape {s.shape}")
    if not np.isfinite(s).all():
        raise NonFiniteInput("matrix contains NaN or infinite entries")
    fro = np.linalg.norm(s)
    if np.linalg.norm(s - s.T) > 1e-10 * fro:
        raise NotSymmetric("matrix asymmetry exceeds 1e-10 relative")
    return np.ascontiguousarray(0.5 * (s + s.T))


def sym_eigh(s, *, rtol: float = 1e-12, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and matching unit eigenvectors by cyclic Jacobi."""
    vals, vecs = _jacobi_eigen(_checked_symmetric(s), rtol, max_sweeps)
    order = np.argsort(-vals, kind="stable")
    return vals[order], vecs[:, order]


def sym_eigvals(s, *, rtol: float = 1e-12, max_sweeps: int = 100) -> np.ndarray:
    """All eigenvalues of a symmetric matrix by cyclic Jacobi, descending."""
    return sym_eigh(s, rtol=rtol, max_sweeps=max_sweeps)[0]


def sym_eig_max(s) -> float:
    """Largest eigenvalue of a symmetric matrix (cyclic Jacobi)."""
    return float(sym_eigvals(s)[0])


def spectral_norm(a) -> float:
    a = np.asarray(a, dtype=np.float64)
    if a.size == 0:
        return 0.0
    gram = a.T @ a if a.shape[1] <= a.shape[0] else a @ a.T
    return math.sqrt(max(sym_eig_max(gram), 0.0))


def norms(a) -> dict:
    """Frobenius and spectral norms; the spectral norm goes through the
    smaller Gram matrix and the Jacobi solver."""
    a = np.asarray(a, dtype=np.float64)
    return {"frobenius": float(np.sqrt(np.sum(a * a))), "spectral": spectral_norm(a)}
