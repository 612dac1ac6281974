"""Compression factor and relative Frobenius error."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import DimensionMismatch, ZeroDenominator, ZeroReference


def compression_factor(m: int, n: int, stored_entries: int) -> float:
    """``m n / stored_entries``. For a rank-k ID, ``stored_entries = k (m + n)``;
    for SPID with a recipe-stored interpolator it is ``k (m_c + n)``."""
    if stored_entries <= 0:
        raise ZeroDenominator("no stored entries")
    if m <= 0 or n <= 0:
        raise ValueError("m and n must be positive")
    return m * n / stored_entries


def id_stored_entries(k: int, rows: int, n: int) -> int:
    return k * (rows + n)


def rel_frob_error(exact, approx) -> float:
    exact = np.asarray(exact, dtype=np.float64)
    approx = np.asarray(approx, dtype=np.float64)
    if exact.shape != approx.shape:
        raise DimensionMismatch(f"shapes differ: {exact.shape} vs {approx.shape}")
    ref = np.linalg.norm(exact)
    if ref == 0.0:
        raise ZeroReference("reference matrix is zero")
    return float(np.linalg.norm(exact - approx) / ref)


@dataclass(frozen=True)
class QualityReport:
    cf: float
    rel_frob_error: float
    ranks: list
    stored_entries: int

    def to_dict(self) -> dict:
        return asdict(self)


def quality_report(exact, archive) -> QualityReport:
    """Aggregate CF (sum of original entries over sum of stored entries) and
    reconstruction error of an archive against the exact matrix."""
    from .archive import decompress

    exact = np.asarray(exact, dtype=np.float64)
    m, n = exact.shape
    stored = sum(b.stored_entries for b in archive.blocks)
    approx = decompress(archive)
    return QualityReport(
        cf=compression_factor(m, n, stored),
        rel_frob_error=rel_frob_error(exact, approx),
        ranks=archive.ranks,
        stored_entries=int(stored),
    )
