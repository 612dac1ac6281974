import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from idcompress.datagen import (
    TaylorGreenParams,
    gen_exact_rank,
    gen_unstructured_grid,
    rng_for,
    taylor_green_matrix,
)
from idcompress.errors import DimensionMismatch, UnstructuredNoInterp
from idcompress.grid import GridGeom, SubsampleSpec
from idcompress.idcore import IdFactors, check_spectral_bound, column_id, reconstruct, spid, sub_id
from idcompress.linalg import FixedRank, Tolerance, mgsqr, sym_eigvals
from idcompress.metrics import rel_frob_error

seeds = st.integers(0, 2**32 - 1)


def test_duplicate_columns():
    u = np.array([1.0, -2.0, 3.0])
    f = column_id(np.column_stack([u, u]), FixedRank(1))
    assert f.skeleton_indices.tolist() == [0]
    np.testing.assert_array_equal(f.coeffs, [[1.0, 1.0]])
    np.testing.assert_array_equal(reconstruct(f), np.column_stack([u, u]))


def test_exact_rank_three():
    a = gen_exact_rank(8, 6, 3, seed=11)
    f = column_id(a, Tolerance(1e-10))
    assert f.achieved_rank == 3
    assert rel_frob_error(a, reconstruct(f)) <= 1e-9
    # cross-check: best rank-3 residual from the Gram eigenvalues is ~0
    sv = np.sqrt(np.clip(sym_eigvals(a.T @ a), 0.0, None))
    assert sv[2] > 1e-3 * sv[0]
    assert sv[3] <= 1e-7 * sv[0]


@given(st.integers(1, 10), st.integers(1, 10), seeds)
def test_full_rank_is_exact(m, n, seed):
    a = rng_for(seed).standard_normal((m, n))
    f = column_id(a, FixedRank(min(m, n)))
    assert np.linalg.norm(a - reconstruct(f)) <= 1e-10 * np.linalg.norm(a)


@given(st.integers(2, 12), st.integers(2, 12), seeds)
def test_identity_block_and_residual(m, n, seed):
    a = rng_for(seed).standard_normal((m, n))
    k = max(1, min(m, n) - 1)
    qr = mgsqr(a, FixedRank(k))
    f = column_id(a, FixedRank(k))
    np.testing.assert_array_equal(f.coeffs[:, f.skeleton_indices], np.eye(k))
    assert len(set(f.skeleton_indices.tolist())) == k
    err = np.linalg.norm(a - reconstruct(f))
    assert err == pytest.approx(np.linalg.norm(qr.residual), rel=1e-10, abs=1e-14 * np.linalg.norm(a))


@given(st.integers(1, 4), seeds)
def test_idempotence(k, seed):
    f = column_id(rng_for(seed).standard_normal((10, 8)), FixedRank(k))
    a2 = reconstruct(f)
    g = column_id(a2, FixedRank(k))
    assert np.linalg.norm(a2 - reconstruct(g)) <= 1e-10 * np.linalg.norm(a2)


def test_reconstruct_examples():
    f = column_id(np.eye(2), FixedRank(2))
    np.testing.assert_array_equal(reconstruct(f), np.eye(2))
    u = np.array([[1.0], [2.0]])
    g = IdFactors(np.array([0]), np.array([[1.0, 2.0, 3.0]]), u, 3)
    np.testing.assert_array_equal(reconstruct(g), np.hstack([u, 2 * u, 3 * u]))
    bad = IdFactors(np.array([0]), np.ones((2, 3)), u, 3)
    with pytest.raises(DimensionMismatch):
        reconstruct(bad)


def test_sub_id_all_rows_matches_column_id():
    a = rng_for(5).standard_normal((12, 7))
    spec = SubsampleSpec(GridGeom.structured([3, 4]), (1, 1))
    f, g = sub_id(a, spec, FixedRank(4)), column_id(a, FixedRank(4))
    assert f.skeleton_indices.tobytes() == g.skeleton_indices.tobytes()
    assert f.coeffs.tobytes() == g.coeffs.tobytes()


@given(st.integers(1, 5), seeds)
def test_sub_id_rank_one_exact(stride, seed):
    rng = rng_for(seed)
    u = rng.uniform(0.5, 2.0, 30) * rng.choice([-1.0, 1.0], 30)
    a = np.outer(u, rng.standard_normal(9))
    f = sub_id(a, SubsampleSpec(GridGeom.structured([30]), (stride,)), FixedRank(1))
    assert np.linalg.norm(a - reconstruct(f)) <= 1e-10 * np.linalg.norm(a)


def test_sub_id_taylor_green():
    a = taylor_green_matrix(TaylorGreenParams())
    spec = SubsampleSpec(TaylorGreenParams().grid, (2, 2))
    f = sub_id(a, spec, FixedRank(1))
    assert f.skeleton.shape == (400, 1)
    assert rel_frob_error(a, reconstruct(f)) <= 1e-12


def test_spid_stride_one_matches_column_id():
    a = rng_for(8).standard_normal((20, 6))
    spec = SubsampleSpec(GridGeom.structured([4, 5]), (1,))
    s, c = spid(a, spec, FixedRank(3)), column_id(a, FixedRank(3))
    assert s.base.skeleton_indices.tobytes() == c.skeleton_indices.tobytes()
    assert s.base.coeffs.tobytes() == c.coeffs.tobytes()
    np.testing.assert_allclose(reconstruct(s), reconstruct(c), atol=1e-12)


@pytest.mark.parametrize("stride", [2, 3])
def test_spid_multilinear_exact(stride):
    geom = GridGeom.structured([10, 9], spacing=[0.1, 0.3])
    x, y = geom.coordinates().T
    rng = rng_for(stride)
    cols = [c0 + c1 * x + c2 * y + c3 * x * y for c0, c1, c2, c3 in rng.standard_normal((12, 4))]
    a = np.column_stack(cols)
    f = spid(iter(cols), SubsampleSpec(geom, (stride,)), FixedRank(4))
    assert f.base.skeleton.shape[0] < geom.m
    assert rel_frob_error(a, reconstruct(f)) <= 1e-12


def test_spid_needs_structured_grid():
    geom = gen_unstructured_grid(20, seed=0)
    with pytest.raises(UnstructuredNoInterp):
        spid(np.ones((20, 3)), SubsampleSpec(geom, (2,)), FixedRank(1))


def test_spectral_bound_diagnostic():
    a = gen_exact_rank(15, 10, 4, seed=2)
    assert check_spectral_bound(a, column_id(a, FixedRank(2))) in (True, False)
    assert check_spectral_bound(a, column_id(a, FixedRank(4)))
