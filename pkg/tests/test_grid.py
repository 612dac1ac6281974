import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from idcompress.datagen import gen_unstructured_grid, rng_for
from idcompress.errors import (
    DimensionMismatch,
    EmptySketch,
    ExtrapolationRequired,
    GeometryMismatch,
    InvalidOperator,
    UnstructuredNoInterp,
)
from idcompress.grid import (
    GridGeom,
    InterpOperator,
    SubsampleSpec,
    apply_interpolator,
    build_interpolator,
    read_triplets,
    subsample,
    write_triplets,
)


@st.composite
def strided_specs(draw):
    nd = draw(st.integers(1, 3))
    dims = draw(st.lists(st.integers(2, 9), min_size=nd, max_size=nd))
    periodic = draw(st.lists(st.booleans(), min_size=nd, max_size=nd))
    strides = draw(st.lists(st.integers(1, 4), min_size=nd, max_size=nd))
    return SubsampleSpec(GridGeom.structured(dims, periodic), tuple(strides), include_boundary=True)


def test_stride_one_is_identity():
    geom = GridGeom.structured([4, 5])
    a = np.arange(40.0).reshape(20, 2)
    spec = SubsampleSpec(geom, (1, 1))
    np.testing.assert_array_equal(subsample(a, spec), a)
    op = build_interpolator(spec)
    np.testing.assert_array_equal(op.to_dense(), np.eye(20))


def test_forty_eight_points_stride_five():
    spec = SubsampleSpec(GridGeom.structured([48]), (5,), include_boundary=False)
    assert spec.rows.tolist() == list(range(0, 46, 5))
    assert spec.m_c == 10


def test_two_d_stride_three_with_boundary():
    spec = SubsampleSpec(GridGeom.structured([7, 7]), (3,))
    assert [ax.tolist() for ax in spec.axis_indices()] == [[0, 3, 6], [0, 3, 6]]
    assert spec.m_c == 9
    assert spec.rows.tolist() == [0, 3, 6, 21, 24, 27, 42, 45, 48]


def test_boundary_index_appended():
    spec = SubsampleSpec(GridGeom.structured([10]), (4,))
    assert spec.rows.tolist() == [0, 4, 8, 9]
    periodic = SubsampleSpec(GridGeom.structured([10], [True]), (4,))
    assert periodic.rows.tolist() == [0, 4, 8]


def test_linear_weights():
    spec = SubsampleSpec(GridGeom.structured([5]), (2,))
    dense = build_interpolator(spec).to_dense()
    np.testing.assert_array_equal(dense[1], [0.5, 0.5, 0.0])
    np.testing.assert_array_equal(dense[4], [0.0, 0.0, 1.0])


def test_periodic_wrap_weights():
    spec = SubsampleSpec(GridGeom.structured([6], [True]), (2,))
    dense = build_interpolator(spec).to_dense()
    assert spec.rows.tolist() == [0, 2, 4]
    np.testing.assert_array_equal(dense[5], [0.5, 0.0, 0.5])


def test_extrapolation_rejected():
    spec = SubsampleSpec(GridGeom.structured([10]), (4,), include_boundary=False)
    with pytest.raises(ExtrapolationRequired):
        build_interpolator(spec)


def test_unstructured_has_no_multilinear_operator():
    spec = SubsampleSpec(gen_unstructured_grid(30, seed=1), (3,))
    assert spec.m_c == 10
    with pytest.raises(UnstructuredNoInterp):
        build_interpolator(spec)


def test_bilinear_weights_frozen():
    # fine point (1, 1) of a 3x3 grid at stride 2 sits mid-cell: a quarter on each corner
    spec = SubsampleSpec(GridGeom.structured([3, 3]), (2,))
    op = build_interpolator(spec)
    assert op.stencil_size == 4
    np.testing.assert_array_equal(op.to_dense()[4], [0.25, 0.25, 0.25, 0.25])


def test_ramp_recovered():
    geom = GridGeom.structured([9])
    ramp = np.arange(9.0)
    spec = SubsampleSpec(geom, (2,))
    np.testing.assert_allclose(apply_interpolator(build_interpolator(spec), ramp[spec.rows]), ramp, atol=1e-12)


@given(strided_specs())
def test_operator_invariants(spec):
    op = build_interpolator(spec)
    dense = op.to_dense()
    m, mc = dense.shape
    assert (m, mc) == (spec.geom.m, spec.m_c)
    assert dense.min() >= 0.0
    np.testing.assert_allclose(dense.sum(axis=1), 1.0, atol=1e-12)
    assert (dense > 0).sum(axis=1).max() <= op.stencil_size == 2 ** spec.geom.ndim
    # sample reproduction: coarse rows carry a single unit weight
    np.testing.assert_array_equal(dense[spec.rows], np.eye(mc))
    coarse = rng_for(0).standard_normal((mc, 3))
    np.testing.assert_array_equal(subsample(apply_interpolator(op, coarse), spec), coarse)


@given(strided_specs())
def test_linear_reproduction_on_open_axes(spec):
    op = build_interpolator(spec)
    xyz = spec.geom.coordinates()
    for axis, per in enumerate(spec.geom.periodic):
        if per:
            continue
        col = xyz[:, axis]
        np.testing.assert_allclose(apply_interpolator(op, col[spec.rows]), col, atol=1e-12)


def test_multilinear_field_exact():
    geom = GridGeom.structured([7, 8, 5], spacing=[0.3, 0.2, 0.5])
    x, y, z = geom.coordinates().T
    f = 1 + 2 * x - y + 3 * x * y * z - z
    spec = SubsampleSpec(geom, (3, 2, 2))
    got = apply_interpolator(build_interpolator(spec), f[spec.rows])
    np.testing.assert_allclose(got, f, rtol=1e-12, atol=1e-12)


def test_geometry_validation():
    with pytest.raises(GeometryMismatch):
        GridGeom.structured([1, 4])
    with pytest.raises(GeometryMismatch):
        GridGeom.structured([2, 2, 2, 2])
    with pytest.raises(GeometryMismatch):
        SubsampleSpec(GridGeom.structured([4, 4]), (1, 2, 3))
    with pytest.raises(GeometryMismatch):
        subsample(np.ones((5, 2)), SubsampleSpec(GridGeom.structured([4]), (1,)))
    with pytest.raises(EmptySketch):
        SubsampleSpec(GridGeom.structured([4]), indices=[])


def test_geometry_round_trip():
    geom = GridGeom.structured([3, 4], [True, False], [0.5, 2.0], [1.0, -1.0])
    assert GridGeom.from_dict(geom.to_dict()) == geom
    pts = gen_unstructured_grid(12, seed=4)
    assert GridGeom.from_dict(pts.to_dict()) == pts
    spec = SubsampleSpec(geom, (2, 3), include_boundary=False)
    back = SubsampleSpec.from_dict(geom, spec.to_dict())
    assert back.rows.tolist() == spec.rows.tolist()


def test_coordinates_last_axis_fastest():
    xyz = GridGeom.structured([2, 3]).coordinates()
    assert xyz[:4].tolist() == [[0, 0], [0, 1], [0, 2], [1, 0]]


def test_apply_dimension_check():
    op = build_interpolator(SubsampleSpec(GridGeom.structured([5]), (2,)))
    with pytest.raises(DimensionMismatch):
        apply_interpolator(op, np.ones((4, 1)))


def test_triplet_round_trip(tmp_path):
    op = build_interpolator(SubsampleSpec(GridGeom.structured([7, 4]), (3, 2)))
    path = tmp_path / "m.txt"
    write_triplets(op, path)
    back = read_triplets(path, *op.shape)
    assert back.form == "explicit"
    np.testing.assert_array_equal(back.to_dense(), op.to_dense())


def test_explicit_operator_validation():
    with pytest.raises(InvalidOperator):
        InterpOperator.from_triplets([[0, 0, 0.7], [0, 1, 0.2]], 1, 2)
    with pytest.raises(InvalidOperator):
        InterpOperator.from_triplets([[0, 0, 1.5], [0, 1, -0.5]], 1, 2)
    with pytest.raises(InvalidOperator):
        InterpOperator.from_triplets([[0, 3, 1.0]], 1, 2)
