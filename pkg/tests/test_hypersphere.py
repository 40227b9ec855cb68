import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from promptproj import (
    DataError,
    DegenerateDirectionError,
    EmbeddingSet,
    TransformMatrix,
    cosine_similarity,
    normalize,
    project,
    reconstruct,
    spherical_distance,
    transform_images,
)
from conftest import unit_rows

COORD_U = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])


def finite_vectors(max_dim=6):
    return arrays(
        dtype=np.float64,
        shape=st.integers(1, max_dim),
        elements=st.floats(min_value=-1e6, max_value=1e6, allow_nan=False),
    ).filter(lambda v: np.linalg.norm(v) > 1e-6)


class TestNormalize:
    def test_three_four_five(self):
        assert np.allclose(normalize([3.0, 4.0]), [0.6, 0.8], atol=1e-15)

    def test_axis_vector(self):
        assert np.array_equal(normalize([0.0, 0.0, 2.0]), [0.0, 0.0, 1.0])

    def test_zero_vector_rejected(self):
        with pytest.raises(DegenerateDirectionError):
            normalize([0.0, 0.0])

    @settings(max_examples=200, deadline=None)
    @given(v=finite_vectors())
    def test_unit_norm_property(self, v):
        assert abs(np.linalg.norm(normalize(v)) - 1.0) <= 1e-12


class TestProjectReconstruct:
    def test_coordinate_projection(self):
        out = project([0.6, 0.0, 0.8], COORD_U)
        assert np.allclose(out, [1.0, 0.0], atol=1e-15)

    def test_identity_projection(self):
        v = normalize([1.0, 2.0, -3.0])
        assert np.allclose(project(v, np.eye(3)), v, atol=1e-15)

    def test_kernel_input_rejected(self):
        with pytest.raises(DegenerateDirectionError, match="kernel"):
            project([0.0, 0.0, 1.0], COORD_U)

    def test_reconstruct_orthonormal_columns(self):
        out = reconstruct([1.0, 0.0], COORD_U)
        assert np.allclose(out, [1.0, 0.0, 0.0], atol=1e-15)

    def test_reconstruct_identity(self):
        v = normalize([0.5, -0.5])
        assert np.allclose(reconstruct(v, np.eye(2)), v, atol=1e-15)

    def test_reconstruct_ones_column(self):
        # U = [[1], [1]], t' = [1]: t' U^T = [1, 1], normalized by hand.
        out = reconstruct([1.0], np.array([[1.0], [1.0]]))
        assert np.allclose(out, [math.sqrt(2) / 2, math.sqrt(2) / 2], atol=1e-15)

    def test_project_reconstruct_in_span_is_identity(self):
        rng = np.random.default_rng(7)
        basis = np.linalg.qr(rng.normal(size=(10, 4)))[0]
        v = normalize(basis @ rng.normal(size=4))
        back = reconstruct(project(v, basis), basis)
        assert np.allclose(back, v, atol=1e-9)

    def test_dim_mismatch(self):
        with pytest.raises(DataError):
            project([1.0, 0.0], COORD_U)


class TestDistances:
    def test_identical(self):
        e1 = [1.0, 0.0, 0.0]
        assert spherical_distance(e1, e1) == 0.0

    def test_orthogonal(self):
        assert spherical_distance([1.0, 0.0], [0.0, 1.0]) == pytest.approx(
            math.pi / 2, abs=1e-15
        )

    def test_antipodal(self):
        assert spherical_distance([1.0, 0.0], [-1.0, 0.0]) == pytest.approx(
            math.pi, abs=1e-15
        )

    def test_dim_mismatch(self):
        with pytest.raises(DataError):
            spherical_distance([1.0], [1.0, 0.0])

    def test_clamped_at_near_duplicates(self):
        v = normalize([1.0, 1e-8])
        assert spherical_distance(v, v) >= 0.0

    @settings(max_examples=100, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_symmetry_and_triangle_inequality(self, seed):
        a, b, c = unit_rows(3, 5, seed)
        assert spherical_distance(a, b) == pytest.approx(
            spherical_distance(b, a), abs=1e-12
        )
        assert spherical_distance(a, c) <= (
            spherical_distance(a, b) + spherical_distance(b, c) + 1e-12
        )

    def test_cosine_colinear(self):
        assert cosine_similarity([1.0, 0.0], [2.0, 0.0]) == 1.0

    def test_cosine_orthogonal(self):
        assert cosine_similarity([1.0, 0.0], [0.0, 3.0]) == 0.0

    def test_cosine_45_degrees(self):
        assert cosine_similarity([1.0, 1.0], [1.0, 0.0]) == pytest.approx(
            math.sqrt(2) / 2, abs=1e-12
        )

    def test_cosine_zero_norm_rejected(self):
        with pytest.raises(DegenerateDirectionError):
            cosine_similarity([0.0, 0.0], [1.0, 0.0])


class TestTransformMatrix:
    def test_wide_matrix_rejected(self):
        with pytest.raises(DataError):
            TransformMatrix(values=np.ones((2, 3)), method="pca")

    def test_unknown_method_rejected(self):
        with pytest.raises(DataError, match="method"):
            TransformMatrix(values=np.eye(2), method="mystery")

    def test_nonfinite_rejected(self):
        with pytest.raises(DataError):
            TransformMatrix(values=np.array([[np.nan], [1.0]]), method="pca")

    def test_trace_normalized(self):
        tm = TransformMatrix(
            values=np.eye(2), method="indirect", loss_trace=[(0, 1.5), (1, 0.5)]
        )
        assert tm.loss_trace == ((0, 1.5), (1, 0.5))


class TestTransformImages:
    def test_identity_on_exact_unit_rows(self):
        data = np.array(
            [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]], dtype=np.float32
        )
        eset = EmbeddingSet(data, ids=("a", "b", "c"))
        out = transform_images(eset, np.eye(3))
        assert out == eset

    def test_identity_close_on_random_rows(self):
        eset = EmbeddingSet(unit_rows(5, 8, 3))
        out = transform_images(eset, np.eye(8))
        assert np.allclose(out.data, eset.data, atol=1e-6)

    def test_power_of_two_scale_invariance_is_exact(self):
        rng = np.random.default_rng(0)
        base = EmbeddingSet(rng.normal(size=(6, 5)))
        scaled = EmbeddingSet(base.rows64() * np.array([[2.0], [0.5], [1024.0],
                                                        [0.25], [8.0], [1.0]]))
        U = rng.normal(size=(5, 3))
        U = np.linalg.qr(U)[0]
        assert transform_images(base, U) == transform_images(scaled, U)

    def test_general_scale_invariance_close(self):
        rng = np.random.default_rng(1)
        base = rng.normal(size=(4, 6))
        scales = np.array([[3.7], [0.013], [99.1], [1.0]])
        U = np.linalg.qr(rng.normal(size=(6, 2)))[0]
        out_a = transform_images(EmbeddingSet(base), U)
        out_b = transform_images(EmbeddingSet(base * scales), U)
        assert np.allclose(out_a.data, out_b.data, atol=1e-5)

    def test_coordinate_projection_row(self):
        eset = EmbeddingSet(np.array([[0.6, 0.0, 0.8]]))
        out = transform_images(eset, COORD_U)
        assert np.allclose(out.data, [[1.0, 0.0]], atol=1e-7)

    def test_output_rows_unit_norm(self):
        eset = EmbeddingSet(np.random.default_rng(2).normal(size=(10, 6)))
        out = transform_images(eset, np.linalg.qr(unit_rows(6, 6, 0).T)[0][:, :3])
        norms = np.linalg.norm(out.rows64(), axis=1)
        assert np.allclose(norms, 1.0, atol=1e-6)

    def test_degenerate_row_names_id(self):
        eset = EmbeddingSet(
            np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]), ids=("good", "doomed")
        )
        with pytest.raises(DegenerateDirectionError, match="doomed"):
            transform_images(eset, COORD_U)

    def test_dim_mismatch(self):
        eset = EmbeddingSet(np.eye(2))
        with pytest.raises(DataError):
            transform_images(eset, COORD_U)
