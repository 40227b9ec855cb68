import math
import warnings

import numpy as np
import pytest

from promptproj import (
    ClassPrototypes,
    ConfigError,
    DataError,
    EmbeddingSet,
    IndirectConfig,
    LabelSet,
    fit_indirect,
    fit_oracle,
    map_at_r,
    oracle_loss,
    precision_at_1,
    transform_images,
)
from promptproj.rng import make_rng
from conftest import cluster_instance, unit_rows


def softmax_floor(n_classes: int) -> float:
    """Best achievable loss with unit-norm embeddings and prototypes:
    correct logit 1, wrong logits at the simplex bound -1/(C-1)."""
    wrong = (n_classes - 1) * math.exp(-1.0 / (n_classes - 1))
    return -math.log(math.e / (math.e + wrong))


class TestOracleLoss:
    def test_single_class_exactly_zero(self):
        eset = EmbeddingSet(unit_rows(4, 6, 0), ids=("a", "b", "c", "d"))
        labels = LabelSet(tuple((i, "only") for i in ("a", "b", "c", "d")))
        protos = ClassPrototypes(("only",), unit_rows(1, 3, 1))
        assert oracle_loss(np.eye(6)[:, :3], protos, eset, labels) == 0.0

    def test_two_class_hand_computed(self):
        # One item of class one with logits [1, 0]: loss = -log(e/(e+1)).
        eset = EmbeddingSet(np.array([[1.0, 0.0], [0.0, 1.0]]), ids=("x", "y"))
        labels = LabelSet((("x", "one"), ("y", "two")))
        protos = ClassPrototypes(("one", "two"), np.eye(2))
        loss = oracle_loss(np.eye(2), protos, eset, labels)
        per_item = -math.log(math.e / (math.e + 1.0))
        assert loss == pytest.approx(per_item, abs=1e-12)

    def test_item_order_invariance(self):
        eset, labels = cluster_instance(5, 3, 8, seed=1)
        protos = ClassPrototypes(
            ("class0", "class1", "class2"), unit_rows(3, 4, 2)
        )
        U = make_rng(3).normal(0, 0.1, size=(8, 4))
        base = oracle_loss(U, protos, eset, labels)
        perm = make_rng(4).permutation(eset.count)
        shuffled = EmbeddingSet(
            eset.data[perm], ids=tuple(eset.ids[i] for i in perm)
        )
        assert oracle_loss(U, protos, shuffled, labels) == pytest.approx(
            base, abs=1e-12
        )

    def test_row_rescaling_invariance(self):
        eset, labels = cluster_instance(4, 2, 6, seed=5)
        protos = ClassPrototypes(("class0", "class1"), unit_rows(2, 3, 6))
        U = make_rng(7).normal(0, 0.1, size=(6, 3))
        scales = 2.0 ** make_rng(8).integers(-2, 3, size=(eset.count, 1))
        scaled = EmbeddingSet(eset.rows64() * scales, ids=eset.ids)
        assert oracle_loss(U, protos, scaled, labels) == oracle_loss(
            U, protos, eset, labels
        )

    def test_unknown_label_named(self):
        eset = EmbeddingSet(np.eye(2), ids=("a", "b"))
        labels = LabelSet((("a", "known"), ("b", "mystery")))
        protos = ClassPrototypes(("known",), unit_rows(1, 2, 0))
        with pytest.raises(DataError):
            oracle_loss(np.eye(2), protos, eset, labels)

    def test_prototype_norm_validated(self):
        with pytest.raises(DataError, match="norm"):
            ClassPrototypes(("a",), np.array([[2.0, 0.0]]))


class TestFitOracle:
    def test_separable_clusters_perfect_retrieval(self):
        eset, labels = cluster_instance(20, 2, 16, seed=0, spread=0.05)
        transform, protos, fit = fit_oracle(eset, labels, target_dim=4, seed=0)
        produced = transform_images(eset, transform)
        assert precision_at_1(produced, labels) == 1.0
        assert map_at_r(produced, labels) > 0.99
        assert fit.final_loss < softmax_floor(2) + 0.05

    def test_prototypes_unit_norm_after_fit(self):
        eset, labels = cluster_instance(6, 3, 8, seed=2)
        _, protos, _ = fit_oracle(eset, labels, target_dim=4, seed=1)
        norms = np.linalg.norm(protos.vectors, axis=1)
        assert np.max(np.abs(norms - 1.0)) < 1e-9

    def test_orthogonal_one_item_classes_reach_simplex_floor(self):
        # C = r' = 4 orthogonal inputs; unit-norm logits bound the loss at
        # the simplex packing, not at zero.
        eset = EmbeddingSet(np.eye(8)[:4], ids=("a", "b", "c", "d"))
        labels = LabelSet(tuple((i, f"cls_{i}") for i in ("a", "b", "c", "d")))
        _, _, fit = fit_oracle(eset, labels, target_dim=4, seed=0)
        floor = softmax_floor(4)
        assert fit.final_loss < floor + 0.05
        assert fit.final_loss >= floor - 1e-6

    def test_determinism(self):
        eset, labels = cluster_instance(5, 2, 6, seed=3)
        r1 = fit_oracle(eset, labels, target_dim=3, seed=9)
        r2 = fit_oracle(eset, labels, target_dim=3, seed=9)
        assert np.array_equal(r1[0].values, r2[0].values)
        assert r1[2].loss_trace == r2[2].loss_trace

    def test_class_set_and_provenance(self):
        eset, labels = cluster_instance(4, 3, 6, seed=4)
        transform, protos, _ = fit_oracle(eset, labels, target_dim=3, seed=0)
        assert protos.classes == ("class0", "class1", "class2")
        assert transform.method == "oracle"

    def test_requires_two_items(self):
        eset = EmbeddingSet(np.eye(3)[:1], ids=("solo",))
        labels = LabelSet((("solo", "x"),))
        with pytest.raises(ConfigError):
            fit_oracle(eset, labels, target_dim=2, seed=0)

    def test_oracle_not_far_below_text_free_fit(self):
        # Soft regression check only: the label-supervised bound should not
        # trail the unsupervised fit by much; warn rather than fail.
        eset, labels = cluster_instance(10, 2, 12, seed=6, spread=0.2)
        transform, _, _ = fit_oracle(eset, labels, target_dim=4, seed=0)
        oracle_map = map_at_r(transform_images(eset, transform), labels)
        fit = fit_indirect(eset, IndirectConfig(target_dim=4, seed=0))
        indirect_map = map_at_r(transform_images(eset, fit.transform), labels)
        if oracle_map < indirect_map - 0.05:
            warnings.warn(
                f"label-supervised bound ({oracle_map:.3f}) trails the "
                f"text-free fit ({indirect_map:.3f})",
                stacklevel=1,
            )
