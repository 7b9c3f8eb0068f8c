"""AUC against brute force, macro-F1 against hand counts, openness, reports."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from openset.datastore import LabeledSet
from openset.gradcore import DenseLayer
from openset.metrics import (
    auc,
    confusion_matrix,
    evaluate,
    macro_f1,
    openness,
    roc_points,
)
from openset.network import SplitMlp


def auc_brute_force(known, unknown) -> float:
    """O(n^2) Mann-Whitney enumeration, ties counted one half."""
    wins = 0
    ties = 0
    for k in known:
        for u in unknown:
            if k > u:
                wins += 1
            elif k == u:
                ties += 1
    return (wins + 0.5 * ties) / (len(known) * len(unknown))


def macro_f1_by_hand(preds, labels, num_classes) -> float:
    total = 0.0
    for c in range(num_classes):
        tp = sum(1 for p, l in zip(preds, labels) if p == c and l == c)
        fp = sum(1 for p, l in zip(preds, labels) if p == c and l != c)
        fn = sum(1 for p, l in zip(preds, labels) if p != c and l == c)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        total += 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return total / num_classes


class TestAuc:
    def test_perfect_separation(self):
        assert auc([0.9, 0.8], [0.1, 0.2]) == 1.0

    def test_all_ties_give_half(self):
        assert auc([0.5, 0.5], [0.5, 0.5, 0.5]) == 0.5

    def test_hand_example(self):
        # pairs: (.9,.5)+ (.9,.1)+ (.4,.5)- (.4,.1)+  -> 3/4
        assert auc([0.9, 0.4], [0.5, 0.1]) == 0.75
        assert auc_brute_force([0.9, 0.4], [0.5, 0.1]) == 0.75

    def test_empty_side_rejected(self):
        with pytest.raises(ValueError):
            auc([], [0.5])
        with pytest.raises(ValueError):
            auc([0.5], [])

    def test_matches_brute_force_exactly_on_random_instances(self):
        rng = np.random.default_rng(42)
        for trial in range(100):
            n_k = int(rng.integers(1, 51))
            n_u = int(rng.integers(1, 51))
            if trial % 2:
                # coarse integer grid forces plenty of ties
                known = rng.integers(0, 6, size=n_k).astype(float)
                unknown = rng.integers(0, 6, size=n_u).astype(float)
            else:
                known = rng.standard_normal(n_k)
                unknown = rng.standard_normal(n_u)
            assert auc(known, unknown) == auc_brute_force(list(known), list(unknown))

    @given(
        known=st.lists(st.floats(min_value=-100, max_value=100), min_size=1, max_size=30),
        unknown=st.lists(st.floats(min_value=-100, max_value=100), min_size=1, max_size=30),
    )
    @settings(max_examples=100)
    def test_complement_symmetry(self, known, unknown):
        if set(known) & set(unknown):
            return  # symmetry as stated holds for tie-free inputs
        assert auc(known, unknown) + auc(unknown, known) == pytest.approx(1.0, abs=1e-12)

    def test_invariant_under_strictly_increasing_transform(self):
        rng = np.random.default_rng(3)
        known = rng.standard_normal(25)
        unknown = rng.standard_normal(31)
        transformed = auc(np.exp(known) + known**3, np.exp(unknown) + unknown**3)
        assert transformed == auc(known, unknown)


class TestRoc:
    def test_endpoints(self):
        pts = roc_points([0.9, 0.4], [0.5, 0.1])
        assert pts[0] == (0.0, 0.0)
        assert pts[-1] == (1.0, 1.0)

    def test_trapezoid_area_equals_auc_for_tie_free_scores(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            known = rng.standard_normal(30)
            unknown = rng.standard_normal(20)
            pts = roc_points(known, unknown)
            area = sum(
                (x1 - x0) * (y0 + y1) / 2.0
                for (x0, y0), (x1, y1) in zip(pts, pts[1:])
            )
            assert area == pytest.approx(auc(known, unknown), abs=1e-9)


class TestMacroF1:
    def test_perfect_predictions(self):
        assert macro_f1([0, 1, 2], [0, 1, 2], 3) == 1.0

    def test_hand_confusion_example(self):
        # confusion [[2,0,0],[0,2,0],[2,0,0]]: class 2 always predicted as 0
        labels = [0, 0, 1, 1, 2, 2]
        preds = [0, 0, 1, 1, 0, 0]
        np.testing.assert_array_equal(
            confusion_matrix(preds, labels, 3), [[2, 0, 0], [0, 2, 0], [2, 0, 0]]
        )
        expected = (2 * (0.5 * 1.0) / 1.5 + 1.0 + 0.0) / 3.0
        assert macro_f1(preds, labels, 3) == pytest.approx(expected, abs=1e-12)
        assert macro_f1(preds, labels, 3) == pytest.approx(0.5556, abs=1e-4)

    def test_constant_predictions_balanced_binary(self):
        labels = [0] * 10 + [1] * 10
        preds = [0] * 20
        assert macro_f1(preds, labels, 2) == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_label_out_of_range(self):
        with pytest.raises(ValueError):
            macro_f1([0, 3], [0, 1], 3)

    def test_matches_hand_computation_on_random_cases(self):
        rng = np.random.default_rng(17)
        for _ in range(50):
            num_classes = int(rng.integers(2, 7))
            n = int(rng.integers(1, 60))
            labels = rng.integers(0, num_classes, size=n)
            preds = rng.integers(0, num_classes, size=n)
            assert macro_f1(preds, labels, num_classes) == pytest.approx(
                macro_f1_by_hand(list(preds), list(labels), num_classes), abs=1e-12
            )

    @given(perm_seed=st.integers(min_value=0, max_value=1000), case_seed=st.integers(min_value=0, max_value=1000))
    @settings(max_examples=50)
    def test_permutation_equivariance(self, perm_seed, case_seed):
        rng = np.random.default_rng(case_seed)
        num_classes = 4
        labels = rng.integers(0, num_classes, size=30)
        preds = rng.integers(0, num_classes, size=30)
        perm = np.random.default_rng(perm_seed).permutation(num_classes)
        assert macro_f1(perm[preds], perm[labels], num_classes) == pytest.approx(
            macro_f1(preds, labels, num_classes), abs=1e-12
        )


class TestOpenness:
    @pytest.mark.parametrize("n_train,n_test,expected", [
        (6, 10, 22.54),
        (4, 14, 46.55),
        (4, 54, 72.78),
        (20, 200, 68.37),
    ])
    def test_published_values(self, n_train, n_test, expected):
        assert abs(openness(n_train, n_test) - expected) < 0.01

    def test_closed_task_is_zero(self):
        assert openness(7, 7) == 0.0

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            openness(10, 5)
        with pytest.raises(ValueError):
            openness(0, 5)


def _fixed_logit_model(closed_rows, dummy_rows):
    closed = np.asarray(closed_rows, dtype=np.float64)
    dummy = np.asarray(dummy_rows, dtype=np.float64)
    d = closed.shape[0]
    return SplitMlp(
        pre_layers=[],
        post_layers=[DenseLayer(np.eye(d), np.zeros(d), "linear")],
        closed_head=DenseLayer(closed, np.zeros(closed.shape[1]), "linear"),
        dummy_head=DenseLayer(dummy, np.zeros(dummy.shape[1]), "linear"),
        input_dim=d,
    )


class TestEvaluate:
    def _model_and_data(self, seed=0):
        rng = np.random.default_rng(seed)
        model = SplitMlp.create(2, 3, 2, rng, pre_widths=(8,), post_widths=(4,))
        features = rng.standard_normal((40, 2))
        labels = rng.integers(0, 4, size=40)  # label 3 = unknown
        return model, LabeledSet(features, labels)

    def test_always_reject_model(self):
        model, data = self._model_and_data()
        model.calibration_bias = 1e9
        report = evaluate(model, data)
        assert report.rejection_rate == 1.0
        assert report.closed_accuracy == 0.0

    def test_never_reject_reduces_to_argmax_accuracy(self):
        model, data = self._model_and_data()
        model.calibration_bias = -1e9
        report = evaluate(model, data)
        assert report.rejection_rate == 0.0
        known = data.labels < 3
        argmax_acc = float(
            (model.augmented_logits(data.features).closed.argmax(axis=1)[known]
             == data.labels[known]).mean()
        )
        assert report.closed_accuracy == argmax_acc

    def test_report_fields_and_confusion_row_sums(self):
        model, data = self._model_and_data()
        report = evaluate(model, data, n_test_classes=5)
        assert report.confusion.shape == (4, 4)
        for c in range(4):
            assert report.confusion[c].sum() == (data.labels == c).sum()
        assert report.openness_pct == pytest.approx(openness(3, 5))
        assert 0.0 <= report.macro_f1 <= 1.0
        assert report.auc is not None and 0.0 <= report.auc <= 1.0
        assert report.roc[0] == (0.0, 0.0) and report.roc[-1] == (1.0, 1.0)

    def test_no_unknown_rows_flags_auc(self):
        model, data = self._model_and_data()
        known_only = LabeledSet(data.features, np.zeros(len(data), dtype=np.int64))
        report = evaluate(model, known_only)
        assert report.auc is None
        assert "auc_omitted_one_sided_test_set" in report.flags
        assert report.openness_pct == 0.0

    def test_baseline_score_uses_max_softmax(self):
        # scores differ between the two detectors, so the AUCs generally differ
        model = _fixed_logit_model(
            [[5.0, 0.0], [0.1, 0.0], [4.0, 0.0], [0.2, 0.1]],
            [[4.9], [-5.0], [-5.0], [0.0]],
        )
        data = LabeledSet(np.eye(4), [0, 0, 2, 2])
        a = evaluate(model, data, score="knownness")
        b = evaluate(model, data, score="max_softmax")
        assert a.auc != b.auc

    def test_deterministic_report_bytes(self):
        model, data = self._model_and_data()
        a = evaluate(model, data, n_test_classes=5).to_text()
        b = evaluate(model, data, n_test_classes=5).to_text()
        assert a.encode() == b.encode()

    def test_unknown_score_kind_rejected(self):
        model, data = self._model_and_data()
        with pytest.raises(ValueError):
            evaluate(model, data, score="entropy")
