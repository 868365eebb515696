from __future__ import annotations

import random
from itertools import product

import pytest

from causalrag.errors import ValidationError
from causalrag.metrics import compute_metrics

from .oracles import brute_force_metrics


def test_worked_example_macro_values():
    golds = ["A", "A", "B", "B"]
    predictions = ["A", "B", "B", "B"]
    metrics = compute_metrics(golds, predictions)
    assert metrics.macro_precision == pytest.approx(5 / 6)
    assert metrics.macro_recall == pytest.approx(0.75)
    assert metrics.macro_f1 == pytest.approx(11 / 15)
    assert metrics.accuracy == pytest.approx(0.75)


def test_all_correct():
    golds = ["A", "B", "C", "A"]
    metrics = compute_metrics(golds, list(golds))
    assert metrics.macro_precision == 1.0
    assert metrics.macro_recall == 1.0
    assert metrics.macro_f1 == 1.0
    assert metrics.accuracy == 1.0
    assert metrics.abstain_count == 0


def test_all_abstain():
    golds = ["A", "B", "A"]
    metrics = compute_metrics(golds, [None, None, None])
    assert metrics.accuracy == 0.0
    assert metrics.abstain_count == 3
    for label_metrics in metrics.per_label.values():
        assert label_metrics.recall == 0.0


def test_abstain_never_counts_as_correct():
    metrics = compute_metrics(["A", "B"], ["A", None])
    assert metrics.accuracy == 0.5
    assert metrics.abstain_count == 1


def test_prediction_outside_gold_labels_hurts_recall_only():
    # gold classes are A/B; predicting C adds no gold-present class
    metrics = compute_metrics(["A", "B"], ["A", "C"])
    assert set(metrics.per_label) == {"A", "B"}
    assert metrics.per_label["B"].recall == 0.0
    assert metrics.per_label["A"].precision == 1.0


def test_empty_or_mismatched_records_rejected():
    with pytest.raises(ValidationError):
        compute_metrics([], [])
    with pytest.raises(ValidationError):
        compute_metrics(["A"], ["A", "B"])


def _assert_matches_oracle(golds, predictions):
    metrics = compute_metrics(golds, predictions)
    per_label, macro_p, macro_r, macro_f1, accuracy = brute_force_metrics(golds, predictions)
    assert metrics.macro_precision == pytest.approx(macro_p, abs=1e-12)
    assert metrics.macro_recall == pytest.approx(macro_r, abs=1e-12)
    assert metrics.macro_f1 == pytest.approx(macro_f1, abs=1e-12)
    assert metrics.accuracy == pytest.approx(accuracy, abs=1e-12)
    for label, (precision, recall, f1) in per_label.items():
        assert metrics.per_label[label].precision == pytest.approx(precision, abs=1e-12)
        assert metrics.per_label[label].recall == pytest.approx(recall, abs=1e-12)
        assert metrics.per_label[label].f1 == pytest.approx(f1, abs=1e-12)


def test_matches_confusion_matrix_oracle_exhaustive_short_vectors():
    gold_alphabet = ("A", "B", "C")
    pred_alphabet = ("A", "B", "C", None)
    for n in range(1, 4):
        for golds in product(gold_alphabet, repeat=n):
            for predictions in product(pred_alphabet, repeat=n):
                _assert_matches_oracle(list(golds), list(predictions))


def test_matches_confusion_matrix_oracle_random_long_vectors():
    rng = random.Random(2024)
    gold_alphabet = ("A", "B", "C")
    pred_alphabet = ("A", "B", "C", None)
    for _ in range(2000):
        n = rng.randint(4, 20)
        golds = [rng.choice(gold_alphabet) for _ in range(n)]
        predictions = [rng.choice(pred_alphabet) for _ in range(n)]
        _assert_matches_oracle(golds, predictions)
