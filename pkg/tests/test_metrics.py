import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from genma.metrics import (confusion_matrix, evaluate, macro_f1,
                           macro_f1_from_labels)


def brute_f1(gold, pred, c):
    # counting oracle straight from the precision / recall definitions
    tp = sum(g == c and p == c for g, p in zip(gold, pred))
    n_pred = sum(p == c for p in pred)
    n_gold = sum(g == c for g in gold)
    prec = tp / n_pred if n_pred else 0.0
    rec = tp / n_gold if n_gold else 0.0
    return 2 * prec * rec / (prec + rec) if prec + rec else 0.0


labels = st.lists(st.tuples(st.integers(0, 2), st.integers(0, 2)), min_size=1, max_size=60)


def test_diagonal_confusion_is_perfect():
    per, macro = macro_f1(np.diag([4, 7, 2]))
    assert per.tolist() == [1.0, 1.0, 1.0]
    assert macro == 1.0


def test_hand_worked_example():
    gold = [0, 0, 1, 1, 2, 2]
    pred = [0, 1, 1, 1, 2, 0]
    per, macro = macro_f1(confusion_matrix(gold, pred))
    np.testing.assert_allclose(per, [1 / 2, 4 / 5, 2 / 3], atol=1e-12)
    assert macro == pytest.approx((1 / 2 + 4 / 5 + 2 / 3) / 3, abs=1e-12)


def test_confusion_orientation():
    cm = confusion_matrix([0, 0, 2], [1, 1, 2])
    assert cm[0, 1] == 2 and cm[2, 2] == 1 and cm.sum() == 3


@settings(max_examples=200, deadline=None)
@given(labels)
def test_matches_counting_oracle(pairs):
    gold, pred = zip(*pairs)
    per, macro = macro_f1(confusion_matrix(gold, pred))
    want = [brute_f1(gold, pred, c) for c in range(3)]
    np.testing.assert_allclose(per, want, atol=1e-12)
    assert macro == pytest.approx(np.mean(want), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(labels)
def test_two_paths_agree(pairs):
    gold, pred = zip(*pairs)
    a = macro_f1(confusion_matrix(gold, pred))
    b = macro_f1_from_labels(gold, pred)
    np.testing.assert_allclose(a[0], b[0], atol=1e-12)
    assert a[1] == pytest.approx(b[1], abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(labels, st.randoms(use_true_random=False))
def test_invariant_to_example_order(pairs, rnd):
    shuffled = list(pairs)
    rnd.shuffle(shuffled)
    a = macro_f1_from_labels(*zip(*pairs))[1]
    b = macro_f1_from_labels(*zip(*shuffled))[1]
    assert a == pytest.approx(b, abs=1e-12)


def test_absent_class_scores_zero():
    per, macro = macro_f1(confusion_matrix([0, 1], [0, 1]))
    assert per[2] == 0.0
    assert macro == pytest.approx(2 / 3)


def test_report_fields():
    r = evaluate([0, 1, 2, 2], [0, 1, 2, 1])
    d = r.to_dict()
    assert set(d) == {"positive", "negative", "neutral", "macro_f1", "accuracy"}
    assert d["accuracy"] == 0.75
    assert "| Model | Pos Class | Neg Class | Neut Class | Score |" in r.table("SVM")


@pytest.mark.parametrize("gold,pred", [([0, 1], [0]), ([0, 3], [0, 1]), ([-1], [0])])
def test_bad_labels_rejected(gold, pred):
    with pytest.raises(ValueError):
        confusion_matrix(gold, pred)


def test_empty_inputs_rejected():
    with pytest.raises(ValueError):
        macro_f1(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        macro_f1_from_labels([], [])
