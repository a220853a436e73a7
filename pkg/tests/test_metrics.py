import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from seco.cam import IGNORE
from seco.errors import NoTruePositivesError, ShapeMismatchError, UninitializedPrototypeError
from seco.metrics import (
    class_table,
    class_table_csv,
    confusion_matrix,
    confusion_ratio,
    confusion_ratio_from_counts,
    miou,
    patch_prototype_similarity,
    precision_recall,
)
from seco.prototypes import PrototypeBank


def test_miou_examples():
    gt = [np.array([[0, 1], [2, 2]])]
    iou, mean = miou(gt, gt, 3)
    assert mean == 1.0
    assert np.isnan(iou[3]) and iou[:3].tolist() == [1.0, 1.0, 1.0]
    iou, _ = miou([np.array([[1, 1]])], [np.array([[2, 2]])], 2)
    assert iou[1] == 0.0 and iou[2] == 0.0
    gt = [np.array([[1, 1, 1, 1]])]
    pred = [np.array([[1, 1, 0, 0]])]
    iou, _ = miou(pred, gt, 1)
    assert iou[1] == 0.5


def test_ignore_cells_excluded():
    gt = [np.array([[1, IGNORE]])]
    pred = [np.array([[1, 2]])]
    assert confusion_matrix(pred, gt, 2).sum() == 1
    assert miou(pred, gt, 2)[1] == 1.0


def test_shape_mismatch():
    with pytest.raises(ShapeMismatchError):
        miou([np.zeros((2, 2), int)], [np.zeros((2, 3), int)], 1)


def test_confusion_ratio_examples():
    gt = [np.array([[1, 2]])]
    assert confusion_ratio(gt, gt, 1, 2) == 0.0
    assert confusion_ratio_from_counts(100, 23) == pytest.approx(0.23)
    assert confusion_ratio_from_counts(7, 7) == 1.0
    with pytest.raises(NoTruePositivesError):
        confusion_ratio([np.array([[2, 2]])], [np.array([[1, 0]])], 1, 2)


def test_confusion_ratio_counts_cells():
    gt = [np.array([[1] * 100 + [2] * 23])]
    pred = [np.array([[1] * 123])]
    assert confusion_ratio(pred, gt, 1, 2) == pytest.approx(0.23)


def test_precision_recall_examples():
    gt = [np.array([[1, 2, 0]])]
    assert precision_recall(gt, gt, 1, 2) == (1.0, 1.0)
    p, r = precision_recall([np.array([[1, 1, 0, 0]])], [np.array([[1, 1, 1, 0]])], 1, 1)
    assert p == 1.0 and r < 1
    gt = [np.array([[1] * 100 + [0] * 20])]
    pred = [np.array([[1] * 80 + [0] * 20 + [1] * 20])]
    assert precision_recall(pred, gt, 1, 1) == pytest.approx((0.8, 0.8))
    assert precision_recall([np.array([[0]])], [np.array([[0]])], 1, 1) == (None, None)


def test_patch_prototype_similarity():
    bank = PrototypeBank(np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([True, True]))
    sim = patch_prototype_similarity(np.array([[1.0, 0.0], [1.0, 1.0]]), bank)
    np.testing.assert_allclose(sim[0], [1.0, 0.0])
    assert sim[1, 0] == pytest.approx(sim[1, 1])
    with pytest.raises(UninitializedPrototypeError):
        patch_prototype_similarity(np.ones((1, 2)), PrototypeBank.empty(2, 2))


def test_class_table_csv():
    cm = confusion_matrix([np.array([[1, 1, 2]])], [np.array([[1, 2, 2]])], 2)
    rows = class_table(cm)
    assert rows[0][0] == 1 and rows[0][1] == 0.5 and rows[0][2] == 1.0
    text = class_table_csv(cm)
    assert text.splitlines()[0] == "class,iou,confusion_ratio,precision,recall"
    assert len(text.splitlines()) == 3


masks = st.lists(st.integers(0, 3), min_size=6, max_size=6)


@given(st.lists(st.tuples(masks, masks), min_size=1, max_size=5), st.permutations([0, 1, 2, 3]), st.randoms())
def test_miou_invariances(pairs, perm, rnd):
    preds = [np.array(p).reshape(2, 3) for p, _ in pairs]
    gts = [np.array(g).reshape(2, 3) for _, g in pairs]
    iou, mean = miou(preds, gts, 3)
    order = list(range(len(preds)))
    rnd.shuffle(order)
    _, mean2 = miou([preds[i] for i in order], [gts[i] for i in order], 3)
    assert mean == pytest.approx(mean2, abs=1e-12)
    perm = np.array(perm)
    _, mean3 = miou([perm[p] for p in preds], [perm[g] for g in gts], 3)
    assert mean == pytest.approx(mean3, abs=1e-12)
