"""Segmentation and co-occurrence metrics.

Counts are accumulated over all images before dividing (micro-average).
Ground-truth cells equal to IGNORE are left out.
"""

import csv
import io

import numpy as np

from .cam import IGNORE
from .errors import NoTruePositivesError, ShapeMismatchError, UninitializedPrototypeError
from .numerics import l2_normalize


def confusion_matrix(preds, gts, num_classes):
    """``(K + 1, K + 1)`` counts with rows = ground truth, cols = prediction."""
    n = num_classes + 1
    cm = np.zeros((n, n), dtype=np.int64)
    for pred, gt in zip(preds, gts, strict=True):
        pred = np.asarray(pred)
        gt = np.asarray(gt)
        if pred.shape != gt.shape:
            raise ShapeMismatchError(f"prediction {pred.shape} vs ground truth {gt.shape}")
        valid = gt != IGNORE
        g = gt[valid].astype(np.int64)
        p = pred[valid].astype(np.int64)
        if g.size and (g.max() >= n or p.max() >= n or min(g.min(), p.min()) < 0):
            raise ShapeMismatchError(f"labels must lie in 0..{num_classes}")
        cm += np.bincount(n * g + p, minlength=n * n).reshape(n, n)
    return cm


def class_counts(cm, label):
    tp = int(cm[label, label])
    fp = int(cm[:, label].sum()) - tp
    fn = int(cm[label, :].sum()) - tp
    return tp, fp, fn


def miou(preds, gts, num_classes):
    """Per-class IoU over labels ``0..K`` and their mean.

    Classes absent from both prediction and ground truth get ``nan`` and are
    left out of the mean.
    """
    cm = confusion_matrix(preds, gts, num_classes)
    tp = np.diag(cm).astype(np.float64)
    union = cm.sum(axis=0) + cm.sum(axis=1) - tp
    with np.errstate(invalid="ignore", divide="ignore"):
        iou = np.where(union > 0, tp / union, np.nan)
    mean = float(np.nanmean(iou)) if np.any(union > 0) else float("nan")
    return iou, mean


def confusion_ratio_from_counts(tp, fp):
    if tp <= 0:
        raise NoTruePositivesError("confusion ratio needs at least one true positive")
    return fp / tp


def confusion_ratio(preds, gts, label, num_classes):
    """False-positive cells over true-positive cells for ``label``."""
    tp, fp, _ = class_counts(confusion_matrix(preds, gts, num_classes), label)
    return confusion_ratio_from_counts(tp, fp)


def precision_recall_from_counts(tp, fp, fn):
    precision = tp / (tp + fp) if tp + fp > 0 else None
    recall = tp / (tp + fn) if tp + fn > 0 else None
    return precision, recall


def precision_recall(preds, gts, label, num_classes):
    """``(precision, recall)``; an undefined ratio is returned as ``None``."""
    tp, fp, fn = class_counts(confusion_matrix(preds, gts, num_classes), label)
    return precision_recall_from_counts(tp, fp, fn)


def patch_prototype_similarity(embeddings, bank):
    """Cosine similarity of each patch embedding to each prototype, ``(n, K)``."""
    if not bank.initialized.all():
        raise UninitializedPrototypeError("every prototype must be initialized")
    return l2_normalize(embeddings) @ l2_normalize(bank.vectors).T


def class_table(cm):
    """Rows of ``(class, iou, confusion_ratio, precision, recall)`` for the
    foreground classes of a confusion matrix."""
    rows = []
    for label in range(1, cm.shape[0]):
        tp, fp, fn = class_counts(cm, label)
        union = tp + fp + fn
        iou = tp / union if union else None
        ratio = fp / tp if tp else None
        precision, recall = precision_recall_from_counts(tp, fp, fn)
        rows.append((label, iou, ratio, precision, recall))
    return rows


def class_table_csv(cm):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["class", "iou", "confusion_ratio", "precision", "recall"])
    for row in class_table(cm):
        writer.writerow(["" if v is None else (f"{v:.6f}" if isinstance(v, float) else v) for v in row])
    return buf.getvalue()
