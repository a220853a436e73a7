"""Class activation maps and CAM-derived pseudo masks.

Feature grids are arrays of shape ``(H, W, D)``; CAM grids are ``(K, H, W)``
with row ``l - 1`` holding the map of class ``l``.  Pseudo masks are integer
``(H, W)`` arrays with 0 for background, ``1..K`` for classes and
:data:`IGNORE` for cells left unlabeled.
"""

import numpy as np

from .errors import InvalidThresholdError, ShapeMismatchError

IGNORE = 255

THETA_LOW = 0.25
THETA_HIGH = 0.70


def _check_head(features, head):
    features = np.asarray(features, dtype=np.float64)
    head = np.asarray(head, dtype=np.float64)
    if features.ndim != 3 or head.ndim != 2 or head.shape[1] != features.shape[2]:
        raise ShapeMismatchError(
            f"head {head.shape} incompatible with feature grid {features.shape}"
        )
    return features, head


def compute_cam(features, head):
    """ReLU of the per-cell projection onto each class row of ``head``."""
    features, head = _check_head(features, head)
    scores = np.einsum("hwd,kd->khw", features, head)
    return np.maximum(scores, 0.0)


def classifier_logits(features, head):
    """Class logits from the global-average-pooled feature grid."""
    features, head = _check_head(features, head)
    pooled = features.reshape(-1, features.shape[2]).mean(axis=0)
    return head @ pooled


def normalize_cam(cam):
    """Divide each class map by its maximum; all-zero maps stay zero."""
    cam = np.asarray(cam, dtype=np.float64)
    peak = cam.reshape(cam.shape[0], -1).max(axis=1)
    safe = np.where(peak > 0, peak, 1.0)
    return np.where(peak[:, None, None] > 0, cam / safe[:, None, None], 0.0)


def cam_to_pseudo_mask(cam, image_labels, theta_low=THETA_LOW, theta_high=THETA_HIGH):
    """Turn a CAM grid into a pseudo mask with a dual-threshold ignore band.

    Classes not in ``image_labels`` are suppressed.  Each cell takes its best
    present class (lowest index on ties) if the normalized score reaches
    ``theta_high``, background if it is below ``theta_low`` and IGNORE in
    between.
    """
    if not 0.0 <= theta_low <= theta_high <= 1.0:
        raise InvalidThresholdError(
            f"need 0 <= theta_low <= theta_high <= 1, got {theta_low}, {theta_high}"
        )
    cam = normalize_cam(cam)
    k, h, w = cam.shape
    present = np.zeros(k, dtype=bool)
    for label in image_labels:
        if not 1 <= label <= k:
            raise ShapeMismatchError(f"image label {label} outside 1..{k}")
        present[label - 1] = True
    mask = np.zeros((h, w), dtype=np.int64)
    if not present.any():
        return mask
    scores = np.where(present[:, None, None], cam, -np.inf)
    best = np.argmax(scores, axis=0)
    best_score = np.take_along_axis(scores, best[None], axis=0)[0]
    mask[best_score >= theta_high] = best[best_score >= theta_high] + 1
    mask[(best_score >= theta_low) & (best_score < theta_high)] = IGNORE
    return mask
