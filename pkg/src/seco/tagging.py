"""Per-patch category tags from pseudo-mask patches.

A tag is ``0`` (background), ``l`` in ``1..K`` (single class) or ``-1``
(uncertain).
"""

import numpy as np

from .cam import IGNORE
from .errors import InvalidThresholdError

BACKGROUND = 0
UNCERTAIN = -1

PHI = 0.9


def _check_phi(phi):
    if not 0.5 < phi <= 1.0:
        raise InvalidThresholdError(f"phi must lie in (0.5, 1], got {phi}")


def assign_tag(mask_patch, phi=PHI):
    """Tag of one patch: the label covering at least ``phi`` of its labeled cells.

    IGNORE cells are left out of the denominator, so an all-IGNORE patch is
    uncertain.
    """
    _check_phi(phi)
    labels = np.asarray(mask_patch).ravel()
    labels = labels[labels != IGNORE]
    if labels.size == 0:
        return UNCERTAIN
    values, counts = np.unique(labels, return_counts=True)
    best = np.argmax(counts)
    if counts[best] / labels.size >= phi:
        return int(values[best])
    return UNCERTAIN


def assign_tags(patches, phi=PHI):
    """Tags for every patch of a PatchSet, in patch order."""
    _check_phi(phi)
    return [assign_tag(m, phi) for m in patches.masks]
