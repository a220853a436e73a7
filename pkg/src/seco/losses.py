"""Contrastive, classification and segmentation losses with analytic gradients.

Every loss returns its value together with the gradient with respect to its
first argument (queries, logits or scores).  Prototypes and reservoir keys
are constants.
"""

import math
from dataclasses import dataclass

import numpy as np

from .cam import IGNORE
from .errors import (
    LengthMismatchError,
    MissingPrototypeError,
    NonFiniteComponentError,
    NonPositiveTemperatureError,
    ShapeMismatchError,
)
from .numerics import log_softmax

TAU_GLOBAL = 0.5
TAU_LOCAL = 0.2


@dataclass
class LossBundle:
    value: float
    grad: np.ndarray  # (num_queries, C)
    num_positive_pairs: int


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 0.5
    beta: float = 0.5
    gamma: float = 0.12

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ValueError("loss weights must be >= 0")


def _check_tau(tau):
    if not tau > 0:
        raise NonPositiveTemperatureError(f"temperature must be > 0, got {tau}")


def lig_loss(queries, tags, prototypes, candidates, tau=TAU_GLOBAL):
    """Patch-to-prototype InfoNCE.

    ``prototypes`` is ``(K, C)`` with row ``l - 1`` for class ``l``;
    ``candidates`` marks which prototypes enter the denominator, either one
    ``(K,)`` mask shared by all queries or a ``(u, K)`` mask per query (the
    classes present in each query's image).  Each query has exactly one
    positive, the prototype of its tag.
    """
    _check_tau(tau)
    queries = np.asarray(queries, dtype=np.float64)
    tags = np.asarray(tags, dtype=np.int64).ravel()
    prototypes = np.asarray(prototypes, dtype=np.float64)
    u = len(tags)
    if u == 0:
        return LossBundle(0.0, np.zeros((0, prototypes.shape[1])), 0)
    candidates = np.broadcast_to(np.asarray(candidates, dtype=bool), (u, prototypes.shape[0]))
    if np.any(tags < 1) or np.any(tags > prototypes.shape[0]):
        raise MissingPrototypeError("queries must carry foreground tags")
    rows = np.arange(u)
    if not np.all(candidates[rows, tags - 1]):
        raise MissingPrototypeError("a query's positive prototype is not among the candidates")

    logits = np.where(candidates, queries @ prototypes.T / tau, -np.inf)
    logp = log_softmax(logits)
    value = -float(np.mean(logp[rows, tags - 1]))
    prob = np.exp(logp)
    prob[rows, tags - 1] -= 1.0
    grad = prob @ prototypes / (tau * u)
    return LossBundle(value, grad, u)


def lil_loss(queries, tags, keys, key_tags, tau=TAU_LOCAL):
    """Patch-to-reservoir InfoNCE with tag-defined positives.

    Uncertain (-1) queries are masked out; every other query, background
    included, is an anchor whose positives are the stored keys with the same
    tag.  The denominator runs over all keys that are not uncertain.  The
    value is averaged over positive pairs.
    """
    _check_tau(tau)
    queries = np.asarray(queries, dtype=np.float64)
    tags = np.asarray(tags, dtype=np.int64).ravel()
    keys = np.asarray(keys, dtype=np.float64)
    key_tags = np.asarray(key_tags, dtype=np.int64).ravel()
    grad = np.zeros_like(queries)
    if len(key_tags) == 0 or len(tags) == 0:
        return LossBundle(0.0, grad, 0)
    keep = key_tags != -1
    keys, key_tags = keys[keep], key_tags[keep]
    anchors = np.flatnonzero(tags != -1)
    if len(anchors) == 0 or len(keys) == 0:
        return LossBundle(0.0, grad, 0)

    q = queries[anchors]
    pos = tags[anchors, None] == key_tags[None, :]  # (a, N)
    n_pos = pos.sum(axis=1)
    total_pairs = int(n_pos.sum())
    if total_pairs == 0:
        return LossBundle(0.0, grad, 0)

    logits = q @ keys.T / tau
    logp = log_softmax(logits)
    value = -float(np.sum(np.where(pos, logp, 0.0))) / total_pairs
    prob = np.exp(logp)
    coef = n_pos[:, None] * prob - pos
    grad[anchors] = coef @ keys / (tau * total_pairs)
    return LossBundle(value, grad, total_pairs)


def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def multilabel_soft_margin(logits, targets):
    """Mean over classes (and over rows, for 2-D input) of the binary
    log-loss.  Returns ``(value, grad)``."""
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if logits.shape != targets.shape:
        raise LengthMismatchError(f"logits {logits.shape} vs targets {targets.shape}")
    per = -(targets * _log_sigmoid(logits) + (1 - targets) * _log_sigmoid(-logits))
    value = float(np.mean(per))
    sig = np.exp(_log_sigmoid(logits))
    grad = (sig - targets) / logits.size
    return value, grad


def seg_cross_entropy(scores, mask):
    """Cross entropy of per-cell scores ``(..., K + 1)`` against a pseudo mask,
    averaged over non-IGNORE cells.  Returns ``(value, grad)``."""
    scores = np.asarray(scores, dtype=np.float64)
    mask = np.asarray(mask)
    if scores.shape[:-1] != mask.shape:
        raise ShapeMismatchError(f"scores {scores.shape} vs mask {mask.shape}")
    flat = scores.reshape(-1, scores.shape[-1])
    labels = mask.ravel()
    valid = labels != IGNORE
    grad = np.zeros_like(flat)
    n = int(valid.sum())
    if n == 0:
        return 0.0, grad.reshape(scores.shape)
    if np.any(labels[valid] >= flat.shape[1]) or np.any(labels[valid] < 0):
        raise ShapeMismatchError("mask label outside the score classes")
    logp = log_softmax(flat[valid])
    rows = np.arange(n)
    value = -float(np.mean(logp[rows, labels[valid]]))
    g = np.exp(logp)
    g[rows, labels[valid]] -= 1.0
    grad[valid] = g / n
    return value, grad.reshape(scores.shape)


def seco_total(l_cls, l_cls_aux, l_lig, l_lil, l_seg, weights=LossWeights()):
    parts = (l_cls, l_cls_aux, l_lig, l_lil, l_seg)
    if not all(math.isfinite(p) for p in parts):
        raise NonFiniteComponentError(f"non-finite loss component in {parts}")
    return (
        l_cls
        + l_cls_aux
        + weights.alpha * l_lig
        + weights.beta * l_lil
        + weights.gamma * l_seg
    )
