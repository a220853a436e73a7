"""Similarity-based rectification of noisy patch tags against reservoir positives."""

import numpy as np

from .errors import NoPositivesError
from .tagging import UNCERTAIN

SIGMA = 0.6
MIN_POSITIVES = 8


def mean_positive_similarity(q, positives):
    positives = np.asarray(positives, dtype=np.float64)
    if len(positives) == 0:
        raise NoPositivesError("mean similarity needs at least one positive")
    return float(np.mean(positives @ np.asarray(q, dtype=np.float64)))


def noisy_pair_count(q, positives):
    """Returns ``(mu, n_v)``: the mean similarity and the number of positives
    strictly below it."""
    positives = np.asarray(positives, dtype=np.float64)
    sims = positives @ np.asarray(q, dtype=np.float64)
    mu = mean_positive_similarity(q, positives)
    return mu, int(np.sum(sims < mu))


def rectify_tag(q, tag, positives, sigma=SIGMA):
    """Return -1 if more than ``sigma`` of the positives fall below the mean
    similarity, otherwise ``tag``.  No positives means no evidence: keep."""
    if len(positives) == 0:
        return tag
    _, n_v = noisy_pair_count(q, positives)
    if n_v / len(positives) > sigma:
        return UNCERTAIN
    return tag


def rectify_batch(queries, tags, view, sigma=SIGMA, min_positives=MIN_POSITIVES):
    """Rectify every foreground-tagged query against a reservoir snapshot.

    Queries with fewer than ``min_positives`` matching entries keep their tag.
    Returns the new tag array and the number of tags flipped to uncertain.
    """
    tags = np.asarray(tags, dtype=np.int64)
    queries = np.asarray(queries, dtype=np.float64)
    out = tags.copy()
    for t in np.unique(tags[tags > 0]):
        pos = view.embeddings[view.tags == t]
        if len(pos) < min_positives:
            continue
        rows = np.flatnonzero(tags == t)
        sims = queries[rows] @ pos.T
        mu = sims.mean(axis=1)
        n_v = np.sum(sims < mu[:, None], axis=1)
        out[rows[n_v / len(pos) > sigma]] = UNCERTAIN
    return out, int(np.sum((out == UNCERTAIN) & (tags > 0)))
