"""Prototype bank: one unit-norm embedding per foreground class.

Prototypes are blended with class tokens by momentum and renormalized.
Tokens from single-label images update their class with full weight and are
the only ones that can initialize a prototype; multi-label tokens spread
their update by softmax relevance to the existing prototypes.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import UninitializedPrototypeError, ZeroVectorError
from .numerics import cosine_sim, l2_normalize, softmax

ETA = 0.9
RELEVANCE_TAU = 1.0


@dataclass(frozen=True)
class ClassToken:
    embedding: np.ndarray
    labels: tuple

    def __post_init__(self):
        if len(self.labels) == 0:
            raise ValueError("class token needs at least one label")


@dataclass
class UpdateStats:
    single_updates: int = 0
    multi_updates: int = 0
    initialized: int = 0
    skipped: int = 0


@dataclass
class PrototypeBank:
    vectors: np.ndarray  # (K, C); row l-1 holds class l
    initialized: np.ndarray = field(default=None)

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.initialized is None:
            self.initialized = np.zeros(len(self.vectors), dtype=bool)
        self.initialized = np.asarray(self.initialized, dtype=bool)

    @classmethod
    def empty(cls, num_classes, dim):
        return cls(np.zeros((num_classes, dim)))

    @property
    def num_classes(self):
        return self.vectors.shape[0]

    def copy(self):
        return PrototypeBank(self.vectors.copy(), self.initialized.copy())

    def get(self, label):
        if not self.initialized[label - 1]:
            raise UninitializedPrototypeError(f"prototype {label} is not initialized")
        return self.vectors[label - 1]

    def to_dict(self):
        return {
            "vectors": self.vectors.tolist(),
            "initialized": self.initialized.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["vectors"], dtype=np.float64), np.array(d["initialized"]))


def relevance_weights(token, bank, tau=RELEVANCE_TAU):
    """Softmax of the token's cosine similarity to each of its classes'
    prototypes, keyed by label."""
    labels = list(token.labels)
    sims = [cosine_sim(token.embedding, bank.get(l)) for l in labels]
    return dict(zip(labels, softmax(sims, tau)))


def update_prototype(prototype, token, eta, weight):
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    blended = eta * np.asarray(prototype) + weight * (1.0 - eta) * np.asarray(token)
    return l2_normalize(blended)


def update_bank(bank, tokens, eta=ETA, relevance_tau=RELEVANCE_TAU):
    """Apply ``tokens`` in order; returns ``(new_bank, stats)``.

    Multi-label tokens skip labels whose prototype is not initialized yet.
    """
    bank = bank.copy()
    stats = UpdateStats()
    for token in tokens:
        z = np.asarray(token.embedding, dtype=np.float64)
        if len(token.labels) == 1:
            (label,) = token.labels
            if bank.initialized[label - 1]:
                bank.vectors[label - 1] = update_prototype(bank.vectors[label - 1], z, eta, 1.0)
                stats.single_updates += 1
            else:
                bank.vectors[label - 1] = l2_normalize(z)
                bank.initialized[label - 1] = True
                stats.initialized += 1
            continue
        ready = [l for l in token.labels if bank.initialized[l - 1]]
        stats.skipped += len(token.labels) - len(ready)
        if not ready:
            continue
        if len(ready) == 1:
            weights = {ready[0]: 1.0}
        else:
            weights = relevance_weights(ClassToken(z, tuple(ready)), bank, relevance_tau)
        for label, w in weights.items():
            try:
                bank.vectors[label - 1] = update_prototype(bank.vectors[label - 1], z, eta, w)
            except ZeroVectorError:
                stats.skipped += 1
                continue
            stats.multi_updates += 1
    return bank, stats


def similarity_matrix(bank):
    """Pairwise cosine similarities between all K prototypes."""
    if not bank.initialized.all():
        missing = [int(i) + 1 for i in np.flatnonzero(~bank.initialized)]
        raise UninitializedPrototypeError(f"uninitialized prototypes: {missing}")
    p = l2_normalize(bank.vectors)
    sim = np.clip(p @ p.T, -1.0, 1.0)
    np.fill_diagonal(sim, 1.0)
    return sim
