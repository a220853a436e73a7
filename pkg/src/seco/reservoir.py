"""Tag-paired FIFO reservoir of patch embeddings and the EMA teacher update."""

from dataclasses import dataclass

import numpy as np

from .errors import BatchExceedsCapacityError, LengthMismatchError
from .tagging import BACKGROUND, UNCERTAIN

CAPACITY = 4608
EMA_MOMENTUM = 0.999


@dataclass(frozen=True)
class ReservoirView:
    """Immutable FIFO-ordered copy of the reservoir contents."""

    embeddings: np.ndarray  # (size, C)
    tags: np.ndarray  # (size,)
    insert_index: np.ndarray  # (size,)

    def __len__(self):
        return len(self.tags)

    def positives(self, tag):
        return positives(self, tag)

    def contrast_mask(self):
        """Entries allowed into a contrastive denominator (uncertain excluded)."""
        return self.tags != UNCERTAIN


class TagReservoir:
    """Fixed-capacity FIFO of ``(embedding, tag)`` pairs backed by a ring buffer."""

    def __init__(self, capacity=CAPACITY, dim=16):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self.dim = int(dim)
        self._emb = np.zeros((self.capacity, self.dim))
        self._tags = np.zeros(self.capacity, dtype=np.int64)
        self._idx = np.zeros(self.capacity, dtype=np.int64)
        self._head = 0  # slot of the oldest entry
        self.size = 0
        self.next_index = 0

    def __len__(self):
        return self.size

    def _append(self, emb, tags):
        m = len(tags)
        if m == 0:
            return
        start = (self._head + self.size) % self.capacity
        slots = (start + np.arange(m)) % self.capacity
        self._emb[slots] = emb
        self._tags[slots] = tags
        self._idx[slots] = self.next_index + np.arange(m)
        self.next_index += m
        overflow = max(0, self.size + m - self.capacity)
        self._head = (self._head + overflow) % self.capacity
        self.size = min(self.capacity, self.size + m)

    def push_batch(self, q_embeddings, q_tags, k_embeddings, k_tags):
        """Enqueue the query view then the key view, evicting the oldest entries."""
        q_embeddings = np.asarray(q_embeddings, dtype=np.float64).reshape(-1, self.dim)
        k_embeddings = np.asarray(k_embeddings, dtype=np.float64).reshape(-1, self.dim)
        q_tags = np.asarray(q_tags, dtype=np.int64).ravel()
        k_tags = np.asarray(k_tags, dtype=np.int64).ravel()
        if len(q_tags) != len(k_tags) or len(q_tags) != len(q_embeddings) or len(k_tags) != len(k_embeddings):
            raise LengthMismatchError("query and key batches must pair up one to one")
        if not np.array_equal(q_tags, k_tags):
            raise LengthMismatchError("query and key tags must match per index")
        if 2 * len(q_tags) > self.capacity:
            raise BatchExceedsCapacityError(
                f"{2 * len(q_tags)} entries do not fit capacity {self.capacity}"
            )
        self._append(q_embeddings, q_tags)
        self._append(k_embeddings, k_tags)
        return self

    def view(self):
        slots = (self._head + np.arange(self.size)) % self.capacity
        return ReservoirView(
            self._emb[slots].copy(), self._tags[slots].copy(), self._idx[slots].copy()
        )

    def occupancy(self, num_classes):
        """Entry count per tag: ``{"-1": .., "0": .., "1": .., ...}``."""
        tags = self.view().tags
        keys = [UNCERTAIN, BACKGROUND] + list(range(1, num_classes + 1))
        return {str(t): int(np.sum(tags == t)) for t in keys}


def positives(view, tag):
    """Stored embeddings carrying ``tag``, oldest first."""
    return view.embeddings[view.tags == tag]


def ema_update(teacher, student, m=EMA_MOMENTUM):
    """``m * teacher + (1 - m) * student`` elementwise."""
    teacher = np.asarray(teacher, dtype=np.float64)
    student = np.asarray(student, dtype=np.float64)
    if teacher.shape != student.shape:
        raise LengthMismatchError(f"teacher {teacher.shape} vs student {student.shape}")
    if not 0.0 <= m <= 1.0:
        raise ValueError(f"momentum must lie in [0, 1], got {m}")
    return m * teacher + (1.0 - m) * student
