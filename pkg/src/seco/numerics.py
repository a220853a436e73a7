"""Small vector helpers shared by every module.

All similarities in this package are inner products of L2-normalized
vectors, computed in float64.
"""

import numpy as np

from .errors import EmptyInputError, NonPositiveTemperatureError, ZeroVectorError

EPS_NORM = 1e-12


def l2_normalize(v, axis=-1):
    """Scale ``v`` to unit Euclidean norm along ``axis``.

    Raises ZeroVectorError if any slice has norm below 1e-12.
    """
    v = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(v, axis=axis, keepdims=True)
    if np.any(norm < EPS_NORM):
        raise ZeroVectorError("cannot normalize a zero vector")
    return v / norm


def cosine_sim(a, b):
    a = l2_normalize(a)
    b = l2_normalize(b)
    return float(np.clip(a @ b, -1.0, 1.0))


def softmax(scores, tau=1.0):
    """Temperature softmax with max-subtraction."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise EmptyInputError("softmax of an empty sequence")
    if not tau > 0:
        raise NonPositiveTemperatureError(f"temperature must be > 0, got {tau}")
    z = scores / tau
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(z, axis=-1):
    z = np.asarray(z, dtype=np.float64)
    m = np.max(z, axis=axis, keepdims=True)
    shifted = z - m
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


def normalize_backward(z, grad_out):
    """Gradient of ``z / ||z||`` (row-wise) given the upstream gradient."""
    norm = np.linalg.norm(z, axis=-1, keepdims=True)
    u = z / norm
    return (grad_out - u * np.sum(grad_out * u, axis=-1, keepdims=True)) / norm
