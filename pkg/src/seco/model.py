"""Toy student network with hand-written backward passes.

Per cell, a two-layer tanh encoder maps D input features to C-dimensional
features ``F``.  Patch embeddings are the projection head applied to
mean-pooled ``F``, normalized to unit length; image class tokens are the
mean-pooled ``F`` itself.  The classification, auxiliary and segmentation
heads read ``F`` directly.
"""

from dataclasses import dataclass

import numpy as np

from .numerics import normalize_backward

ENCODER_KEYS = ("W1", "b1", "W2", "b2", "Wo", "bo")
HEAD_KEYS = ("Wcls", "Waux", "Wseg", "bseg")
PARAM_KEYS = ENCODER_KEYS + HEAD_KEYS


def init_params(feature_dim, embed_dim, num_classes, rng):
    D, C, K = feature_dim, embed_dim, num_classes
    return {
        "W1": rng.normal(0.0, 1.0 / np.sqrt(D), (D, C)),
        "b1": np.zeros(C),
        "W2": rng.normal(0.0, 1.0 / np.sqrt(C), (C, C)),
        "b2": np.zeros(C),
        "Wo": rng.normal(0.0, 1.0 / np.sqrt(C), (C, C)),
        "bo": np.zeros(C),
        "Wcls": rng.normal(0.0, 0.1, (K, C)),
        "Waux": rng.normal(0.0, 0.1, (K, C)),
        "Wseg": rng.normal(0.0, 0.1, (K + 1, C)),
        "bseg": np.zeros(K + 1),
    }


def param_shapes(params):
    return {k: params[k].shape for k in PARAM_KEYS}


def flatten(params, keys=PARAM_KEYS):
    return np.concatenate([np.ravel(params[k]) for k in keys])


def unflatten(vector, shapes, keys=PARAM_KEYS):
    out, start = {}, 0
    for k in keys:
        size = int(np.prod(shapes[k]))
        out[k] = np.asarray(vector[start:start + size], dtype=np.float64).reshape(shapes[k])
        start += size
    if start != len(vector):
        raise ValueError(f"vector has {len(vector)} entries, shapes need {start}")
    return out


def zeros_like(params):
    return {k: np.zeros_like(v) for k, v in params.items()}


@dataclass
class EncoderCache:
    x: np.ndarray
    h: np.ndarray
    f: np.ndarray


def encode(params, x):
    """Cell features for inputs of shape ``(..., D)``."""
    h = np.tanh(x @ params["W1"] + params["b1"])
    f = np.tanh(h @ params["W2"] + params["b2"])
    return f, EncoderCache(x, h, f)


def encode_backward(params, cache, grad_f, grads):
    """Accumulate encoder gradients into ``grads`` given dLoss/dF."""
    D = cache.x.shape[-1]
    C = cache.f.shape[-1]
    da2 = (grad_f * (1.0 - cache.f ** 2)).reshape(-1, C)
    h = cache.h.reshape(-1, C)
    grads["W2"] += h.T @ da2
    grads["b2"] += da2.sum(axis=0)
    da1 = (da2 @ params["W2"].T) * (1.0 - h ** 2)
    grads["W1"] += cache.x.reshape(-1, D).T @ da1
    grads["b1"] += da1.sum(axis=0)


@dataclass
class EmbedCache:
    enc: EncoderCache
    pooled: np.ndarray
    z: np.ndarray
    cells: int


def project(params, pooled):
    z = pooled @ params["Wo"] + params["bo"]
    return z / np.linalg.norm(z, axis=-1, keepdims=True), z


def embed(params, x):
    """Unit-norm embeddings of patches ``(n, h, w, D)`` -> ``(n, C)``."""
    f, enc = encode(params, x)
    n = f.shape[0]
    flat = f.reshape(n, -1, f.shape[-1])
    pooled = flat.mean(axis=1)
    q, z = project(params, pooled)
    return q, EmbedCache(enc, pooled, z, flat.shape[1])


def embed_backward(params, cache, grad_q, grads):
    dz = normalize_backward(cache.z, grad_q)
    grads["Wo"] += cache.pooled.T @ dz
    grads["bo"] += dz.sum(axis=0)
    dpooled = dz @ params["Wo"].T
    grad_f = np.broadcast_to(
        (dpooled / cache.cells)[:, None, :],
        (len(dpooled), cache.cells, dpooled.shape[-1]),
    ).reshape(cache.enc.f.shape)
    encode_backward(params, cache.enc, grad_f, grads)


def class_tokens(f):
    """Image class tokens: mean-pooled encoder output of full grids
    ``(B, H, W, C)`` -> ``(B, C)``."""
    return f.reshape(f.shape[0], -1, f.shape[-1]).mean(axis=1)


def seg_scores(params, f):
    return f @ params["Wseg"].T + params["bseg"]
