"""Cropping feature grids and pseudo masks into aligned patches."""

from dataclasses import dataclass

import numpy as np

from .errors import MaskShapeMismatchError, PatchLargerThanImageError


@dataclass
class PatchSet:
    """``n`` aligned feature/mask patches and their (row, col) origins."""

    features: np.ndarray  # (n, h, w, D)
    masks: np.ndarray  # (n, h, w)
    origins: np.ndarray  # (n, 2)

    def __len__(self):
        return len(self.origins)

    @property
    def patch_shape(self):
        return self.masks.shape[1:3]


def _validate(features, mask, h, w):
    features = np.asarray(features)
    mask = np.asarray(mask)
    if mask.shape != features.shape[:2]:
        raise MaskShapeMismatchError(
            f"mask {mask.shape} does not match grid {features.shape[:2]}"
        )
    H, W = mask.shape
    if not (1 <= h <= H and 1 <= w <= W):
        raise PatchLargerThanImageError(f"patch {h}x{w} does not fit grid {H}x{W}")
    return features, mask


def crop(features, mask, origins, h, w):
    features, mask = _validate(features, mask, h, w)
    origins = np.asarray(origins, dtype=np.int64).reshape(-1, 2)
    rows = origins[:, 0, None] + np.arange(h)
    cols = origins[:, 1, None] + np.arange(w)
    feat = features[rows[:, :, None], cols[:, None, :]]
    msk = mask[rows[:, :, None], cols[:, None, :]]
    return PatchSet(features=feat, masks=msk, origins=origins)


def decompose_grid(features, mask, h, w):
    """Row-major non-overlapping tiling; remainder rows/cols are dropped."""
    features, mask = _validate(features, mask, h, w)
    H, W = mask.shape
    rr, cc = np.meshgrid(np.arange(H // h) * h, np.arange(W // w) * w, indexing="ij")
    origins = np.stack([rr.ravel(), cc.ravel()], axis=1)
    return crop(features, mask, origins, h, w)


def random_origins(grid_shape, h, w, n, rng):
    H, W = grid_shape
    if not (1 <= h <= H and 1 <= w <= W):
        raise PatchLargerThanImageError(f"patch {h}x{w} does not fit grid {H}x{W}")
    rows = rng.integers(0, H - h + 1, size=n)
    cols = rng.integers(0, W - w + 1, size=n)
    return np.stack([rows, cols], axis=1)


def decompose_random(features, mask, h, w, n, rng_seed):
    """``n`` patches at uniformly drawn origins (overlap allowed).

    ``rng_seed`` may be an int or a ``numpy.random.Generator`` owned by the
    caller.
    """
    features, mask = _validate(features, mask, h, w)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(rng_seed)
    return crop(features, mask, random_origins(mask.shape, h, w, n, rng), h, w)
