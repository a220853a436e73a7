"""Synthetic co-occurrence scenarios.

Each image is a feature grid whose cells are drawn from Gaussian clusters
around fixed unit centers, one per class plus background.  For a
co-occurring pair ``(a, b, rho)``, a fraction ``rho`` of class-``a`` images
also contain a ``b`` region, and both regions of such an image receive a
shared confound vector.  Image labels say which classes are present, never
where.
"""

from dataclasses import dataclass

import numpy as np

from .numerics import l2_normalize


@dataclass
class Dataset:
    features: np.ndarray  # (V, H, W, D)
    masks: np.ndarray  # (V, H, W), ground truth
    labels: list  # tuple of present classes per image
    confounded: np.ndarray  # (V,) bool

    def __len__(self):
        return len(self.labels)

    def label_matrix(self, num_classes):
        y = np.zeros((len(self), num_classes))
        for i, labels in enumerate(self.labels):
            y[i, [l - 1 for l in labels]] = 1.0
        return y


@dataclass
class ScenarioGeometry:
    centers: np.ndarray  # (K + 1, D); row 0 is background
    confounds: np.ndarray  # (num_pairs, D)


def _streams(seed):
    geometry, train, test = np.random.SeedSequence(seed).spawn(3)
    return geometry, train, test


def scenario_geometry(cfg):
    rng = np.random.default_rng(_streams(cfg.seed)[0])
    D = cfg.feature_dim
    centers = l2_normalize(rng.normal(size=(cfg.num_classes + 1, D)))
    confounds = l2_normalize(rng.normal(size=(max(len(cfg.cooccurrence), 1), D)))
    return ScenarioGeometry(centers, confounds[: len(cfg.cooccurrence)])


def _rect(rng, top, left, height, width, min_frac, max_frac):
    h = int(rng.integers(max(1, int(round(min_frac * height))), max(1, int(round(max_frac * height))) + 1))
    w = int(rng.integers(max(1, int(round(min_frac * width))), max(1, int(round(max_frac * width))) + 1))
    r = top + int(rng.integers(0, height - h + 1))
    c = left + int(rng.integers(0, width - w + 1))
    return r, c, h, w


def _layout(rng, H, W, classes, region_frac):
    mask = np.zeros((H, W), dtype=np.int64)
    if len(classes) == 1:
        r, c, h, w = _rect(rng, 0, 0, H, W, *region_frac)
        mask[r:r + h, c:c + w] = classes[0]
        return mask
    # Two regions in opposite halves, split along a random axis.
    order = list(classes) if rng.random() < 0.5 else list(classes)[::-1]
    if rng.random() < 0.5:
        halves = [(0, 0, H, W // 2), (0, W // 2, H, W - W // 2)]
    else:
        halves = [(0, 0, H // 2, W), (H // 2, 0, H - H // 2, W)]
    for label, (top, left, height, width) in zip(order, halves):
        r, c, h, w = _rect(rng, top, left, height, width, max(region_frac[0], 0.6), 1.0)
        mask[r:r + h, c:c + w] = label
    return mask


def generate_images(cfg, count, rng, geometry=None):
    geometry = geometry or scenario_geometry(cfg)
    H, W = cfg.grid
    K, D = cfg.num_classes, cfg.feature_dim
    features = np.empty((count, H, W, D))
    masks = np.empty((count, H, W), dtype=np.int64)
    labels, confounded = [], np.zeros(count, dtype=bool)
    for i in range(count):
        primary = int(rng.integers(1, K + 1))
        classes = [primary]
        confound = None
        for p, (a, b, rho) in enumerate(cfg.cooccurrence):
            if primary == a and len(classes) == 1 and rng.random() < rho:
                classes.append(int(b))
                confound = geometry.confounds[p]
        mask = _layout(rng, H, W, classes, cfg.region_frac)
        scale = np.where(mask > 0, cfg.center_scale, cfg.background_scale)[..., None]
        x = scale * geometry.centers[mask] + cfg.noise_std * rng.normal(size=(H, W, D))
        if confound is not None:
            x[mask > 0] += cfg.confound_scale * confound
            confounded[i] = True
        features[i] = x
        masks[i] = mask
        labels.append(tuple(sorted(classes)))
    return Dataset(features, masks, labels, confounded)


def generate_scenario(cfg, split="train"):
    """Deterministic train or test split for ``cfg``; both splits share the
    class centers and confound directions."""
    cfg.validate()
    _, train, test = _streams(cfg.seed)
    if split == "train":
        return generate_images(cfg, cfg.images_per_epoch, np.random.default_rng(train))
    if split == "test":
        return generate_images(cfg, cfg.test_images, np.random.default_rng(test))
    raise ValueError(f"unknown split {split!r}")
