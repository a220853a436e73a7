# From a feature grid to CAMs, a pseudo mask, patches and patch tags.
import numpy as np

from seco.cam import IGNORE, cam_to_pseudo_mask, compute_cam
from seco.decomposition import decompose_grid
from seco.tagging import assign_tags

rng = np.random.default_rng(0)

# An 8x8 grid with 2 feature channels: class 1 lives in the top-left block,
# class 2 in the bottom-right block, background elsewhere.
features = 0.1 * rng.normal(size=(8, 8, 2))
features[:4, :4] += [3.0, 0.0]
features[4:, 4:] += [0.0, 3.0]

# One CAM row per class; entries are ReLU'd projections of each cell.
head = np.eye(2)
cam = compute_cam(features, head)
print("cam shape (K, H, W):", cam.shape)

# Max-normalize per class, then threshold: >= 0.7 class, < 0.25 background,
# IGNORE (255) in between.
mask = cam_to_pseudo_mask(cam, image_labels=[1, 2])
print("pseudo mask:")
print(np.where(mask == IGNORE, -1, mask))

# Cut into 2x2 tiles and tag each tile: a label must cover >= 90% of the
# non-IGNORE cells, otherwise the tile is uncertain (-1).
patches = decompose_grid(features, mask, 2, 2)
tags = assign_tags(patches, phi=0.9)
print("tile tags (row-major):")
print(np.array(tags).reshape(4, 4))
