# The two contrastive losses and their analytic gradients.
import math

import numpy as np

from seco.losses import lig_loss, lil_loss
from seco.numerics import l2_normalize
from seco.selftest import numeric_gradient, relative_error

# One positive and one orthogonal negative at temperature 1.
q = np.array([[1.0, 0.0]])
protos = np.array([[1.0, 0.0], [0.0, 1.0]])
print("patch-to-prototype:", round(lig_loss(q, [1], protos, [True, True], 1.0).value, 4))
print("patch-to-reservoir:", round(lil_loss(q, [1], protos, [1, 2], 1.0).value, 4))
print("-log(e / (e + 1))  :", round(math.log(1 + math.exp(-1)), 4))

# Only prototypes of classes in the query's image enter the denominator.
print("single candidate   :", abs(lig_loss(q, [1], protos, [True, False], 1.0).value))

# Gradients agree with central differences.
rng = np.random.default_rng(0)
queries = l2_normalize(rng.normal(size=(4, 8)))
keys = l2_normalize(rng.normal(size=(20, 8)))
key_tags = rng.integers(-1, 3, size=20)
tags = np.array([0, 1, 2, -1])
out = lil_loss(queries, tags, keys, key_tags)
numeric = numeric_gradient(lambda x: lil_loss(x, tags, keys, key_tags).value, queries)
print(f"reservoir loss {out.value:.4f} over {out.num_positive_pairs} positive pairs,"
      f" gradient relative error {relative_error(out.grad, numeric):.1e}")
