# The tag-paired FIFO reservoir, an EMA step, and tag rectification.
import numpy as np

from seco.numerics import l2_normalize
from seco.rectification import noisy_pair_count, rectify_batch
from seco.reservoir import TagReservoir, ema_update

rng = np.random.default_rng(1)

# Capacity 8: each push adds the student view then the teacher view.
res = TagReservoir(capacity=8, dim=2)
for step in range(3):
    q = l2_normalize(rng.normal(size=(2, 2)))
    k = l2_normalize(q + 0.05 * rng.normal(size=(2, 2)))
    res.push_batch(q, [1, 2], k, [1, 2])
    print(f"step {step}: size={len(res)} insert indices={res.view().insert_index.tolist()}")
print("occupancy:", res.occupancy(num_classes=2))

# The local teacher trails the student.
teacher, student = np.zeros(3), np.ones(3)
print("ema(m=0.999):", ema_update(teacher, student, 0.999))

# Rectification: a query whose similarity profile against its class
# positives is skewed (most positives below the mean) becomes uncertain.
pos = np.array([[1.0, 0.0]] * 2 + [[0.0, 1.0]] * 6)
res = TagReservoir(capacity=16, dim=2)
res.push_batch(pos[:4], [1] * 4, pos[4:], [1] * 4)
for name, q in [("aligned with the majority", [0.0, 1.0]), ("aligned with the minority", [1.0, 0.0])]:
    mu, n_v = noisy_pair_count(np.array(q), res.view().positives(1))
    tags, flipped = rectify_batch(np.array([q]), np.array([1]), res.view(), sigma=0.6, min_positives=8)
    print(f"{name}: mu={mu:.3f} N_v={n_v}/8 -> tag {tags[0]}")
