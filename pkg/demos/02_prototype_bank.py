# The prototype bank: initialization by single-label tokens, momentum
# updates, and relevance-weighted updates from multi-label tokens.
import numpy as np

from seco.prototypes import ClassToken, PrototypeBank, relevance_weights, similarity_matrix, update_bank

bank = PrototypeBank.empty(num_classes=3, dim=3)

# A multi-label token cannot initialize anything: both labels are skipped.
bank, stats = update_bank(bank, [ClassToken(np.array([1.0, 1.0, 0.0]), (1, 2))])
print("after multi-label token on empty bank:", bank.initialized, "skipped:", stats.skipped)

# Single-label tokens initialize their prototype to the normalized token.
tokens = [
    ClassToken(np.array([3.0, 0.0, 0.0]), (1,)),
    ClassToken(np.array([0.0, 4.0, 0.0]), (2,)),
    ClassToken(np.array([0.0, 0.0, 2.0]), (3,)),
]
bank, stats = update_bank(bank, tokens, eta=0.9)
print("initialized:", stats.initialized)
print(np.round(similarity_matrix(bank), 3))

# A token closer to class 1 than to class 2 pushes class 1 harder.
mixed = ClassToken(np.array([0.9, 0.3, 0.0]), (1, 2))
print("relevance weights:", {k: round(float(v), 4) for k, v in relevance_weights(mixed, bank).items()})
bank, _ = update_bank(bank, [mixed] * 20, eta=0.9)
print("after 20 mixed tokens:")
print(np.round(similarity_matrix(bank), 3))
print("norms:", np.round(np.linalg.norm(bank.vectors, axis=1), 12))
