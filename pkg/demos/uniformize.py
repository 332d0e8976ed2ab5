"""Pruning a set to a uniform branching tree.

A set is (D, ell)-uniform when every block of D scales has a constant
branching number.  uniformize() keeps a large uniform subset and the
retained fraction never drops below the guaranteed bound.
"""
import numpy as np

from lqdim import DyadicMeasure, generate, middle_thirds
from lqdim.uniformity import is_uniform, uniformize, uniformize_bound

rng = np.random.default_rng(1)
D, ell = 3, 4
m = D * ell
idx = np.sort(rng.choice(2**m, size=600, replace=False))
mu = DyadicMeasure.from_atoms(m, idx, np.ones(idx.size), normalize=True)

res = uniformize(mu, D, ell)
print("input uniform:", bool(is_uniform(mu.support, D, ell)))
print("output uniform:", bool(is_uniform(res.measure.support, D, ell)))
print(f"retention {res.retention:.4f} >= bound {uniformize_bound(D, ell):.4f}")
print("branching per block:", res.tree.to_dict()["branching"])

cantor = generate(middle_thirds(), 12)
print("Cantor level 12 retention:", uniformize(cantor, 3, 4).retention)
