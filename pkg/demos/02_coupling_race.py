"""Walk-through: naive vs improved coupling, level by level.

Couples two broadcasts started from disagreeing root colours with both
couplings and prints the mean number of disagreements per level, next to the
naive branching rate d/(k-1) per level.
"""
from treecolour.estimators import estimate_level_disagreements
from treecolour.tree_model import TreeShape

d, k, height, trials = 6, 5, 4, 4000
shape = TreeShape(d, height)
rate = d / (k - 1)

print(f"d = {d}, k = {k}, height = {height}, {trials} trials, "
      f"naive per-level rate d/(k-1) = {rate:.3f}\n")
print(f"{'level':>5} {'naive':>10} {'improved':>10} {'rate^level':>11}")
naive = estimate_level_disagreements(shape, k, 1, 2, "naive", trials, seed=1)
improved = estimate_level_disagreements(shape, k, 1, 2, "improved", trials,
                                        seed=1)
for lvl in range(1, height + 1):
    n, i = naive[lvl - 1], improved[lvl - 1]
    print(f"{lvl:>5} {n.mean:>10.3f} {i.mean:>10.3f} {rate ** lvl:>11.3f}")

print("\nThe naive coupling tracks rate^level; the improved coupling's "
      "repair phase trades child-level agreements for extra grandchild "
      "couplings, which at these sizes costs more than it saves.")
