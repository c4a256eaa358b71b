"""Walk-through: the broadcast process and the list taxonomy.

Samples a broadcast on a small tree, then classifies the child lists below a
disagreeing pair and compares the empirical bad-list rate with its closed
form.
"""
import random

from treecolour.broadcast import ColourList, sample_broadcast, sample_list
from treecolour.classify import DisagreementPair, is_bad, p_bad_exact
from treecolour.tree_model import TreeShape, level_of, vertex_count

d, k, height = 3, 5, 2
shape = TreeShape(d, height)
rng = random.Random(2026)

print(f"one broadcast on the complete {d}-ary tree of height {height}, "
      f"k = {k} colours, root colour 1:")
col = sample_broadcast(shape, k, 1, rng)
for lvl in range(height + 1):
    row = [int(col.colours[v]) for v in range(vertex_count(shape))
           if level_of(shape, v) == lvl]
    print(f"  level {lvl}: {row}")

pair = DisagreementPair(1, 2)
trials = 50000
bad = 0
for _ in range(trials):
    slot = rng.choice([x for x in range(1, k + 1) if x != pair.c])
    lst = sample_list(k, slot, d, rng)
    bad += is_bad(ColourList(slot, lst.entries), pair, "X")
print(f"\nbad-list frequency below a disagreeing ({pair.c},{pair.q}) pair: "
      f"{bad / trials:.5f}")
print(f"exact value 1/(k-1) * (1 - (1-1/(k-1))^d):     "
      f"{float(p_bad_exact(d, k)):.5f}")
