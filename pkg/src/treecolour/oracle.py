"""Exact enumeration oracles for small trees and single lists.

Everything here is brute force over proper colourings (or raw lists) with
Fraction masses, deliberately independent of the samplers it is used to
check.  Enumeration is refused outright when the naive state count exceeds
the budget; there is no partial fallback.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

from .broadcast import Palette
from .tree_model import TreeShape, leaves, parent, vertex_count

DEFAULT_BUDGET = 10 ** 7


class EnumerationBudgetError(Exception):
    """The naive enumeration size exceeds the allowed budget."""


class EmptySupportError(Exception):
    """No object satisfies the requested constraints."""


@dataclass
class ExactMeasure:
    """A finite measure as parallel lists, support in lexicographic order."""

    support: list[tuple[int, ...]]
    masses: list[Fraction]

    def total(self) -> Fraction:
        return sum(self.masses, Fraction(0))

    def as_dict(self) -> dict[tuple[int, ...], Fraction]:
        return dict(zip(self.support, self.masses))


def enumerate_measure(shape: TreeShape, k: int, root_colour: int,
                      budget: int = DEFAULT_BUDGET) -> ExactMeasure:
    """All proper colourings with the given root colour, each with mass
    (k-1)^-(#edges): the exact broadcast law."""
    Palette(k).check(root_colour)
    n = vertex_count(shape)
    if k ** n > budget:
        raise EnumerationBudgetError(
            f"enumeration size k^n = {k}^{n} exceeds budget {budget}")
    mass = Fraction(1, (k - 1) ** (n - 1))
    support: list[tuple[int, ...]] = []

    def extend(cols: list[int], v: int) -> None:
        if v == n:
            support.append(tuple(cols))
            return
        pc = cols[parent(shape, v)]
        for colour in range(1, k + 1):
            if colour != pc:
                cols.append(colour)
                extend(cols, v + 1)
                cols.pop()

    extend([root_colour], 1)
    return ExactMeasure(support, [mass] * len(support))


def leaf_projection(shape: TreeShape, measure: ExactMeasure) -> dict[tuple[int, ...], Fraction]:
    lo = leaves(shape)
    proj: dict[tuple[int, ...], Fraction] = {}
    for cols, m in zip(measure.support, measure.masses):
        key = cols[lo.start:lo.stop]
        proj[key] = proj.get(key, Fraction(0)) + m
    return proj


def tv_distance_leaves(shape: TreeShape, k: int, c: int, q: int,
                       budget: int = DEFAULT_BUDGET) -> Fraction:
    """Total variation distance between the leaf marginals of broadcasts
    started from root colours c and q."""
    pc = leaf_projection(shape, enumerate_measure(shape, k, c, budget))
    pq = leaf_projection(shape, enumerate_measure(shape, k, q, budget))
    keys = set(pc) | set(pq)
    diff = sum((abs(pc.get(x, Fraction(0)) - pq.get(x, Fraction(0))) for x in keys),
               Fraction(0))
    return diff / 2


@dataclass(frozen=True)
class ListConstraints:
    """Conjunction of constraints on a length-d list over colours 1..k."""

    exclude_parent: int | None = None
    require_present: frozenset[int] = field(default_factory=frozenset)
    require_absent: frozenset[int] = field(default_factory=frozenset)
    # At least one colour outside this set must be absent from the list.
    unused_outside: frozenset[int] | None = None

    def satisfied_by(self, entries: tuple[int, ...], k: int) -> bool:
        present = set(entries)
        if self.exclude_parent is not None and self.exclude_parent in present:
            return False
        if not self.require_present <= present:
            return False
        if present & self.require_absent:
            return False
        if self.unused_outside is not None:
            outside = set(range(1, k + 1)) - set(self.unused_outside)
            if outside <= present:
                return False
        return True


def conditional_list_measure(d: int, k: int, constraints: ListConstraints,
                             budget: int = DEFAULT_BUDGET) -> ExactMeasure:
    """Uniform measure on lists in {1..k}^d satisfying the constraints.

    This is the conditional law of a broadcast list given the constraint
    events, since unconstrained entries are i.i.d. uniform off the parent
    colour and every constraint here is an event about the entries.
    """
    if k ** d > budget:
        raise EnumerationBudgetError(
            f"enumeration size k^d = {k}^{d} exceeds budget {budget}")
    support = [entries for entries in
               itertools.product(range(1, k + 1), repeat=d)
               if constraints.satisfied_by(entries, k)]
    if not support:
        raise EmptySupportError(f"no list satisfies {constraints}")
    mass = Fraction(1, len(support))
    return ExactMeasure(support, [mass] * len(support))


def relabel_measure(measure: ExactMeasure, mapping: dict[int, int]) -> ExactMeasure:
    """Push the measure through a colour relabelling, re-sorting the support."""
    items = sorted(
        (tuple(mapping.get(x, x) for x in entries), m)
        for entries, m in zip(measure.support, measure.masses))
    return ExactMeasure([s for s, _ in items], [m for _, m in items])
