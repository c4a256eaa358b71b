"""Brute-force enumeration oracles over small trees and lists."""
import itertools
from fractions import Fraction

import pytest

from treecolour.broadcast import transition_row
from treecolour.oracle import (
    EmptySupportError,
    EnumerationBudgetError,
    ListConstraints,
    conditional_list_measure,
    enumerate_measure,
    leaf_projection,
    relabel_measure,
    tv_distance_leaves,
)
from treecolour.tree_model import TreeShape, leaves, parent, vertex_count


def test_single_edge_two_colours():
    m = enumerate_measure(TreeShape(1, 1), 2, 1)
    assert m.support == [(1, 2)]
    assert m.masses == [Fraction(1)]


def test_two_children_three_colours():
    m = enumerate_measure(TreeShape(2, 1), 3, 1)
    assert m.support == [(1, 2, 2), (1, 2, 3), (1, 3, 2), (1, 3, 3)]
    assert m.masses == [Fraction(1, 4)] * 4


def test_measure_total_is_one_and_colourings_are_proper():
    shape = TreeShape(2, 2)
    m = enumerate_measure(shape, 3, 2)
    assert m.total() == 1
    for cols in m.support:
        assert cols[0] == 2
        for v in range(1, vertex_count(shape)):
            assert cols[v] != cols[parent(shape, v)]


def test_measure_matches_transition_row_product():
    shape = TreeShape(2, 2)
    k = 4
    m = enumerate_measure(shape, k, 1)
    for cols, mass in zip(m.support, m.masses):
        product = Fraction(1)
        for v in range(1, vertex_count(shape)):
            row = transition_row(k, cols[parent(shape, v)], exact=True)
            product *= row[cols[v] - 1]
        assert mass == product


def test_budget_refusal():
    with pytest.raises(EnumerationBudgetError):
        enumerate_measure(TreeShape(3, 3), 5, 1, budget=1000)
    with pytest.raises(EnumerationBudgetError):
        conditional_list_measure(10, 6, ListConstraints(), budget=1000)


def test_leaf_projection_sums_to_one():
    shape = TreeShape(2, 2)
    proj = leaf_projection(shape, enumerate_measure(shape, 3, 1))
    assert sum(proj.values()) == 1
    lo = leaves(shape)
    assert all(len(key) == lo.stop - lo.start for key in proj)


def test_tv_identical_roots_is_zero():
    assert tv_distance_leaves(TreeShape(2, 2), 4, 3, 3) == 0


def test_tv_single_edge_two_colours_is_one():
    assert tv_distance_leaves(TreeShape(1, 1), 2, 1, 2) == 1


def test_tv_two_children_three_colours():
    assert tv_distance_leaves(TreeShape(2, 1), 3, 1, 2) == Fraction(3, 4)


def test_tv_decreases_with_height_at_fixed_small_shape():
    k = 5
    tall = tv_distance_leaves(TreeShape(2, 2), k, 1, 2)
    short = tv_distance_leaves(TreeShape(2, 1), k, 1, 2)
    assert tall < short


def test_unconstrained_list_measure_is_uniform():
    m = conditional_list_measure(2, 3, ListConstraints())
    assert m.support == list(itertools.product((1, 2, 3), repeat=2))
    assert m.total() == 1


def test_conditional_list_measure_matches_direct_enumeration():
    d, k = 3, 5
    cons = ListConstraints(exclude_parent=2,
                           require_present=frozenset({1}),
                           require_absent=frozenset({4}))
    direct = [entries for entries in
              itertools.product(range(1, k + 1), repeat=d)
              if 2 not in entries and 1 in entries and 4 not in entries]
    m = conditional_list_measure(d, k, cons)
    assert m.support == direct
    assert m.masses == [Fraction(1, len(direct))] * len(direct)


def test_unused_outside_requires_a_free_colour():
    d, k = 2, 4
    cons = ListConstraints(exclude_parent=2,
                           unused_outside=frozenset({1, 2}))
    m = conditional_list_measure(d, k, cons)
    # entries over {1, 3, 4} missing at least one of {3, 4}
    assert (3, 4) not in m.support
    assert (4, 3) not in m.support
    assert (1, 3) in m.support and (3, 3) in m.support


def test_empty_support_raises():
    with pytest.raises(EmptySupportError):
        conditional_list_measure(
            1, 3, ListConstraints(require_present=frozenset({1, 2})))


def test_relabel_measure_is_a_pushforward():
    m = conditional_list_measure(2, 4, ListConstraints(exclude_parent=1))
    swapped = relabel_measure(m, {2: 3, 3: 2})
    assert swapped.total() == m.total()
    original = m.as_dict()
    relabelled = swapped.as_dict()
    for entries, mass in original.items():
        image = tuple({2: 3, 3: 2}.get(x, x) for x in entries)
        assert relabelled[image] == mass
    assert swapped.support == sorted(swapped.support)
