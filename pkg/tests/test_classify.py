"""List taxonomy relative to a disagreeing pair."""
import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from treecolour.broadcast import ColourList
from treecolour.classify import (
    DisagreementPair,
    classify_list,
    expected_bad,
    is_bad,
    is_fail,
    is_good,
    is_rescuable,
    is_special,
    p_bad_exact,
    p_free_exact,
)

PAIR = DisagreementPair(1, 2)


def test_pair_needs_distinct_colours():
    with pytest.raises(ValueError):
        DisagreementPair(3, 3)


def test_bad_requires_opposite_slot_and_own_colour():
    assert is_bad(ColourList(2, (1, 3)), PAIR, "X")
    assert not is_bad(ColourList(3, (1, 3)), PAIR, "X")
    assert not is_bad(ColourList(2, (3, 4)), PAIR, "X")
    assert is_bad(ColourList(1, (2, 3)), PAIR, "Y")
    assert not is_bad(ColourList(1, (3, 4)), PAIR, "Y")


def test_rescuable_needs_a_missing_colour():
    k = 4
    assert is_rescuable(ColourList(2, (1, 1, 3)), PAIR, "X", k)
    # all of {1, 3, 4} present: k - 1 distinct colours, nothing unused
    assert not is_rescuable(ColourList(2, (1, 3, 4)), PAIR, "X", k)
    assert not is_rescuable(ColourList(3, (1, 1)), PAIR, "X", k)


def test_special_good_fail_orientations():
    ref = ColourList(2, (1, 1, 3))          # X-rescuable, 4 unused
    good = ColourList(4, (1, 3, 3))          # c present, q absent: good on Y
    fail = ColourList(4, (2, 3, 3))          # q present, c absent: fail on Y
    neither = ColourList(4, (1, 2, 3))       # both present
    assert is_special(good, ref, PAIR, "Y")
    assert is_good(good, ref, PAIR, "Y")
    assert not is_fail(good, ref, PAIR, "Y")
    assert is_special(fail, ref, PAIR, "Y")
    assert is_fail(fail, ref, PAIR, "Y")
    assert not is_special(neither, ref, PAIR, "Y")
    # slot inside the reference entries disqualifies the candidate
    assert not is_special(ColourList(3, (2, 4, 4)), ref, PAIR, "Y")
    # slot equal to the candidate's own pair colour disqualifies it
    assert not is_special(ColourList(1, (2, 3, 3)), ref, PAIR, "Y")


lists = st.integers(min_value=4, max_value=6).flatmap(
    lambda k: st.tuples(
        st.just(k),
        st.integers(min_value=1, max_value=k),
        st.lists(st.integers(min_value=1, max_value=k), min_size=1,
                 max_size=6).map(tuple)))


@given(lists, lists)
@settings(max_examples=200, deadline=None)
def test_xy_symmetry_of_all_flags(cand_data, ref_data):
    k, slot, entries = cand_data
    _, ref_slot, ref_entries = ref_data
    cand = ColourList(slot, entries)
    ref = ColourList(ref_slot, ref_entries)
    swapped = DisagreementPair(PAIR.q, PAIR.c)
    assert is_bad(cand, PAIR, "X") == is_bad(cand, swapped, "Y")
    assert (is_rescuable(cand, PAIR, "X", k)
            == is_rescuable(cand, swapped, "Y", k))
    assert (is_special(cand, ref, PAIR, "X")
            == is_special(cand, ref, swapped, "Y"))
    assert is_good(cand, ref, PAIR, "X") == is_good(cand, ref, swapped, "Y")
    assert is_fail(cand, ref, PAIR, "X") == is_fail(cand, ref, swapped, "Y")


@given(lists, lists)
@settings(max_examples=200, deadline=None)
def test_flag_implications(cand_data, ref_data):
    k, slot, entries = cand_data
    _, ref_slot, ref_entries = ref_data
    cand = ColourList(slot, entries)
    ref = ColourList(ref_slot, ref_entries)
    if is_rescuable(cand, PAIR, "X", k):
        assert is_bad(cand, PAIR, "X")
    special = is_special(cand, ref, PAIR, "X")
    good = is_good(cand, ref, PAIR, "X")
    fail = is_fail(cand, ref, PAIR, "X")
    assert special == (good or fail)
    assert not (good and fail)


def test_classify_list_first_match_wins():
    refs = {
        0: ColourList(2, (1, 1, 3)),   # candidate slot 4 works for this one
        5: ColourList(2, (1, 1, 3)),
    }
    flags = classify_list(ColourList(4, (1, 3, 3)), PAIR, "Y", 4, refs)
    assert flags.special_for == 0
    assert flags.good_for == 0
    assert flags.fail_for is None


def _enumerated_probability(d, k, event):
    total = 0
    hits = 0
    for entries in itertools.product(range(1, k), repeat=d):
        # alphabet [k] minus q relabelled to 1..k-1 is not what we want:
        # enumerate honest child lists below a parent coloured q = 2
        lst = tuple(e if e < 2 else e + 1 for e in entries)
        total += 1
        hits += bool(event(lst))
    return Fraction(hits, total)


def test_p_free_exact_against_enumeration():
    for d, k in [(2, 4), (3, 4), (3, 5)]:
        oracle = _enumerated_probability(d, k, lambda lst: 3 not in lst)
        assert p_free_exact(d, k) == oracle


def test_p_bad_exact_against_enumeration():
    for d, k in [(2, 4), (3, 4), (3, 5)]:
        # slot colour hits q with probability 1/(k-1), independent of entries
        oracle = Fraction(1, k - 1) * _enumerated_probability(
            d, k, lambda lst: 1 in lst)
        assert p_bad_exact(d, k) == oracle


def test_expected_bad_bound():
    value, bound = expected_bad(10, 6)
    assert value < bound == Fraction(2)


def test_random_lists_agree_with_exact_probabilities():
    rng = random.Random(7)
    d, k, n = 3, 5, 30000
    bad = 0
    for _ in range(n):
        slot = rng.choice([x for x in range(1, k + 1) if x != 1])
        entries = tuple(rng.choice([x for x in range(1, k + 1) if x != slot])
                        for _ in range(d))
        bad += is_bad(ColourList(slot, entries), PAIR, "X")
    p = float(p_bad_exact(d, k))
    se = (p * (1 - p) / n) ** 0.5
    assert abs(bad / n - p) < 5 * se
