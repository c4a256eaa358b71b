"""Taxonomy of colour lists seen by a coupled pair of broadcasts.

A coupled pair disagrees at some vertex, colours c under X and q under Y.
The lists broadcast below that vertex are classified relative to the pair
(c, q): bad lists force disagreements two levels down, rescuable bad lists
leave room to repair them, and special lists among the remaining children
are the candidates used for the repair.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Literal, Mapping, Optional

from .broadcast import ColourList, Palette

Side = Literal["X", "Y"]


@dataclass(frozen=True)
class DisagreementPair:
    """Colours of a disagreeing vertex: c under X, q under Y."""

    c: int
    q: int

    def __post_init__(self) -> None:
        if self.c == self.q:
            raise ValueError("a disagreeing pair needs two distinct colours")

    def check(self, k: int) -> None:
        Palette(k).check(self.c)
        Palette(k).check(self.q)


@dataclass(frozen=True)
class ListFlags:
    """Classification flags of one list relative to a disagreeing pair.

    ``special_for``/``good_for``/``fail_for`` name the index of the rescuable
    list (on the opposite side) the candidate is classified against, or None.
    """

    bad: bool
    rescuable: bool
    special_for: Optional[int] = None
    good_for: Optional[int] = None
    fail_for: Optional[int] = None

    def __post_init__(self) -> None:
        if self.rescuable and not self.bad:
            raise ValueError("rescuable implies bad")
        if self.good_for is not None and self.good_for != self.special_for:
            raise ValueError("good_for implies special_for with the same index")
        if self.fail_for is not None and self.fail_for != self.special_for:
            raise ValueError("fail_for implies special_for with the same index")
        if self.good_for is not None and self.fail_for is not None:
            raise ValueError("good_for and fail_for are mutually exclusive")


def classify_list(lst: ColourList, pair: DisagreementPair, side: Side, k: int,
                  rescuable_refs: Mapping[int, ColourList] = {}) -> ListFlags:
    """Full flag set of one list; candidates are checked against the given
    opposite-side rescuable lists in ascending index order, first match wins."""
    bad = is_bad(lst, pair, side)
    rescuable = is_rescuable(lst, pair, side, k)
    special_for = good_for = fail_for = None
    if not bad:
        for j in sorted(rescuable_refs):
            ref = rescuable_refs[j]
            if is_special(lst, ref, pair, side):
                special_for = j
                if is_good(lst, ref, pair, side):
                    good_for = j
                else:
                    fail_for = j
                break
    return ListFlags(bad, rescuable, special_for, good_for, fail_for)


def is_bad(lst: ColourList, pair: DisagreementPair, side: Side) -> bool:
    """A bad list guarantees a disagreement below under index-aligned
    couplings: the slot carries the opposite colour of the pair and the
    grandchild list contains this side's root colour."""
    if side == "X":
        return lst.parent_colour == pair.q and pair.c in lst.entries
    return lst.parent_colour == pair.c and pair.q in lst.entries


def is_rescuable(lst: ColourList, pair: DisagreementPair, side: Side, k: int) -> bool:
    """Bad, but using fewer than k-1 distinct colours, so at least one colour
    outside {c, q} is unused and a repair candidate can point at it."""
    if not is_bad(lst, pair, side):
        return False
    return len(set(lst.entries)) < k - 1


def is_special(candidate: ColourList, rescuable_ref: ColourList,
               pair: DisagreementPair, side: Side) -> bool:
    """Whether ``candidate`` (on ``side``) is special for the rescuable list
    on the opposite side.

    The slot colour must avoid the pair colour of its own side and every
    colour of the rescuable reference, and the candidate entries must contain
    exactly one of {c, q}.
    """
    slot = candidate.parent_colour
    own_pair_colour = pair.q if side == "X" else pair.c
    if slot == own_pair_colour:
        return False
    if slot in rescuable_ref.entries:
        return False
    return (pair.c in candidate.entries) != (pair.q in candidate.entries)


def is_good(candidate: ColourList, rescuable_ref: ColourList,
            pair: DisagreementPair, side: Side) -> bool:
    """Special, with the orientation that lets the candidate swap roles with
    the rescuable list: on the X side q present and c absent, mirrored on Y."""
    if not is_special(candidate, rescuable_ref, pair, side):
        return False
    if side == "X":
        return pair.q in candidate.entries and pair.c not in candidate.entries
    return pair.c in candidate.entries and pair.q not in candidate.entries


def is_fail(candidate: ColourList, rescuable_ref: ColourList,
            pair: DisagreementPair, side: Side) -> bool:
    """Special with the unhelpful orientation (the complement of good)."""
    if not is_special(candidate, rescuable_ref, pair, side):
        return False
    return not is_good(candidate, rescuable_ref, pair, side)


def p_free_exact(d: int, k: int) -> Fraction:
    """Probability that a fixed colour other than the parent's is absent from
    a list of d broadcast entries."""
    _check_dk(d, k)
    return (1 - Fraction(1, k - 1)) ** d


def p_bad_exact(d: int, k: int) -> Fraction:
    """Probability that a fixed list slot is bad: the slot colour hits the
    opposite pair colour and the grandchild list contains this side's colour."""
    _check_dk(d, k)
    return Fraction(1, k - 1) * (1 - (1 - Fraction(1, k - 1)) ** d)


def expected_bad(d: int, k: int) -> tuple[Fraction, Fraction]:
    """Expected number of bad slots among d children, with its d/(k-1) bound."""
    return d * p_bad_exact(d, k), Fraction(d, k - 1)


def _check_dk(d: int, k: int) -> None:
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if k < 3:
        raise ValueError(f"list classification needs k >= 3, got {k}")
