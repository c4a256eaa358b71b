"""Couplings of two broadcast colourings whose roots disagree.

Two constructions are provided.  The naive coupling matches children of a
disagreeing pair by a maximal coupling, independently, all the way down; every
disagreeing pair it creates is bicoloured.  The improved coupling works in
two-level blocks: it partially reveals the child lists (phase 1), associates
lists across the two sides through an involution f built from the revealed
good/fail orientations (phase 2), and only then reveals full lists, coupling
associated lists together (phase 3).  Disagreements two levels down then come
only from non-rescuable bad lists, rescuable lists left unmatched, and fail
lists left unmatched.

Both sides of the improved coupling keep their exact conditional law at every
revelation step.  When a rescuable pair has a matched surplus good list, the
two sides cannot share the exact unused colour set: each side's posterior for
its own unused set given the revealed bits is a class law over subset sizes,
and the good list matched across sides carries a different class law than the
rescuable list it replaces.  The construction couples those class laws
maximally (reusing the latently drawn X-side set as its own posterior sample),
resizes sets by nesting so subset marginals stay uniform, and pushes list
contents across mismatched slot or set choices through colour transpositions
and per-position maximal couplings of the exact sequential laws.  Leftover
mismatches are recorded as residual disagreements.
"""
from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb
from typing import Optional

import numpy as np

from ._samplers import (
    NotOneSeq,
    ReqSeq,
    SurjSeq,
    couple_lists,
    couple_uniform_sets,
    sample_not_exactly_one,
    sample_surjection,
    sample_uniform_entries,
    sample_with_required,
    surjection_count,
    transpose_pair,
)
from .broadcast import Colouring, Palette, sample_broadcast, sample_nonparent
from .classify import DisagreementPair
from .tree_model import TreeShape, children, level_of, vertex_count

log = logging.getLogger(__name__)

SOURCE_NON_RESCUABLE = "non-rescuable-bad"
SOURCE_RESCUABLE = "unmatched-rescuable"
SOURCE_FAIL = "unmatched-fail"
SOURCE_CHILD = "disagreeing-child"
SOURCE_MAXIMAL = "maximal-child"

GRANDCHILD_SOURCES = (SOURCE_NON_RESCUABLE, SOURCE_RESCUABLE, SOURCE_FAIL)


@dataclass(frozen=True)
class DisagreementRecord:
    """One position where the two colourings differ.

    Inside a CoupledBlock ``vertex`` is block-relative: children are 0..d-1,
    grandchild g of child p is d + p*d + g.  Tree-level drivers re-emit
    records with global vertex indices.  ``residual`` marks mismatches left
    by the cross-side class couplings of a good-to-rescuable match.
    """

    vertex: int
    level: int
    source: str
    x_colour: int
    y_colour: int
    residual: bool = False


@dataclass
class BlockTables:
    """Per-(d,k) probabilities of the improved coupling, floats derived from
    exact rationals once and cached."""

    d: int
    k: int
    p_member: float
    p_bad_given_member: float
    p_resc_given_bad: float
    p_exactly_one: float
    # indexed by u = |unused set|, entries 0..k-2 (index 0 unused)
    unused_cum: tuple[float, ...]
    p_special_given_u: tuple[float, ...]
    p_plain_branch_given_u: tuple[float, ...]


@lru_cache(maxsize=None)
def block_tables(d: int, k: int) -> BlockTables:
    if k < 4:
        raise ValueError(f"improved coupling needs k >= 4, got {k}")
    one = Fraction(1)
    a_free = (one - Fraction(1, k - 1)) ** d
    b_free = (one - Fraction(2, k - 1)) ** d
    p_e = 2 * (a_free - b_free)
    n_contain = (k - 1) ** d - (k - 2) ** d
    p_resc = one - Fraction(surjection_count(d, k - 1), n_contain)
    # class weights of the unused-set size among rescuable lists
    weights = [comb(k - 2, u) * surjection_count(d, k - 1 - u)
               for u in range(0, k - 1)]
    weights[0] = 0
    total = sum(weights)
    cum, acc = [0.0], Fraction(0)
    for u in range(1, k - 1):
        acc += Fraction(weights[u], total)
        cum.append(float(acc))
    cum[-1] = 1.0
    p_special = [0.0] + [float(p_e * Fraction(u, k - 2))
                         for u in range(1, k - 1)]
    p_plain = [0.0] + [
        float((1 - p_e) / (1 - p_e * Fraction(u, k - 2)))
        for u in range(1, k - 1)
    ]
    return BlockTables(
        d, k,
        p_member=float(Fraction(1, k - 1)),
        p_bad_given_member=float(1 - a_free),
        p_resc_given_bad=float(p_resc),
        p_exactly_one=float(p_e),
        unused_cum=tuple(cum),
        p_special_given_u=tuple(p_special),
        p_plain_branch_given_u=tuple(p_plain),
    )


@lru_cache(maxsize=None)
def _success_laws(d: int, k: int,
                  n_s: int, n_p: int) -> tuple[tuple[float, ...], ...]:
    """Class laws over the unused-set size u = 0..k-2 in a group whose
    rescuable pair has a matched surplus good list.

    The first law is the posterior of the rescuable list's unused-set size
    given n_s special and n_p non-special members in its group; the second is
    the class law of a good list, which is also its class law given any fixed
    value of its slot.  Both are uniform over sets within a class."""
    t = block_tables(d, k)
    logs1: list[Optional[float]] = []
    logs2: list[Optional[float]] = []
    for u in range(0, k - 1):
        weight = comb(k - 2, u) * surjection_count(d, k - 1 - u) if u else 0
        if weight == 0:
            logs1.append(None)
            logs2.append(None)
            continue
        logw = math.log(weight)
        p_s = t.p_special_given_u[u]
        logs1.append(logw + n_s * math.log(p_s) + n_p * math.log1p(-p_s))
        logs2.append(logw + math.log(u))

    def norm(logs: list[Optional[float]]) -> tuple[float, ...]:
        top = max(x for x in logs if x is not None)
        raw = [math.exp(x - top) if x is not None else 0.0 for x in logs]
        total = sum(raw)
        return tuple(x / total for x in raw)

    return norm(logs1), norm(logs2)


def _sample_class(weights: tuple[float, ...], rng: random.Random) -> int:
    r = rng.random()
    acc = 0.0
    last = 0
    for u, w in enumerate(weights):
        if w <= 0.0:
            continue
        acc += w
        last = u
        if r < acc:
            return u
    return last


def _max_from_sample(u_given: int, law_from: tuple[float, ...],
                     law_to: tuple[float, ...],
                     rng: random.Random) -> tuple[bool, int]:
    """Extend a sample of ``law_from`` to a maximally coupled sample of
    ``law_to``: keep it with probability min(1, to/from), otherwise redraw
    from the residual of ``law_to``."""
    p_from = law_from[u_given]
    p_to = law_to[u_given]
    if p_from <= 0.0 or rng.random() * p_from < min(p_from, p_to):
        return True, u_given
    residual = [max(0.0, b - a) for a, b in zip(law_from, law_to)]
    total = sum(residual)
    if total <= 0.0:
        return True, u_given
    return False, _sample_class(tuple(x / total for x in residual), rng)


@dataclass
class PartialState:
    """Outcome of phase 1: revealed predicates per child index, shared by
    both sides of the coupling."""

    pair: DisagreementPair
    d: int
    k: int
    membership: list[bool]
    bad: list[bool]
    rescuable: list[bool]
    unused: dict[int, tuple[int, ...]]
    partitions: dict[int, list[int]]
    special: dict[int, list[bool]]

    def check(self) -> None:
        seen: set[int] = set()
        for i, part in self.partitions.items():
            if not self.rescuable[i]:
                raise ValueError(f"partition owner {i} is not rescuable")
            for j in part:
                if self.membership[j] or self.bad[j] or j in seen:
                    raise ValueError(f"bad partition member {j}")
                seen.add(j)
        sizes = [len(p) for p in self.partitions.values()]
        if sizes and max(sizes) - min(sizes) > 1:
            raise ValueError("partition sizes differ by more than 1")


@dataclass
class Association:
    """Outcome of phase 2: the involution f and the leftover sets."""

    f: list[int]
    matched_pairs: list[tuple[int, int]]
    delta_sets: dict[int, tuple[int, ...]]
    statuses: dict[int, str]

    def check(self) -> None:
        for i, j in enumerate(self.f):
            if self.f[j] != i:
                raise ValueError("f is not an involution")
        for i, delta in self.delta_sets.items():
            for j in delta:
                if self.f[j] != j:
                    raise ValueError(f"delta member {j} is matched")


@dataclass
class CoupledBlock:
    """Two coupled levels below a disagreeing pair.

    The colour arrays are None when the block was run in counts-only mode; the
    records are always present (their positions are slot-aligned rather than
    permuted in counts-only mode, which leaves every per-level count and
    colour pair unchanged in law).
    """

    pair: DisagreementPair
    d: int
    k: int
    x_children: Optional[list[int]]
    y_children: Optional[list[int]]
    x_grand: Optional[list[list[int]]]
    y_grand: Optional[list[list[int]]]
    records: list[DisagreementRecord]

    def child_disagreements(self) -> int:
        return sum(1 for r in self.records if r.level == 1)

    def grand_disagreements(self) -> int:
        return sum(1 for r in self.records if r.level == 2)


def maximal_child_coupling(k: int, a: int, b: int,
                           rng: random.Random) -> tuple[int, int]:
    """One child colour pair under the maximal coupling of uniform laws on
    [k] minus a and [k] minus b.  On disagreement the pair is (b, a)."""
    if a == b:
        raise ValueError("parent colours must disagree")
    Palette(k).check(a)
    Palette(k).check(b)
    if k == 2:
        return b, a
    if rng.random() < (k - 2) / (k - 1):
        shared = rng.choice([x for x in range(1, k + 1) if x != a and x != b])
        return shared, shared
    return b, a


def phase1(pair: DisagreementPair, d: int, k: int,
           rng: random.Random) -> PartialState:
    """Partial revelation: membership, badness, rescuability, shared unused
    sets, candidate partitions, and specialness bits."""
    pair.check(k)
    t = block_tables(d, k)
    free = [x for x in range(1, k + 1) if x != pair.c and x != pair.q]
    membership = [rng.random() < t.p_member for _ in range(d)]
    bad = [m and rng.random() < t.p_bad_given_member for m in membership]
    rescuable = [b and rng.random() < t.p_resc_given_bad for b in bad]
    unused: dict[int, tuple[int, ...]] = {}
    for i in range(d):
        if rescuable[i]:
            x = rng.random()
            u = 1
            while x >= t.unused_cum[u]:
                u += 1
            unused[i] = tuple(sorted(rng.sample(free, u)))
    owners = [i for i in range(d) if rescuable[i]]
    partitions: dict[int, list[int]] = {i: [] for i in owners}
    if owners:
        for pos, j in enumerate(x for x in range(d) if not membership[x]):
            partitions[owners[pos % len(owners)]].append(j)
    special = {
        i: [rng.random() < t.p_special_given_u[len(unused[i])]
            for _ in partitions[i]]
        for i in owners
    }
    state = PartialState(pair, d, k, membership, bad, rescuable,
                         unused, partitions, special)
    state.check()
    return state


def phase2(state: PartialState, rng: random.Random) -> Association:
    """List association: reveal special pairs as good or fail in ascending
    index order, stop per rescuable pair when the goods exceed the fails by
    one or the specials run out, and build the involution f."""
    f = list(range(state.d))
    matched: list[tuple[int, int]] = []
    delta: dict[int, tuple[int, ...]] = {}
    statuses: dict[int, str] = {}
    for i in sorted(state.partitions):
        part = state.partitions[i]
        specials = [j for j, s in zip(part, state.special[i]) if s]
        for j, s in zip(part, state.special[i]):
            if not s:
                statuses[j] = "plain"
        open_fails: list[int] = []
        surplus = False
        pos = 0
        for pos, j in enumerate(specials):
            if rng.random() < 0.5:
                statuses[j] = "good"
                if open_fails:
                    s = open_fails.pop(0)
                    matched.append((j, s))
                    f[j], f[s] = s, j
                else:
                    matched.append((j, i))
                    f[i], f[j] = j, i
                    surplus = True
                    break
            else:
                statuses[j] = "fail"
                open_fails.append(j)
        for j in specials[pos + 1:]:
            statuses.setdefault(j, "unrevealed-special")
        delta[i] = tuple(open_fails) + (() if surplus else (i,))
    assoc = Association(f, matched, delta, statuses)
    assoc.check()
    return assoc


def phase3(state: PartialState, assoc: Association, pair: DisagreementPair,
           rng: random.Random, materialize: bool = True) -> CoupledBlock:
    """Full revelation: draw every list on both sides, coupling associated
    lists together, then assign list slots to physical children through one
    shared permutation (X uses it directly, Y composes it with f)."""
    d, k = state.d, state.k
    c, q = pair.c, pair.q
    t = block_tables(d, k)
    free = tuple(x for x in range(1, k + 1) if x != c and x != q)
    not_q = tuple(x for x in range(1, k + 1) if x != q)
    x_slot = [0] * d
    y_slot = [0] * d
    x_list: list[Optional[tuple[int, ...]]] = [None] * d
    y_list: list[Optional[tuple[int, ...]]] = [None] * d
    # source of grandchild disagreements, per X-side list index
    pair_source: dict[int, tuple[str, bool]] = {}

    for i in range(d):
        if state.membership[i]:
            x_slot[i], y_slot[i] = q, c
            if not state.bad[i]:
                if materialize:
                    x_list[i] = y_list[i] = sample_uniform_entries(free, d, rng)
            elif not state.rescuable[i]:
                lx = sample_surjection(not_q, d, rng)
                x_list[i] = lx
                y_list[i] = transpose_pair(lx, c, q)
                pair_source[i] = (SOURCE_NON_RESCUABLE, False)
        elif not state.partitions and materialize:
            # no rescuable pair: the index is unconstrained, coupled identically
            w = rng.choice(free)
            x_slot[i] = y_slot[i] = w
            x_list[i] = y_list[i] = sample_uniform_entries(
                tuple(x for x in range(1, k + 1) if x != w), d, rng)

    for i in sorted(state.partitions):
        u_x = state.unused[i]
        ux = len(u_x)
        covered_x = tuple(sorted(set(not_q) - set(u_x)))
        surplus_good = assoc.f[i] if assoc.f[i] != i else None
        if surplus_good is None:
            _phase3_failure_group(state, assoc, pair, rng, materialize, t,
                                  i, u_x, covered_x, free,
                                  x_slot, y_slot, x_list, y_list, pair_source)
        else:
            _phase3_success_group(state, assoc, pair, rng, materialize, t,
                                  i, surplus_good, u_x, covered_x, free,
                                  not_q, x_slot, y_slot, x_list, y_list,
                                  pair_source)

    if materialize:
        perm = list(range(d))
        rng.shuffle(perm)
        subperms = []
        for _ in range(d):
            sp = list(range(d))
            rng.shuffle(sp)
            subperms.append(sp)
    else:
        perm = list(range(d))
        subperms = [list(range(d))] * d

    records: list[DisagreementRecord] = []
    x_children = [x_slot[perm[p]] for p in range(d)]
    y_children = [y_slot[assoc.f[perm[p]]] for p in range(d)]
    x_grand: list[list[int]] = []
    y_grand: list[list[int]] = []
    for p in range(d):
        s = perm[p]
        f_s = assoc.f[s]
        if x_children[p] != y_children[p]:
            records.append(DisagreementRecord(
                p, 1, SOURCE_CHILD, x_children[p], y_children[p]))
        lx, ly = x_list[s], y_list[f_s]
        if lx is None or ly is None:
            x_grand.append(None)  # type: ignore[arg-type]
            y_grand.append(None)  # type: ignore[arg-type]
            continue
        sp = subperms[p]
        gx = [lx[sp[g]] for g in range(d)]
        gy = [ly[sp[g]] for g in range(d)]
        x_grand.append(gx)
        y_grand.append(gy)
        if gx != gy:
            source, residual = pair_source[s]
            for g in range(d):
                if gx[g] != gy[g]:
                    records.append(DisagreementRecord(
                        d + p * d + g, 2, source, gx[g], gy[g], residual))
    return CoupledBlock(
        pair, d, k,
        x_children if materialize else None,
        y_children if materialize else None,
        x_grand if materialize else None,
        y_grand if materialize else None,
        records)


def _phase3_failure_group(state: PartialState, assoc: Association,
                          pair: DisagreementPair, rng: random.Random,
                          materialize: bool, t: BlockTables,
                          i: int, u_x: tuple[int, ...],
                          covered_x: tuple[int, ...], free: tuple[int, ...],
                          x_slot: list[int], y_slot: list[int],
                          x_list: list, y_list: list,
                          pair_source: dict[int, tuple[str, bool]]) -> None:
    """A rescuable pair with no matched surplus good.  The association keeps
    every list index coupled to itself, so the unused set can be shared
    verbatim across the sides: every group member's list transports to the
    other side by the c/q transposition or is outright identical."""
    d, k = state.d, state.k
    c, q = pair.c, pair.q
    ux = len(u_x)
    lx = sample_surjection(covered_x, d, rng)
    x_list[i] = lx
    y_list[i] = transpose_pair(lx, c, q)
    pair_source[i] = (SOURCE_RESCUABLE, False)
    for j in state.partitions[i]:
        status = assoc.statuses[j]
        if status == "plain" and materialize:
            if rng.random() < t.p_plain_branch_given_u[ux]:
                w = rng.choice(free)
                x_slot[j] = y_slot[j] = w
                x_list[j] = y_list[j] = sample_not_exactly_one(
                    k, w, c, q, d, rng)
            else:
                w = rng.choice([x for x in free if x not in u_x])
                x_slot[j] = y_slot[j] = w
                present, absent = (c, q) if rng.random() < 0.5 else (q, c)
                alphabet = tuple(x for x in range(1, k + 1)
                                 if x != w and x != absent)
                x_list[j] = y_list[j] = sample_with_required(
                    alphabet, present, d, rng)
        elif status == "unrevealed-special" and materialize:
            w = rng.choice(u_x)
            x_slot[j] = y_slot[j] = w
            present, absent = (c, q) if rng.random() < 0.5 else (q, c)
            alphabet = tuple(x for x in range(1, k + 1)
                             if x != w and x != absent)
            x_list[j] = y_list[j] = sample_with_required(
                alphabet, present, d, rng)
        elif status == "good" and assoc.f[j] != i and materialize:
            # matched good/fail pair: both cross couplings are identities
            s = assoc.f[j]
            w1 = rng.choice(u_x)
            x_slot[j] = y_slot[s] = w1
            e1 = sample_with_required(
                tuple(x for x in range(1, k + 1) if x != w1 and x != c),
                q, d, rng)
            x_list[j] = y_list[s] = e1
            w2 = rng.choice(u_x)
            x_slot[s] = y_slot[j] = w2
            e2 = sample_with_required(
                tuple(x for x in range(1, k + 1) if x != w2 and x != q),
                c, d, rng)
            x_list[s] = y_list[j] = e2
        elif status == "fail" and assoc.f[j] == j:
            w = rng.choice(u_x)
            x_slot[j] = y_slot[j] = w
            lx = sample_with_required(
                tuple(x for x in range(1, k + 1) if x != w and x != q),
                c, d, rng)
            x_list[j] = lx
            y_list[j] = transpose_pair(lx, c, q)
            pair_source[j] = (SOURCE_FAIL, False)


def _phase3_success_group(state: PartialState, assoc: Association,
                          pair: DisagreementPair, rng: random.Random,
                          materialize: bool, t: BlockTables,
                          i: int, j: int, u_x: tuple[int, ...],
                          covered_x: tuple[int, ...], free: tuple[int, ...],
                          not_q: tuple[int, ...],
                          x_slot: list[int], y_slot: list[int],
                          x_list: list, y_list: list,
                          pair_source: dict[int, tuple[str, bool]]) -> None:
    """A rescuable pair whose X rescuable list i is matched to the surplus
    good list j.  The two sides now hold different objects at the same list
    index, so the unused set cannot be shared: each side keeps its own set,
    drawn from its exact posterior class law given the revealed bits, with
    the class choices maximally coupled and the set contents nested so every
    marginal stays exact.  List contents cross the side gap by colour
    transpositions when only the slots differ and by per-position maximal
    couplings of the sequential laws when the sets differ."""
    d, k = state.d, state.k
    c, q = pair.c, pair.q
    ux = len(u_x)
    n_s = sum(state.special[i])
    n_p = len(state.partitions[i]) - n_s
    lam, lam2 = _success_laws(d, k, n_s, n_p)

    # pair 1: X rescuable at i against Y good at j.  Phase 1's unused set is
    # the X-side posterior sample; extend it to a coupled Y-side class draw.
    hit1, uy = _max_from_sample(ux, lam, lam2, rng)
    if hit1:
        u_y = u_x
        wx = wy = rng.choice(u_x)
        if materialize:
            x_list[i] = y_list[j] = sample_surjection(covered_x, d, rng)
    else:
        if uy < ux:
            u_y = tuple(sorted(rng.sample(u_x, uy)))
        else:
            extra = rng.sample([x for x in free if x not in u_x], uy - ux)
            u_y = tuple(sorted(u_x + tuple(extra)))
        covered_y = tuple(sorted(set(not_q) - set(u_y)))
        x_list[i], y_list[j] = couple_lists(
            SurjSeq(covered_x, d), SurjSeq(covered_y, d), d, rng)
        wx, wy = couple_uniform_sets(u_x, u_y, rng)
    x_slot[j], y_slot[j] = wx, wy
    pair_source[i] = (SOURCE_RESCUABLE, True)

    # pair 2: X good at j against Y rescuable at i.  Given its slot, each
    # side's set has a clean class law; build both sets around the slots
    # from one shared ordering of the free colours.
    u2 = _sample_class(lam2, rng)
    hit2, u2y = _max_from_sample(u2, lam2, lam, rng)
    order = rng.sample(free, len(free))
    v_x = tuple(sorted({wx} | set([x for x in order if x != wx][:u2 - 1])))
    v_y = tuple(sorted({wy} | set([x for x in order if x != wy][:u2y - 1])))
    alpha_x = tuple(x for x in range(1, k + 1)
                    if x != c and x not in v_x)
    if v_x == v_y:
        if materialize:
            x_list[j] = y_list[i] = sample_surjection(alpha_x, d, rng)
    else:
        alpha_y = tuple(x for x in range(1, k + 1)
                        if x != c and x not in v_y)
        x_list[j], y_list[i] = couple_lists(
            SurjSeq(alpha_x, d), SurjSeq(alpha_y, d), d, rng)
    pair_source[j] = (SOURCE_RESCUABLE, True)

    vy = len(v_y)
    free_k = tuple(range(1, k + 1))
    for m in state.partitions[i]:
        status = assoc.statuses[m]
        if status == "plain":
            bx = t.p_plain_branch_given_u[ux]
            by = t.p_plain_branch_given_u[vy]
            r0 = rng.random()
            if r0 < min(bx, by):
                # both sides take the first branch: fully shared
                if materialize:
                    w = rng.choice(free)
                    x_slot[m] = y_slot[m] = w
                    x_list[m] = y_list[m] = sample_not_exactly_one(
                        k, w, c, q, d, rng)
            elif r0 >= max(bx, by):
                present, absent = (c, q) if rng.random() < 0.5 else (q, c)
                wxm, wym = couple_uniform_sets(
                    tuple(x for x in free if x not in u_x),
                    tuple(x for x in free if x not in v_y), rng)
                x_slot[m], y_slot[m] = wxm, wym
                if materialize or wxm != wym:
                    lx = sample_with_required(
                        tuple(x for x in free_k
                              if x != wxm and x != absent),
                        present, d, rng)
                    x_list[m] = lx
                    y_list[m] = (lx if wxm == wym
                                 else transpose_pair(lx, wxm, wym))
                    pair_source[m] = (SOURCE_RESCUABLE, True)
            else:
                # the branch choices differ: sample each side in its own
                # branch and couple the contents position by position
                if r0 < bx:
                    wxm = rng.choice(free)
                    law_x = NotOneSeq(
                        tuple(x for x in free_k if x != wxm), c, q, d)
                else:
                    wxm = rng.choice([x for x in free if x not in u_x])
                    px, ax = (c, q) if rng.random() < 0.5 else (q, c)
                    law_x = ReqSeq(
                        tuple(x for x in free_k if x != wxm and x != ax),
                        px, d)
                if r0 < by:
                    wym = rng.choice(free)
                    law_y = NotOneSeq(
                        tuple(x for x in free_k if x != wym), c, q, d)
                else:
                    wym = rng.choice([x for x in free if x not in v_y])
                    py, ay = (c, q) if rng.random() < 0.5 else (q, c)
                    law_y = ReqSeq(
                        tuple(x for x in free_k if x != wym and x != ay),
                        py, d)
                x_slot[m], y_slot[m] = wxm, wym
                x_list[m], y_list[m] = couple_lists(law_x, law_y, d, rng)
                pair_source[m] = (SOURCE_RESCUABLE, True)
        elif status == "unrevealed-special":
            present, absent = (c, q) if rng.random() < 0.5 else (q, c)
            wxm, wym = couple_uniform_sets(u_x, v_y, rng)
            x_slot[m], y_slot[m] = wxm, wym
            if materialize or wxm != wym:
                lx = sample_with_required(
                    tuple(x for x in free_k if x != wxm and x != absent),
                    present, d, rng)
                x_list[m] = lx
                y_list[m] = (lx if wxm == wym
                             else transpose_pair(lx, wxm, wym))
                pair_source[m] = (SOURCE_RESCUABLE, True)
        elif status == "good" and assoc.f[m] != i:
            # matched good/fail pair: cross couplings transport by a slot
            # transposition, leaking only where the slot draws differ
            s = assoc.f[m]
            wxt, wys = couple_uniform_sets(u_x, v_y, rng)
            wxs, wyt = couple_uniform_sets(u_x, v_y, rng)
            x_slot[m], y_slot[s] = wxt, wys
            x_slot[s], y_slot[m] = wxs, wyt
            if materialize or wxt != wys:
                e1 = sample_with_required(
                    tuple(x for x in free_k if x != wxt and x != c),
                    q, d, rng)
                x_list[m] = e1
                y_list[s] = (e1 if wxt == wys
                             else transpose_pair(e1, wxt, wys))
                pair_source[m] = (SOURCE_FAIL, True)
            if materialize or wxs != wyt:
                e2 = sample_with_required(
                    tuple(x for x in free_k if x != wxs and x != q),
                    c, d, rng)
                x_list[s] = e2
                y_list[m] = (e2 if wxs == wyt
                             else transpose_pair(e2, wxs, wyt))
                pair_source[s] = (SOURCE_FAIL, True)
        elif status == "fail" and assoc.f[m] == m:
            wxm, wym = couple_uniform_sets(u_x, v_y, rng)
            x_slot[m], y_slot[m] = wxm, wym
            lx = sample_with_required(
                tuple(x for x in free_k if x != wxm and x != q), c, d, rng)
            x_list[m] = lx
            ly = lx if wxm == wym else transpose_pair(lx, wxm, wym)
            y_list[m] = transpose_pair(ly, c, q)
            pair_source[m] = (SOURCE_FAIL, False)


def couple_block(pair: DisagreementPair, d: int, k: int, rng: random.Random,
                 materialize: bool = True) -> CoupledBlock:
    """Run all three phases of the improved coupling for one block."""
    state = phase1(pair, d, k, rng)
    assoc = phase2(state, rng)
    return phase3(state, assoc, pair, rng, materialize=materialize)


def naive_couple_tree(shape: TreeShape, k: int, c: int, q: int,
                      rng: random.Random
                      ) -> tuple[Colouring, Colouring, list[list[DisagreementRecord]]]:
    """The naive coupling: identical below agreements, per-child maximal
    couplings below disagreements.  Every disagreeing pair is bicoloured."""
    if c == q:
        raise ValueError("root colours must disagree (use the improved "
                         "driver for the identity case)")
    Palette(k).check(c)
    Palette(k).check(q)
    n = vertex_count(shape)
    xs = np.empty(n, dtype=np.int64)
    ys = np.empty(n, dtype=np.int64)
    xs[0], ys[0] = c, q
    records: list[list[DisagreementRecord]] = [[] for _ in range(shape.height + 1)]
    for v in range(n):
        a, b = int(xs[v]), int(ys[v])
        if a == b:
            for ch in children(shape, v):
                xs[ch] = ys[ch] = sample_nonparent(k, a, rng)
        else:
            lvl = level_of(shape, v) + 1
            for ch in children(shape, v):
                xa, yb = maximal_child_coupling(k, a, b, rng)
                xs[ch], ys[ch] = xa, yb
                if xa != yb:
                    if {xa, yb} != {c, q}:
                        raise AssertionError("naive disagreement not bicoloured")
                    records[lvl].append(
                        DisagreementRecord(ch, lvl, SOURCE_MAXIMAL, xa, yb))
    return Colouring(shape, xs), Colouring(shape, ys), records


def couple_tree_improved(shape: TreeShape, k: int, c: int, q: int,
                         rng: random.Random
                         ) -> tuple[Colouring, Colouring, list[list[DisagreementRecord]]]:
    """Recursive driver of the improved coupling.

    Agreeing pairs get identical subtrees; disagreeing pairs get one coupled
    block for the next two levels and recursion on disagreeing grandchild
    pairs; a final odd level is coupled child by child.  c = q yields the
    identity coupling, k < 4 falls back to the naive coupling.
    """
    Palette(k).check(c)
    Palette(k).check(q)
    n = vertex_count(shape)
    if c == q:
        col = sample_broadcast(shape, k, c, rng)
        twin = Colouring(shape, col.colours.copy())
        return col, twin, [[] for _ in range(shape.height + 1)]
    if k < 4:
        log.info("improved coupling needs k >= 4, got k=%d: using the naive "
                 "coupling", k)
        return naive_couple_tree(shape, k, c, q, rng)
    xs = np.empty(n, dtype=np.int64)
    ys = np.empty(n, dtype=np.int64)
    xs[0], ys[0] = c, q
    records: list[list[DisagreementRecord]] = [[] for _ in range(shape.height + 1)]
    d = shape.degree
    stack: list[tuple[int, int]] = [(0, 0)]  # (vertex, level), xs/ys already set
    while stack:
        v, lvl = stack.pop()
        a, b = int(xs[v]), int(ys[v])
        if lvl == shape.height:
            continue
        if a == b:
            _fill_identical(shape, k, v, xs, ys, rng)
            continue
        if shape.height - lvl == 1:
            for ch in children(shape, v):
                xa, yb = maximal_child_coupling(k, a, b, rng)
                xs[ch], ys[ch] = xa, yb
                if xa != yb:
                    records[lvl + 1].append(DisagreementRecord(
                        ch, lvl + 1, SOURCE_MAXIMAL, xa, yb))
            continue
        block = couple_block(DisagreementPair(a, b), d, k, rng)
        chs = list(children(shape, v))
        grand = [list(children(shape, ch)) for ch in chs]
        for p, ch in enumerate(chs):
            xs[ch] = block.x_children[p]
            ys[ch] = block.y_children[p]
            for g, gv in enumerate(grand[p]):
                xs[gv] = block.x_grand[p][g]
                ys[gv] = block.y_grand[p][g]
        for rec in block.records:
            if rec.level == 1:
                gv = chs[rec.vertex]
            else:
                rel = rec.vertex - d
                gv = grand[rel // d][rel % d]
            records[lvl + rec.level].append(DisagreementRecord(
                gv, lvl + rec.level, rec.source,
                rec.x_colour, rec.y_colour, rec.residual))
        for p in range(d):
            for g, gv in enumerate(grand[p]):
                stack.append((gv, lvl + 2))
    return Colouring(shape, xs), Colouring(shape, ys), records


def _fill_identical(shape: TreeShape, k: int, v: int,
                    xs: np.ndarray, ys: np.ndarray,
                    rng: random.Random) -> None:
    """Sample one broadcast subtree below v and give it to both sides."""
    stack = [v]
    while stack:
        w = stack.pop()
        pc = int(xs[w])
        for ch in children(shape, w):
            xs[ch] = ys[ch] = sample_nonparent(k, pc, rng)
            stack.append(ch)
