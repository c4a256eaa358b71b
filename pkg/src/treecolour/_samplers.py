"""Exact conditional samplers for lists of i.i.d. uniform colours.

Everything here samples from a conditioned product law without rejection
loops whose acceptance could degenerate: required-colour conditioning is done
by a sequential exact rule, surjectivity conditioning by a dynamic program
over covered-colour counts.  Counting tables use Python integers; the per-step
probabilities handed to the RNG are floats computed from exact ratios.
"""
from __future__ import annotations

import random
from fractions import Fraction
from functools import lru_cache


def transpose_pair(entries: tuple[int, ...], c: int, q: int) -> tuple[int, ...]:
    """Swap the colours c and q throughout the entries."""
    return tuple(q if e == c else c if e == q else e for e in entries)


def sample_uniform_entries(colours: tuple[int, ...], d: int,
                           rng: random.Random) -> tuple[int, ...]:
    """d i.i.d. picks from the given colour tuple."""
    return tuple(rng.choice(colours) for _ in range(d))


@lru_cache(maxsize=None)
def _required_probs(alphabet_size: int, d: int) -> tuple[float, ...]:
    # probs[n-1] = Pr[next entry hits the required colour | it has not
    # appeared yet and n entries remain] = (1/a) / (1 - (1-1/a)^n)
    a = alphabet_size
    miss = Fraction(a - 1, a)
    return tuple(
        float(Fraction(1, a) / (1 - miss ** n)) for n in range(1, d + 1)
    )


def sample_with_required(colours: tuple[int, ...], required: int, d: int,
                         rng: random.Random) -> tuple[int, ...]:
    """d i.i.d. picks from ``colours`` conditioned on ``required`` appearing.

    Sequential exact sampling: while the required colour is still missing,
    each entry hits it with its exact conditional probability; afterwards the
    remaining entries are unconditioned.
    """
    if required not in colours:
        raise ValueError("required colour outside the alphabet")
    a = len(colours)
    if a == 1:
        return (required,) * d
    probs = _required_probs(a, d)
    others = tuple(x for x in colours if x != required)
    out = []
    seen = False
    for n in range(d, 0, -1):
        if not seen and rng.random() < probs[n - 1]:
            out.append(required)
            seen = True
        elif seen:
            out.append(rng.choice(colours))
        else:
            out.append(rng.choice(others))
    return tuple(out)


def sample_not_exactly_one(k: int, slot: int, c: int, q: int, d: int,
                           rng: random.Random) -> tuple[int, ...]:
    """d i.i.d. picks uniform on [k] minus the slot colour, conditioned on NOT
    containing exactly one of {c, q}.  Rejection; acceptance is bounded away
    from zero for every k >= 4."""
    colours = tuple(x for x in range(1, k + 1) if x != slot)
    while True:
        entries = sample_uniform_entries(colours, d, rng)
        if (c in entries) == (q in entries):
            return entries


@lru_cache(maxsize=None)
def _surjection_table(a: int, d: int) -> tuple[tuple[int, ...], ...]:
    """T[n][j] = number of length-n sequences over an a-letter alphabet that
    use all of j designated still-unseen letters (the other a-j letters are
    unconstrained)."""
    table = [[0] * (a + 1) for _ in range(d + 1)]
    table[0][0] = 1
    for n in range(1, d + 1):
        for j in range(0, a + 1):
            hit = j * table[n - 1][j - 1] if j >= 1 else 0
            table[n][j] = hit + (a - j) * table[n - 1][j]
    return tuple(tuple(row) for row in table)


@lru_cache(maxsize=None)
def _surjection_step_probs(a: int, d: int) -> tuple[tuple[float, ...], ...]:
    # probs[n][j] = Pr[next entry is one of the j unseen letters | n entries
    # remain and the remaining sequence must cover all j]
    table = _surjection_table(a, d)
    probs = [[0.0] * (a + 1) for _ in range(d + 1)]
    for n in range(1, d + 1):
        for j in range(1, min(a, n) + 1):
            if table[n][j]:
                probs[n][j] = float(
                    Fraction(j * table[n - 1][j - 1], table[n][j]))
    return tuple(tuple(row) for row in probs)


def surjection_count(d: int, a: int) -> int:
    """Number of length-d sequences over an a-letter alphabet using every
    letter (0 when a > d or a < 0)."""
    if a < 0 or a > d:
        return 0
    return _surjection_table(a, d)[d][a]


def sample_surjection(colours: tuple[int, ...], d: int,
                      rng: random.Random) -> tuple[int, ...]:
    """Uniform length-d sequence over ``colours`` in which every colour
    appears.  Exact DP sampling, no rejection."""
    a = len(colours)
    if a > d:
        raise ValueError(f"cannot cover {a} colours with {d} entries")
    probs = _surjection_step_probs(a, d)
    unseen = list(colours)
    seen: list[int] = []
    out = []
    for n in range(d, 0, -1):
        j = len(unseen)
        if j and (j == n or rng.random() < probs[n][j]):
            pick = unseen.pop(rng.randrange(j))
            seen.append(pick)
        else:
            pick = seen[rng.randrange(len(seen))]
        out.append(pick)
    return tuple(out)


class ReqSeq:
    """Sequential law of i.i.d. picks from ``colours`` conditioned on
    ``required`` appearing, exposed position by position for coupled
    sampling."""

    def __init__(self, colours: tuple[int, ...], required: int, d: int):
        if required not in colours:
            raise ValueError("required colour outside the alphabet")
        self.colours = colours
        self.required = required
        self.n = d
        self.seen = False
        self._probs = _required_probs(len(colours), d)

    def dist(self) -> dict[int, float]:
        a = len(self.colours)
        if self.seen:
            return {col: 1.0 / a for col in self.colours}
        p = self._probs[self.n - 1]
        out = {col: (1.0 - p) / (a - 1) for col in self.colours
               if col != self.required}
        out[self.required] = p
        return out

    def push(self, col: int) -> None:
        if col == self.required:
            self.seen = True
        self.n -= 1


class NotOneSeq:
    """Sequential law of i.i.d. picks from ``colours`` conditioned on the
    final sequence NOT containing exactly one of {c, q}."""

    def __init__(self, colours: tuple[int, ...], c: int, q: int, d: int):
        if c not in colours or q not in colours:
            raise ValueError("c and q must lie in the alphabet")
        self.colours = colours
        self.c, self.q = c, q
        self.n = d
        self.has_c = False
        self.has_q = False

    @staticmethod
    @lru_cache(maxsize=None)
    def _valid(a: int, has_c: bool, has_q: bool, n: int) -> int:
        if has_c and has_q:
            return a ** n
        if has_c or has_q:
            return a ** n - (a - 1) ** n
        return a ** n - 2 * (a - 1) ** n + 2 * (a - 2) ** n

    def dist(self) -> dict[int, float]:
        a = len(self.colours)
        n = self.n
        w_c = self._valid(a, True, self.has_q, n - 1)
        w_q = self._valid(a, self.has_c, True, n - 1)
        w_o = self._valid(a, self.has_c, self.has_q, n - 1)
        total = w_c + w_q + (a - 2) * w_o
        return {
            col: (w_c if col == self.c else w_q if col == self.q else w_o)
            / total
            for col in self.colours
        }

    def push(self, col: int) -> None:
        if col == self.c:
            self.has_c = True
        elif col == self.q:
            self.has_q = True
        self.n -= 1


class SurjSeq:
    """Sequential law of a uniform sequence covering every colour of the
    alphabet, driven by the surjection-count dynamic program."""

    def __init__(self, colours: tuple[int, ...], d: int):
        if len(colours) > d:
            raise ValueError(
                f"cannot cover {len(colours)} colours with {d} entries")
        self.n = d
        self.unseen = list(colours)
        self.seen: list[int] = []
        self._probs = _surjection_step_probs(len(colours), d)

    def dist(self) -> dict[int, float]:
        j = len(self.unseen)
        if j == self.n:
            return {col: 1.0 / j for col in self.unseen}
        p_unseen = self._probs[self.n][j] if j else 0.0
        out = {col: p_unseen / j for col in self.unseen}
        if self.seen:
            share = (1.0 - p_unseen) / len(self.seen)
            for col in self.seen:
                out[col] = share
        return out

    def push(self, col: int) -> None:
        if col in self.unseen:
            self.unseen.remove(col)
            self.seen.append(col)
        self.n -= 1


def _draw_from(weights: dict[int, float], rng: random.Random) -> int:
    total = sum(weights.values())
    r = rng.random() * total
    acc = 0.0
    last = None
    for col in sorted(weights):
        acc += weights[col]
        last = col
        if r < acc:
            return col
    assert last is not None
    return last


def couple_lists(law_x, law_y, d: int,
                 rng: random.Random) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Sample one list from each sequential law, maximally coupled position
    by position.  Each marginal is exact; positions agree whenever the shared
    uniform lands in the overlap of the two per-position conditionals."""
    xs: list[int] = []
    ys: list[int] = []
    for _ in range(d):
        dx = law_x.dist()
        dy = law_y.dist()
        mins = {col: min(dx.get(col, 0.0), dy.get(col, 0.0))
                for col in set(dx) | set(dy)}
        overlap = sum(mins.values())
        if rng.random() < overlap:
            x = y = _draw_from({c: m for c, m in mins.items() if m > 0}, rng)
        else:
            res_x = {c: p - mins.get(c, 0.0) for c, p in dx.items()
                     if p - mins.get(c, 0.0) > 1e-15}
            res_y = {c: p - mins.get(c, 0.0) for c, p in dy.items()
                     if p - mins.get(c, 0.0) > 1e-15}
            x = _draw_from(res_x or dx, rng)
            y = _draw_from(res_y or dy, rng)
        law_x.push(x)
        law_y.push(y)
        xs.append(x)
        ys.append(y)
    return tuple(xs), tuple(ys)


def couple_uniform_sets(a_set: tuple[int, ...], b_set: tuple[int, ...],
                        rng: random.Random) -> tuple[int, int]:
    """One draw from uniform(a_set) and one from uniform(b_set) under their
    maximal coupling; the two values agree with probability
    |intersection| / max(|a_set|, |b_set|)."""
    inter = sorted(set(a_set) & set(b_set))
    la, lb = len(a_set), len(b_set)
    m = max(la, lb)
    if inter and rng.random() < len(inter) / m:
        v = inter[rng.randrange(len(inter))]
        return v, v
    res_a = {col: 1.0 / la - (1.0 / m if col in inter else 0.0)
             for col in a_set}
    res_b = {col: 1.0 / lb - (1.0 / m if col in inter else 0.0)
             for col in b_set}
    res_a = {c: w for c, w in res_a.items() if w > 1e-15}
    res_b = {c: w for c, w in res_b.items() if w > 1e-15}
    return (_draw_from(res_a or {col: 1.0 for col in a_set}, rng),
            _draw_from(res_b or {col: 1.0 for col in b_set}, rng))
