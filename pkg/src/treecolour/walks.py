"""Symmetric +-1 walks absorbed at -1, in exact rational arithmetic.

These walks mirror the revelation order of the repair phase of the improved
coupling: a fail step is +1, a good step is -1, and absorption at -1 of the
shifted walk corresponds to the repair succeeding.  Everything here is exact,
which is what makes the optional-stopping identity testable to the digit.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction


def first_passage_prob(i: int) -> Fraction:
    """Probability that the walk first hits -1 at step 2i+1.

    Catalan number over 2^(2i+1), by the reflection principle.
    """
    if i < 0:
        raise ValueError(f"i must be >= 0, got {i}")
    return Fraction(math.comb(2 * i, i), (i + 1)) / 2 ** (2 * i + 1)


@dataclass
class WalkDistribution:
    """Exact state of the absorbed walk after ``cap`` steps."""

    cap: int
    masses: dict[int, Fraction]       # -1 is the absorbing state
    survival: Fraction
    expected_plus_one: Fraction       # E[W+1] with the absorbed state worth 0
    conditional_mean: Fraction | None  # E[W | not absorbed], None if survival=0


def absorbed_walk_dp(cap: int) -> WalkDistribution:
    """Distribution of the walk started at 0, +-1 steps with probability 1/2
    each, absorbed on hitting -1, run for ``cap`` steps."""
    if cap < 0:
        raise ValueError(f"cap must be >= 0, got {cap}")
    half = Fraction(1, 2)
    masses: dict[int, Fraction] = {0: Fraction(1)}
    for _ in range(cap):
        nxt: dict[int, Fraction] = {}
        for pos, m in masses.items():
            if pos == -1:
                nxt[-1] = nxt.get(-1, Fraction(0)) + m
                continue
            for step in (-1, 1):
                nxt[pos + step] = nxt.get(pos + step, Fraction(0)) + m * half
        masses = nxt
    absorbed = masses.get(-1, Fraction(0))
    survival = 1 - absorbed
    # Absorbed mass sits at -1, so it contributes 0 to E[W+1] on its own.
    expected_plus_one = sum(((pos + 1) * m for pos, m in masses.items()),
                            Fraction(0))
    if survival > 0:
        conditional_mean = sum((pos * m for pos, m in masses.items() if pos >= 0),
                               Fraction(0)) / survival
    else:
        conditional_mean = None
    return WalkDistribution(cap, masses, survival, expected_plus_one,
                            conditional_mean)


def conditional_positive_mean(cap: int) -> tuple[Fraction, float, bool]:
    """E[W_cap | walk survived], the sqrt(2*cap/pi)*(1+3/(2*cap)) comparison
    value, and whether the exact mean exceeds it."""
    if cap < 1:
        raise ValueError(f"cap must be >= 1, got {cap}")
    dist = absorbed_walk_dp(cap)
    assert dist.conditional_mean is not None
    comparison = math.sqrt(2 * cap / math.pi) * (1 + 3 / (2 * cap))
    return dist.conditional_mean, comparison, float(dist.conditional_mean) > comparison


@dataclass
class SMatrix:
    """Two-row 0/1 matrix recording a round-structured revelation sequence.

    Column (1,0) raises the running sum ``sum(row1 - row2)`` by one, (0,1)
    lowers it.  Once the running sum hits 0 every further column would be
    identical in both rows, so they are not materialised.
    """

    columns: list[tuple[int, int]] = field(default_factory=list)
    round_starts: list[int] = field(default_factory=list)

    def running_sum(self) -> int:
        return sum(x - y for x, y in self.columns)


def s_matrix_run(n_columns: int, cap_l: int, rng: random.Random) -> tuple[SMatrix, int]:
    """Build an S-matrix in rounds from a budget of ``n_columns`` columns.

    The first column is the fixed (1,0).  Each round spawns one sub-walk per
    unit of the current running sum; a sub-walk appends fair +-1 columns until
    its own relative sum hits -1 or ``cap_l`` columns are used.  Construction
    stops when the running sum reaches 0 or the column budget is exhausted.
    Returns the matrix and the final running sum.
    """
    if n_columns < 1:
        raise ValueError(f"need at least one column, got {n_columns}")
    if cap_l < 1:
        raise ValueError(f"cap_l must be >= 1, got {cap_l}")
    sm = SMatrix(columns=[(1, 0)], round_starts=[0])
    total = 1
    while total > 0 and len(sm.columns) < n_columns:
        sm.round_starts.append(len(sm.columns))
        for _ in range(total):
            rel = 0
            used = 0
            while rel > -1 and used < cap_l and len(sm.columns) < n_columns:
                if rng.random() < 0.5:
                    sm.columns.append((1, 0))
                    rel += 1
                    total += 1
                else:
                    sm.columns.append((0, 1))
                    rel -= 1
                    total -= 1
                used += 1
            if total == 0 or len(sm.columns) >= n_columns:
                # Once the running sum is 0 both rows agree forever, so the
                # rest of the round (and run) is not materialised.
                break
    assert total == sm.running_sum()
    assert total >= 0
    return sm, total
