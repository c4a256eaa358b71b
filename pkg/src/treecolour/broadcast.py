"""Broadcasting a proper colouring down a complete d-ary tree.

The channel re-colours each child uniformly among the k-1 colours different
from its parent.  Colours are the integers 1..k throughout.  Randomness is
always an injected ``random.Random`` so runs are reproducible.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .tree_model import TreeShape, children, parent, vertex_count


@dataclass(frozen=True)
class Palette:
    """The colour set {1, .., k}."""

    k: int

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ValueError(f"need at least 2 colours, got {self.k}")

    def check(self, colour: int) -> None:
        if not 1 <= colour <= self.k:
            raise ValueError(f"colour {colour} outside 1..{self.k}")


@dataclass
class Colouring:
    """Colours of every vertex of a tree, indexed like the BFS layout."""

    shape: TreeShape
    colours: np.ndarray

    def is_proper(self) -> bool:
        for v in range(1, vertex_count(self.shape)):
            if self.colours[v] == self.colours[parent(self.shape, v)]:
                return False
        return True


@dataclass(frozen=True)
class ColourList:
    """The d colours broadcast to the children of a vertex, before the random
    assignment of list slots to physical children."""

    parent_colour: int
    entries: tuple[int, ...]


def transition_row(k: int, parent_colour: int, exact: bool = False):
    """Row of the broadcast channel for the given parent colour.

    Returns a length-k vector indexed by colour-1: zero on the parent colour,
    1/(k-1) elsewhere.  With ``exact`` the entries are Fractions.
    """
    Palette(k).check(parent_colour)
    if exact:
        p = Fraction(1, k - 1)
        return [Fraction(0) if c == parent_colour else p for c in range(1, k + 1)]
    row = np.full(k, 1.0 / (k - 1))
    row[parent_colour - 1] = 0.0
    return row


def sample_nonparent(k: int, parent_colour: int, rng: random.Random) -> int:
    """One colour uniform on {1..k} minus the parent colour."""
    u = rng.randrange(1, k)
    return u if u < parent_colour else u + 1


def sample_broadcast(shape: TreeShape, k: int, root_colour: int,
                     rng: random.Random) -> Colouring:
    Palette(k).check(root_colour)
    n = vertex_count(shape)
    cols = np.empty(n, dtype=np.int64)
    cols[0] = root_colour
    for v in range(n):
        pc = int(cols[v])
        for c in children(shape, v):
            cols[c] = sample_nonparent(k, pc, rng)
    return Colouring(shape, cols)


def sample_list(k: int, parent_colour: int, d: int, rng: random.Random) -> ColourList:
    """A list of d i.i.d. child colours for a vertex of the given colour."""
    Palette(k).check(parent_colour)
    if d < 1:
        raise ValueError(f"list length must be >= 1, got {d}")
    entries = tuple(sample_nonparent(k, parent_colour, rng) for _ in range(d))
    return ColourList(parent_colour, entries)


def assign_by_permutation(lst: ColourList, rng: random.Random) -> tuple[int, ...]:
    """Assign list slots to physical children by a uniform permutation.

    Returns assigned colours: position p receives entry perm[p].  Since the
    entries are i.i.d. this changes nothing in law; it matters only when a
    list takes part in a coupling that distinguishes slots.
    """
    perm = list(range(len(lst.entries)))
    rng.shuffle(perm)
    return tuple(lst.entries[s] for s in perm)
