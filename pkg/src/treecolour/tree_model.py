"""Index arithmetic for complete d-ary trees stored as flat arrays in BFS order.

Vertex 0 is the root; the children of v are d*v + 1 .. d*v + d.  All
functions are pure integer arithmetic, so arbitrarily deep trees are fine
as long as the caller does not try to materialise them.
"""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class TreeShape:
    """A complete d-ary tree of the given height (root is level 0)."""

    degree: int
    height: int

    def __post_init__(self) -> None:
        if self.degree < 1:
            raise ValueError(f"degree must be >= 1, got {self.degree}")
        if self.height < 0:
            raise ValueError(f"height must be >= 0, got {self.height}")


def vertex_count(shape: TreeShape) -> int:
    d, h = shape.degree, shape.height
    if d == 1:
        return h + 1
    return (d ** (h + 1) - 1) // (d - 1)


def level_start(shape: TreeShape, level: int) -> int:
    """Index of the first vertex on the given level."""
    if level < 0 or level > shape.height:
        raise ValueError(f"level {level} outside 0..{shape.height}")
    d = shape.degree
    if d == 1:
        return level
    return (d ** level - 1) // (d - 1)


def level_size(shape: TreeShape, level: int) -> int:
    if level < 0 or level > shape.height:
        raise ValueError(f"level {level} outside 0..{shape.height}")
    return shape.degree ** level


def level_of(shape: TreeShape, v: int) -> int:
    """Level of vertex v (0 for the root)."""
    if v < 0 or v >= vertex_count(shape):
        raise ValueError(f"vertex {v} outside tree with {vertex_count(shape)} vertices")
    if shape.degree == 1:
        return v
    # Walk down the level starts; heights are small in practice.
    lvl = 0
    while level_start(shape, lvl) + level_size(shape, lvl) <= v:
        lvl += 1
    return lvl


def parent(shape: TreeShape, v: int) -> int:
    if v <= 0 or v >= vertex_count(shape):
        raise ValueError(f"vertex {v} has no parent")
    return (v - 1) // shape.degree


def children(shape: TreeShape, v: int) -> range:
    """Child indices of v; empty range for leaves."""
    if v < 0 or v >= vertex_count(shape):
        raise ValueError(f"vertex {v} outside tree")
    if level_of(shape, v) == shape.height:
        return range(0, 0)
    d = shape.degree
    return range(d * v + 1, d * v + d + 1)


def leaves(shape: TreeShape) -> range:
    start = level_start(shape, shape.height)
    return range(start, vertex_count(shape))
