"""Index arithmetic of the flat BFS tree layout."""
import pytest
from hypothesis import given, strategies as st

from treecolour.tree_model import (
    TreeShape,
    children,
    leaves,
    level_of,
    level_size,
    level_start,
    parent,
    vertex_count,
)

shapes = st.builds(TreeShape,
                   degree=st.integers(min_value=1, max_value=6),
                   height=st.integers(min_value=0, max_value=5))


def test_vertex_count_closed_forms():
    assert vertex_count(TreeShape(1, 4)) == 5
    assert vertex_count(TreeShape(2, 3)) == 15
    assert vertex_count(TreeShape(3, 2)) == 13
    assert vertex_count(TreeShape(5, 0)) == 1


@given(shapes)
def test_level_sizes_partition_the_tree(shape):
    total = sum(level_size(shape, lvl) for lvl in range(shape.height + 1))
    assert total == vertex_count(shape)
    for lvl in range(shape.height + 1):
        assert level_size(shape, lvl) == shape.degree ** lvl


@given(shapes)
def test_level_starts_are_cumulative(shape):
    acc = 0
    for lvl in range(shape.height + 1):
        assert level_start(shape, lvl) == acc
        acc += level_size(shape, lvl)


@given(shapes)
def test_parent_child_roundtrip(shape):
    for v in range(vertex_count(shape)):
        for ch in children(shape, v):
            assert parent(shape, ch) == v
            assert level_of(shape, ch) == level_of(shape, v) + 1


@given(shapes)
def test_children_cover_everything_below_the_root(shape):
    seen = set()
    for v in range(vertex_count(shape)):
        for ch in children(shape, v):
            assert ch not in seen
            seen.add(ch)
    assert seen == set(range(1, vertex_count(shape)))


@given(shapes)
def test_leaves_are_exactly_the_last_level(shape):
    lv = list(leaves(shape))
    assert len(lv) == level_size(shape, shape.height)
    assert all(level_of(shape, v) == shape.height for v in lv)
    assert all(len(children(shape, v)) == 0 for v in lv)


def test_invalid_shapes_and_vertices_raise():
    with pytest.raises(ValueError):
        TreeShape(0, 2)
    with pytest.raises(ValueError):
        TreeShape(2, -1)
    shape = TreeShape(2, 2)
    with pytest.raises(ValueError):
        parent(shape, 0)
    with pytest.raises(ValueError):
        level_of(shape, vertex_count(shape))
    with pytest.raises(ValueError):
        children(shape, -1)
