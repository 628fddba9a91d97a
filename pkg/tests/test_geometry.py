"""Dyadic cells, boxes, and partitions."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cmchist.errors import EnumerationTooLargeError, MaxDepthExceededError
from cmchist.geometry import (
    ROOT,
    Box,
    Cell,
    Partition,
    cell_at_point,
    complement_cells,
    count_partitions,
    enumerate_partitions,
    overlay,
    random_partition,
    restrict_partition,
    root_partition,
    split_leaf,
    uniform_partition,
)


class TestCell:
    def test_root_depth(self):
        assert ROOT.depth == 0
        assert list(ROOT.ancestors()) == []

    def test_ancestors_are_proper(self):
        c = ROOT.child(1).child(0)
        assert list(c.ancestors()) == [ROOT, ROOT.child(1)]

    def test_child_and_ancestor(self):
        c = ROOT.child(3).child(0).child(7)
        assert c.depth == 3
        assert c.ancestor(0) == ROOT
        assert c.ancestor(2) == ROOT.child(3).child(0)
        assert repr(c) == "Cell(3,0,7)"

    def test_children_depth_cap(self):
        deep = ROOT
        for _ in range(40):
            deep = deep.child(0)
        with pytest.raises(MaxDepthExceededError):
            deep.children(1)

    def test_children_count(self):
        assert len(list(ROOT.children(3))) == 8
        assert len(list(ROOT.children(2))) == 4

    def test_contains_is_ancestor_order(self):
        c = ROOT.child(1)
        assert ROOT.contains(c)
        assert c.contains(c)
        assert not c.contains(ROOT)
        assert not c.contains(ROOT.child(0))

    def test_box_halves_each_axis(self):
        c = cell_at_point(np.array([0.75, 0.25]), 1, 2)
        box = c.box(2)
        widths = np.asarray(box.hi) - np.asarray(box.lo)
        assert np.allclose(widths, 0.5)
        assert box.contains_point(np.array([0.75, 0.25]))

    def test_json_round_trip(self):
        c = ROOT.child(5).child(2)
        assert Cell.from_json(c.to_json()) == c
        # the encoding is plain data, so it survives a JSON dump
        assert Cell.from_json(json.loads(json.dumps(c.to_json()))) == c


class TestBox:
    def test_volume(self):
        assert Box((0.0, 0.0), (0.5, 0.25)).volume() == pytest.approx(0.125)

    def test_contains_point_upper_edge(self):
        box = Box((0.5,), (1.0,))
        assert box.contains_point(np.array([1.0]))
        assert not Box((0.0,), (0.5,)).contains_point(np.array([1.0]))

    def test_overlap_fraction_is_share_of_other(self):
        b1 = Box((0.0, 0.0), (0.5, 0.5))
        b2 = Box((0.25, 0.0), (0.75, 1.0))
        # intersection volume 0.125, divided by the argument's volume
        assert b1.overlap_fraction(b2) == pytest.approx(0.125 / 0.5)
        assert b2.overlap_fraction(b1) == pytest.approx(0.125 / 0.25)


class TestPartitionFamily:
    def test_count_small_values(self):
        # one axis: {root}, {0,1}, {00,01,1}, {0,10,11}, {00,01,10,11}
        assert count_partitions(1, 1) == 2
        assert count_partitions(2, 1) == 5
        assert count_partitions(2, 3) == 257

    def test_enumeration_matches_count(self):
        parts = enumerate_partitions(2, 1)
        assert len(parts) == 5
        sizes = [len(p) for p in parts]
        assert sizes == sorted(sizes), "coarsest first"

    def test_enumeration_nested_in_deeper_family(self):
        shallow = set(enumerate_partitions(1, 2))
        deep = set(enumerate_partitions(2, 2))
        assert shallow <= deep

    def test_enumeration_guard(self):
        with pytest.raises(EnumerationTooLargeError):
            enumerate_partitions(4, 3)

    def test_grandchildren_inside_child(self):
        # restricting the depth-2 uniform partition to one child of the
        # root yields exactly that child's 2^D grandchildren
        child = ROOT.child(2)
        inside = restrict_partition(uniform_partition(2, 3), child)
        assert len(inside) == 8
        assert all(child.contains(c) for c in inside)


class TestPartition:
    def test_root_partition(self):
        m = root_partition(3)
        assert len(m) == 1
        assert m.max_depth == 0

    def test_uniform_partition_tiles(self):
        m = uniform_partition(2, 2)
        assert len(m) == 16
        vol = sum(leaf.box(2).volume() for leaf in m)
        assert vol == pytest.approx(1.0)

    def test_validation_rejects_overlap(self):
        leaves = (ROOT, ROOT.child(0))
        with pytest.raises(ValueError, match="antichain"):
            Partition(leaves, 1)

    def test_validation_rejects_gap(self):
        with pytest.raises(ValueError, match="tile"):
            Partition((ROOT.child(0),), 1)

    def test_leaf_at_point_boundary(self):
        m = uniform_partition(1, 3)
        top = m.leaf_at_point(np.array([1.0, 1.0, 1.0]), 3)
        assert top.box(3).contains_point(np.array([1.0, 1.0, 1.0]))

    def test_leaf_containing(self):
        m = uniform_partition(1, 2)
        deep = ROOT.child(3).child(0)
        assert m.leaf_containing(deep) == ROOT.child(3)

    def test_split_leaf(self):
        m = root_partition(2)
        m2 = split_leaf(m, ROOT, 2)
        assert len(m2) == 4
        assert m2 == uniform_partition(1, 2)

    def test_restrict_partition_ancestor_leaf(self):
        m = root_partition(2)
        assert restrict_partition(m, ROOT.child(1)) == (ROOT.child(1),)

    def test_restrict_partition_below_a_leaf(self):
        # a cell strictly below a leaf restricts to itself
        m = uniform_partition(2, 1)
        deep = ROOT.child(0).child(0).child(0)
        assert restrict_partition(m, deep) == (deep,)

    def test_json_round_trip(self):
        m = split_leaf(uniform_partition(1, 2), ROOT.child(0), 2)
        again = Partition.from_json(json.loads(json.dumps(m.to_json())), 2)
        assert again == m

    def test_equality_ignores_leaf_order(self):
        a = Partition(tuple(ROOT.children(1)), 1)
        b = Partition(tuple(reversed(tuple(ROOT.children(1)))), 1)
        assert a == b
        assert hash(a) == hash(b)


class TestOverlay:
    def test_overlay_of_self(self):
        m = uniform_partition(1, 2)
        assert overlay(m, m, 2) == m

    def test_overlay_refines_both(self):
        m1 = split_leaf(root_partition(1), ROOT, 1)          # {0, 1}
        m2 = split_leaf(m1, ROOT.child(0), 1)                # {00, 01, 1}
        both = overlay(m1, m2, 1)
        assert both == m2

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_overlay_properties_random(self, seed):
        rng = np.random.default_rng(seed)
        m1 = random_partition(rng, 2, 2, 0.6)
        m2 = random_partition(rng, 2, 2, 0.6)
        both = overlay(m1, m2, 2)
        assert len(both) <= 2 * (len(m1) + len(m2))
        assert len(both) >= max(len(m1), len(m2))
        for leaf in both:
            assert m1.leaf_containing(leaf) is not None
            assert m2.leaf_containing(leaf) is not None


def test_complement_cells_tiles_the_rest():
    target = ROOT.child(0).child(1)
    rest = complement_cells(target, 2)
    vol = target.box(2).volume() + sum(c.box(2).volume() for c in rest)
    assert vol == pytest.approx(1.0)
    assert all(not c.contains(target) and not target.contains(c) for c in rest)


@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
@settings(max_examples=30, deadline=None)
def test_random_partition_is_valid(seed, n_axes):
    rng = np.random.default_rng(seed)
    m = random_partition(rng, 3, n_axes, 0.5)
    assert m.max_depth <= 3
    # constructing with validation on re-checks disjoint cover
    Partition(tuple(m), n_axes)


@given(
    st.lists(st.floats(0.0, 1.0, allow_nan=False), min_size=3, max_size=3),
    st.integers(0, 3),
)
@settings(max_examples=50, deadline=None)
def test_cell_at_point_contains_its_point(coords, depth):
    point = np.array(coords)
    cell = cell_at_point(point, depth, 3)
    assert cell.depth == depth
    assert cell.box(3).contains_point(point)
