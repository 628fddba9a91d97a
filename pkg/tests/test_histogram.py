"""Piecewise-constant kernels and the count-ratio fit."""

import json
from fractions import Fraction

import numpy as np
import pytest

from cmchist.counts import CountTree
from cmchist.errors import NegativeDensityError, PointOutsideDomainError
from cmchist.geometry import (
    ROOT,
    SpaceShape,
    root_partition,
    split_leaf,
    uniform_partition,
)
from cmchist.histogram import (
    PiecewiseKernel,
    conditional_projection,
    constant_kernel,
    fit_histogram,
)
from cmchist.simulate import make_fully_connected
from cmchist.trajectory import Trajectory


def uniform_traj(n, seed=0):
    rng = np.random.default_rng(seed)
    return Trajectory(rng.random((n + 1, 1)), rng.random((n + 1, 1)))


SCALAR = SpaceShape(1, 1)


class TestKernelBasics:
    def test_rejects_negative_values(self):
        part = root_partition(3)
        with pytest.raises(NegativeDensityError):
            PiecewiseKernel(part, {ROOT: -0.5}, SCALAR)

    def test_missing_values_default_to_zero(self):
        part = uniform_partition(1, 3)
        k = PiecewiseKernel(part, {}, SCALAR)
        assert k.sup_norm() == 0.0

    def test_value_on_descendant(self):
        k = constant_kernel(2.5, SCALAR)
        assert k.value_on(ROOT.child(3).child(1)) == 2.5

    def test_call_outside_domain(self):
        k = constant_kernel(1.0, SCALAR)
        with pytest.raises(PointOutsideDomainError):
            k(1.5, 0.5, 0.5)

    def test_constant_kernel_mass(self):
        k = constant_kernel(1.0, SCALAR)
        assert k.next_state_mass(np.array([0.3]), np.array([0.7])) == pytest.approx(1.0)


class TestFit:
    def test_values_are_count_ratios(self):
        t = uniform_traj(100, seed=1)
        tree = CountTree(t, 2)
        m = uniform_partition(1, 3)
        k = fit_histogram(tree, m)
        for leaf in m:
            n_triples = tree.n_triples(leaf)
            n_pairs = tree.n_pairs(leaf.footprint(SCALAR))
            expected = 0.0 if n_pairs == 0 else n_triples / (n_pairs * 0.5)
            assert k.values[leaf] == pytest.approx(expected)

    def test_empty_cell_gets_zero(self):
        # trajectory pinned to a corner leaves most depth-1 cells empty
        states = np.full((40, 1), 0.05)
        controls = np.full((40, 1), 0.05)
        tree = CountTree(Trajectory(states, controls), 1)
        k = fit_histogram(tree, uniform_partition(1, 3))
        zeros = [v for v in k.values.values() if v == 0.0]
        assert len(zeros) == 7  # every cell but the corner

    def test_exact_mass_is_one_on_occupied(self):
        t = uniform_traj(200, seed=2)
        tree = CountTree(t, 2)
        k = fit_histogram(tree, uniform_partition(2, 3))
        pairs = t.pair_matrix()
        for row in pairs[:50]:
            mass = k.next_state_mass(row[:1], row[1:], exact=True)
            assert mass == Fraction(1)

    def test_float_mass_close_to_one(self):
        t = uniform_traj(150, seed=3)
        tree = CountTree(t, 2)
        k = fit_histogram(tree, uniform_partition(1, 3))
        row = t.pair_matrix()[0]
        assert k.next_state_mass(row[:1], row[1:]) == pytest.approx(1.0, abs=1e-12)

    def test_mass_zero_on_unvisited_footprint(self):
        states = np.full((40, 1), 0.05)
        controls = np.full((40, 1), 0.05)
        tree = CountTree(Trajectory(states, controls), 1)
        k = fit_histogram(tree, uniform_partition(1, 3))
        assert k.next_state_mass(np.array([0.9]), np.array([0.9]), exact=True) == 0

    def test_mixed_depth_mass_assembles_from_counts(self):
        # normalization to exactly 1 is a uniform-depth property; on a
        # mixed-depth partition the mass is still the exact sum of
        # count ratios over the leaves whose footprint covers the pair
        t = uniform_traj(300, seed=4)
        tree = CountTree(t, 2)
        m = split_leaf(uniform_partition(1, 3), ROOT.child(0), 3)
        k = fit_histogram(tree, m)
        row = t.pair_matrix()[7]
        expected = Fraction(0)
        for leaf in m:
            foot = leaf.footprint(SCALAR)
            if not foot.box(2).contains_point(row):
                continue
            n_pairs = tree.n_pairs(foot)
            if tree.n_triples(leaf):
                expected += Fraction(tree.n_triples(leaf), n_pairs)
        mass = k.next_state_mass(row[:1], row[1:], exact=True)
        assert mass == expected
        assert mass > 0


class TestPersistence:
    def test_json_round_trip_with_ratios(self):
        t = uniform_traj(80, seed=5)
        tree = CountTree(t, 1)
        k = fit_histogram(tree, uniform_partition(1, 3))
        k.meta["note"] = "round trip"
        back = PiecewiseKernel.from_json(json.loads(json.dumps(k.to_json())))
        assert back.values == k.values
        assert back.exact_ratios == k.exact_ratios
        assert back.meta["note"] == "round trip"
        assert back.partition == k.partition

    def test_save_load_file(self, tmp_path):
        k = constant_kernel(0.75, SCALAR)
        path = tmp_path / "model.json"
        k.save(path)
        back = PiecewiseKernel.load(path)
        assert back.values == k.values
        assert back.shape == k.shape


class TestConditionalProjection:
    def test_exact_for_aligned_truth(self, small_chain):
        # a kernel that is itself piecewise constant at depth 1 projects
        # onto the depth-1 partition without error
        truth = small_chain.dyadic_kernel()
        depth = truth.partition.max_depth
        traj = small_chain.simulate(400, seed=9)
        proj = conditional_projection(truth, traj, uniform_partition(depth, 3))
        for leaf in proj.partition:
            if proj.values[leaf] == 0.0:
                continue  # unvisited footprint: projection leaves a zero
            assert proj.values[leaf] == pytest.approx(truth.value_on(leaf), rel=1e-6)

    def test_resolution_guard(self, small_chain):
        truth = small_chain.dyadic_kernel()
        traj = small_chain.simulate(100, seed=1)
        with pytest.raises(ValueError):
            conditional_projection(truth, traj, root_partition(3), resolution=1)
