"""Hellinger losses, the comparison statistic, and best-approximation routes.

The best-approximation quantity has three independent implementations:
a trajectory scan (best_approx_hellinger_sq), an assembly from tree
counts (best_approx_from_tree), and a quadrature route for callable
densities (best_approx_vs_density).  For truths that are piecewise
constant on dyadic cells all three must agree, which is the main
cross-check here; the experiment harness relies on the fast routes.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cmchist.counts import CountTree
from cmchist.diagnostics import GridOccupation, LebesgueOccupation
from cmchist.geometry import (
    ROOT,
    SpaceShape,
    root_partition,
    random_partition,
    split_leaf,
    uniform_partition,
)
from cmchist.histogram import constant_kernel, fit_histogram
from cmchist.losses import (
    best_approx_from_tree,
    best_approx_hellinger_sq,
    best_approx_vs_density,
    empirical_hellinger_sq,
    hellinger_sq_vs_density,
    penalty,
    psi,
    t_statistic,
    weighted_hellinger_sq,
)
from cmchist.simulate import make_fully_connected
from cmchist.trajectory import Trajectory

SCALAR = SpaceShape(1, 1)


def uniform_traj(n, seed=0):
    rng = np.random.default_rng(seed)
    return Trajectory(rng.random((n + 1, 1)), rng.random((n + 1, 1)))


class TestPsi:
    def test_frozen_values(self):
        assert psi(0.0, 1.0) == pytest.approx(0.7071067811865475, abs=1e-15)
        assert psi(4.0, 1.0) == pytest.approx(-0.31622776601683794, abs=1e-15)
        assert psi(0.0, 0.0) == 0.0

    @given(st.floats(0.0, 50.0), st.floats(0.0, 50.0))
    @settings(max_examples=100, deadline=None)
    def test_bounded_and_antisymmetric(self, a, b):
        v = psi(a, b)
        assert abs(v) <= 1 / math.sqrt(2) + 1e-12
        assert v == pytest.approx(-psi(b, a), abs=1e-12)


class TestPenalty:
    def test_frozen_value(self):
        assert penalty(4, 100, 64.0) == pytest.approx(15.629235676129515, abs=1e-12)

    def test_linear_in_leaves(self):
        assert penalty(10, 500, 64.0) == pytest.approx(10 * penalty(1, 500, 64.0))

    def test_decreasing_in_n(self):
        values = [penalty(4, n, 64.0) for n in (100, 1000, 10000)]
        assert values == sorted(values, reverse=True)


class TestEmpiricalHellinger:
    def test_constant_vs_constant(self):
        tree = CountTree(uniform_traj(60, seed=1), 1)
        c1 = constant_kernel(1.0, SCALAR)
        c4 = constant_kernel(4.0, SCALAR)
        # (sqrt(1) - sqrt(4))^2 * n / (2n) = 1/2
        assert empirical_hellinger_sq(c1, c4, tree) == pytest.approx(0.5, abs=1e-14)

    def test_distance_to_zero_is_half_mass(self):
        tree = CountTree(uniform_traj(60, seed=2), 1)
        c1 = constant_kernel(1.0, SCALAR)
        c0 = constant_kernel(0.0, SCALAR)
        assert empirical_hellinger_sq(c1, c0, tree) == pytest.approx(0.5, abs=1e-14)

    def test_identity_is_zero(self, small_chain, small_tree):
        k = fit_histogram(small_tree, uniform_partition(1, 3))
        assert empirical_hellinger_sq(k, k, small_tree) == 0.0

    def test_symmetry(self, small_tree):
        f = fit_histogram(small_tree, uniform_partition(1, 3))
        g = fit_histogram(small_tree, root_partition(3))
        d1 = empirical_hellinger_sq(f, g, small_tree)
        d2 = empirical_hellinger_sq(g, f, small_tree)
        assert d1 == pytest.approx(d2, abs=1e-14)
        assert d1 > 0

    def test_mismatched_partitions_use_overlay(self, small_tree):
        # distance between fits on nested partitions: computable and
        # positive, pinned loosely as a sanity bound
        f = fit_histogram(small_tree, uniform_partition(2, 3))
        g = fit_histogram(small_tree, root_partition(3))
        d = empirical_hellinger_sq(f, g, small_tree)
        assert 0 < d < 0.5


class TestTStatistic:
    def test_frozen_value(self):
        tree = CountTree(uniform_traj(40, seed=0), 1)
        c0 = constant_kernel(0.0, SCALAR)
        c1 = constant_kernel(1.0, SCALAR)
        assert t_statistic(c0, c1, tree) == pytest.approx(0.41421356237309503, abs=1e-14)

    def test_antisymmetric(self, small_tree):
        f = fit_histogram(small_tree, uniform_partition(1, 3))
        g = fit_histogram(small_tree, uniform_partition(2, 3))
        assert t_statistic(f, g, small_tree) == pytest.approx(
            -t_statistic(g, f, small_tree), abs=1e-14
        )

    def test_self_comparison_is_zero(self, small_tree):
        f = fit_histogram(small_tree, uniform_partition(1, 3))
        assert t_statistic(f, f, small_tree) == 0.0


@pytest.fixture(scope="module")
def setup():
    chain = make_fully_connected(0.4, 2, 2, seed=5)
    truth = chain.dyadic_kernel()
    traj = chain.simulate(600, seed=11)
    tree = CountTree(traj, 2)
    return chain, truth, traj, tree


class TestBestApproxRoutes:
    """Cross-checks between the three best-approximation implementations."""

    def test_tree_route_equals_trajectory_scan(self, setup):
        _, truth, traj, tree = setup
        partitions = [
            root_partition(3),
            uniform_partition(1, 3),
            uniform_partition(2, 3),
            split_leaf(uniform_partition(1, 3), ROOT.child(5), 3),
        ]
        for m in partitions:
            scan, _ = best_approx_hellinger_sq(truth, m, traj)
            from_tree = best_approx_from_tree(truth, m, tree)
            assert from_tree == pytest.approx(scan, abs=1e-12), m

    def test_quadrature_route_agrees_on_aligned_partitions(self, setup):
        chain, truth, traj, tree = setup
        # Gauss-Legendre nodes are symmetric about cell midpoints, so a
        # depth-1 truth is integrated exactly on depth>=1 partitions
        for m in (uniform_partition(1, 3), uniform_partition(2, 3)):
            quad = best_approx_vs_density(chain.density_function(), m, traj)
            from_tree = best_approx_from_tree(truth, m, tree)
            assert quad == pytest.approx(from_tree, abs=1e-10)

    def test_best_approx_never_beats_any_fit(self, setup):
        _, truth, traj, tree = setup
        rng = np.random.default_rng(17)
        for _ in range(10):
            m = random_partition(rng, 2, 3, 0.5)
            bound = best_approx_from_tree(truth, m, tree)
            fitted = fit_histogram(tree, m)
            actual = empirical_hellinger_sq(truth, fitted, tree)
            assert bound <= actual + 1e-12

    def test_zero_on_partition_matching_truth(self, setup):
        _, truth, traj, tree = setup
        # projecting the truth onto its own partition loses nothing
        value = best_approx_from_tree(truth, truth.partition, tree)
        assert value == pytest.approx(0.0, abs=1e-12)


class TestDensityRoutes:
    def test_quadrature_matches_overlay_for_dyadic_truth(self, small_chain):
        truth = small_chain.dyadic_kernel()
        traj = small_chain.simulate(500, seed=21)
        tree = CountTree(traj, 2)
        k = fit_histogram(tree, uniform_partition(2, 3))
        via_quadrature = hellinger_sq_vs_density(small_chain.density_function(), k, traj)
        via_overlay = empirical_hellinger_sq(truth, k, tree)
        assert via_quadrature == pytest.approx(via_overlay, abs=1e-10)

    def test_weighted_constant_case(self):
        # uniform footprint weight, constant truth 1 vs constant fit 4:
        # integral of (1-2)^2/2 over the cube is 1/2
        def flat(x, a, y):
            return np.ones(len(np.atleast_1d(np.asarray(x)[..., 0])))

        occ = LebesgueOccupation()
        value = weighted_hellinger_sq(flat, constant_kernel(4.0, SCALAR), occ.foot_density)
        assert value == pytest.approx(0.5, abs=1e-12)

    def test_weighted_zero_when_equal(self):
        def flat(x, a, y):
            return np.ones(len(np.atleast_1d(np.asarray(x)[..., 0])))

        occ = LebesgueOccupation()
        value = weighted_hellinger_sq(flat, constant_kernel(1.0, SCALAR), occ.foot_density)
        assert value == pytest.approx(0.0, abs=1e-14)

    def test_grid_occupation_reweights(self, small_chain):
        # concentrating the footprint weight on the region where the
        # kernels agree drives the weighted loss toward zero
        truth = small_chain.dyadic_kernel()
        masses = np.zeros((2, 2))
        masses[0, 0] = 1.0
        occ = GridOccupation(masses)
        match = constant_kernel(truth.value_on(ROOT.child(0)), SCALAR)

        def truth_fn(x, a, y):
            k = len(np.atleast_1d(np.asarray(x)[..., 0]))
            return np.full(k, truth.value_on(ROOT.child(0)))

        value = weighted_hellinger_sq(truth_fn, match, occ.foot_density)
        assert value == pytest.approx(0.0, abs=1e-14)
