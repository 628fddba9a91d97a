"""Partition selection: dynamic program vs. exhaustive search."""

import numpy as np
import pytest

from cmchist.counts import CountTree
from cmchist.geometry import enumerate_partitions, random_partition, root_partition
from cmchist.losses import penalty
from cmchist.selector import (
    brute_force_gamma,
    brute_force_select,
    gamma_of,
    inner_sup,
    select_partition,
)
from cmchist.trajectory import Trajectory


def uniform_traj(n, seed):
    rng = np.random.default_rng(seed)
    return Trajectory(rng.random((n + 1, 1)), rng.random((n + 1, 1)))


def test_dp_matches_brute_force_small():
    # lighter version of the acceptance criterion, here as a quick guard
    for seed in range(4):
        tree = CountTree(uniform_traj(48, seed), 2)
        result = select_partition(tree)
        _, best_gamma = brute_force_select(tree)
        assert result.gamma == pytest.approx(best_gamma, abs=1e-12)


def test_gamma_of_agrees_with_dp_on_selected():
    tree = CountTree(uniform_traj(64, 9), 2)
    result = select_partition(tree)
    assert gamma_of(tree, result.partition) == pytest.approx(result.gamma, abs=1e-12)


def test_gamma_of_agrees_with_brute_gamma():
    tree = CountTree(uniform_traj(40, 3), 2)
    family = enumerate_partitions(2, 3)
    for m in (root_partition(3), family[1], family[-1]):
        assert brute_force_gamma(tree, m, family) == pytest.approx(
            gamma_of(tree, m), abs=1e-12
        )


def test_selected_gamma_is_minimal_over_family():
    tree = CountTree(uniform_traj(56, 4), 2)
    result = select_partition(tree)
    rng = np.random.default_rng(0)
    for _ in range(30):
        m = random_partition(rng, 2, 3, 0.5)
        assert result.gamma <= gamma_of(tree, m) + 1e-12


def test_uniform_data_prefers_root():
    # uniform data at the default conservative scale: no split pays
    tree = CountTree(uniform_traj(120, 5), 2)
    result = select_partition(tree)
    assert result.partition == root_partition(3)
    # and the gamma is then the penalty floor for a single leaf
    assert result.gamma == pytest.approx(penalty(1, tree.n, 64.0), abs=1e-12)


def test_concentrated_data_splits_at_small_scale():
    # a deterministic flip chain has maximal contrast; splitting pays
    # once the penalty scale drops enough for a competitor to overcome
    # the per-piece charges
    n = 400
    states = np.tile([0.1, 0.9], n // 2 + 1)[: n + 1].reshape(-1, 1)
    controls = np.full((n + 1, 1), 0.3)
    tree = CountTree(Trajectory(states, controls), 2)
    with pytest.warns(UserWarning):
        result = select_partition(tree, 0.25)
    assert len(result.partition) == 8
    assert result.partition.max_depth == 1
    # the same data at a conservative scale stays at the root
    coarse = select_partition(tree, 64.0)
    assert len(coarse.partition) == 1


def test_result_metadata():
    tree = CountTree(uniform_traj(80, 6), 2)
    result = select_partition(tree, 64.0)
    assert result.penalty_scale == 64.0
    assert result.effective_depth == 2
    assert result.meta["n"] == 80
    assert result.meta["n_leaves"] == len(result.partition)
    assert result.runtime_seconds >= 0
    assert result.kernel.partition == result.partition


def test_low_scale_warns():
    tree = CountTree(uniform_traj(30, 7), 1)
    with pytest.warns(UserWarning, match="below the calibrated minimum"):
        select_partition(tree, 1.0)


def test_inner_sup_at_least_floor():
    tree = CountTree(uniform_traj(44, 8), 2)
    pen_unit = penalty(1, tree.n, 64.0)
    value = inner_sup(tree, next(iter(root_partition(3))), tree.hist_value(next(iter(root_partition(3)))))
    assert value >= -pen_unit - 1e-15
