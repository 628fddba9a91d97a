"""Loss functions and the pairwise comparison statistic.

Everything here integrates against the empirical occupation measure of
the trajectory: the measure putting mass ``1/n`` on each observed
(state, control) pair, times Lebesgue measure on next states.  Squared
Hellinger distances carry the conventional factor ``1/2``, so two
mutually singular conditional densities are at distance 1/2 under a
probability occupation measure.

The comparison statistic ``T`` is antisymmetric and combines a
per-triple score with two occupation integrals; between histograms on
dyadic partitions every term is a finite sum over the overlay of the two
partitions, evaluated here in closed form from the count tree.
"""

from __future__ import annotations

import math
import warnings
from typing import Callable

import numpy as np

from .counts import CountTree
from .errors import UnindexedDepthError
from .geometry import Cell, Partition, SpaceShape, overlay
from .histogram import PiecewiseKernel, _foot_box, _next_box, _next_block_integral
from .trajectory import Trajectory

#: Minimum penalty scale with a selection guarantee behind it.
MIN_PENALTY_SCALE = 64.0

#: Weight of the Hellinger term inside the selection score.
SCORE_HELLINGER_WEIGHT = 0.75 * (1.0 - 1.0 / math.sqrt(2.0))


def psi(c1: float, c2: float) -> float:
    """Normalized square-root contrast of two nonnegative levels.

    Antisymmetric, bounded by 1/sqrt(2) in absolute value, and zero when
    both arguments vanish.
    """
    if c1 < 0 or c2 < 0:
        raise ValueError("psi needs nonnegative arguments")
    total = c1 + c2
    if total == 0.0:
        return 0.0
    return (math.sqrt(c2) - math.sqrt(c1)) / math.sqrt(2.0 * total)


def penalty(n_leaves: int, n: int, scale: float = MIN_PENALTY_SCALE) -> float:
    """Model-size penalty: scale * (1.5 + log n) * n_leaves / n."""
    if scale < MIN_PENALTY_SCALE:
        warnings.warn(
            f"penalty scale {scale} is below the calibrated minimum "
            f"{MIN_PENALTY_SCALE}; selection guarantees degrade",
            UserWarning,
            stacklevel=2,
        )
    return scale * (1.5 + math.log(n)) * n_leaves / n


def _overlay_terms(f1: PiecewiseKernel, f2: PiecewiseKernel, tree: CountTree):
    """Per-cell data of the overlay: (cell, N, M, vol_next, v1, v2)."""
    axes = tree.shape.full_axes
    common = overlay(f1.partition, f2.partition, axes)
    if common.max_depth > tree.depth:
        raise UnindexedDepthError(
            "overlay is deeper than the count tree; rebuild with a larger depth"
        )
    for cell in common:
        counts = tree.query(cell)
        yield (
            cell,
            counts.n_triples,
            counts.n_pairs,
            counts.next_volume,
            f1.value_on(cell),
            f2.value_on(cell),
        )


def empirical_hellinger_sq(
    f1: PiecewiseKernel, f2: PiecewiseKernel, tree: CountTree
) -> float:
    """Squared Hellinger distance under the empirical occupation measure."""
    n = tree.n
    terms = [
        m * vol * (math.sqrt(v1) - math.sqrt(v2)) ** 2 / (2.0 * n)
        for _, _, m, vol, v1, v2 in _overlay_terms(f1, f2, tree)
    ]
    return math.fsum(terms)


def t_statistic(f1: PiecewiseKernel, f2: PiecewiseKernel, tree: CountTree) -> float:
    """Antisymmetric comparison statistic between two histograms.

    Sum of the average per-triple contrast ``psi(f1, f2)`` and two
    closed-form occupation integrals; positive values favor ``f2``.
    """
    n = tree.n
    terms = []
    for _, n_triples, m, vol, v1, v2 in _overlay_terms(f1, f2, tree):
        s1, s2 = math.sqrt(v1), math.sqrt(v2)
        triple_term = n_triples * psi(v1, v2)
        occ_term = m * vol * (math.sqrt((v1 + v2) / 2.0) * (s2 - s1) + (v1 - v2))
        terms.append((triple_term + occ_term) / n)
    return math.fsum(terms)


def pieces_of_restriction(
    competitor: Partition, cell: Cell
) -> tuple[tuple[Cell, Cell], ...]:
    """Restriction pieces of a competitor partition inside ``cell``.

    Each piece is returned with the competitor leaf it inherits its
    value from (the piece itself, except when the competitor's leaf
    contains ``cell`` entirely).
    """
    from .geometry import restrict_partition

    pieces = restrict_partition(competitor, cell)
    return tuple(
        (piece, piece if piece != cell else competitor.leaf_containing(cell))
        for piece in pieces
    )


def cell_score(
    cell: Cell,
    own_value: float,
    piece_value: float,
    tree: CountTree,
    pen_unit: float,
) -> float:
    """One restriction piece's contribution to the selection score.

    Weighted Hellinger term plus comparison statistic, both localized to
    the piece, minus one penalty unit.
    """
    counts = tree.query(cell)
    n = tree.n
    s1, s2 = math.sqrt(own_value), math.sqrt(piece_value)
    hell = counts.n_pairs * counts.next_volume * (s1 - s2) ** 2 / (2.0 * n)
    tstat = (
        counts.n_triples * psi(own_value, piece_value)
        + counts.n_pairs
        * counts.next_volume
        * (
            math.sqrt((own_value + piece_value) / 2.0) * (s2 - s1)
            + (own_value - piece_value)
        )
    ) / n
    return SCORE_HELLINGER_WEIGHT * hell + tstat - pen_unit


def deterministic_hellinger_sq(
    f1: PiecewiseKernel,
    f2: PiecewiseKernel,
    occupation,
    resolution: int = 8,
) -> float:
    """Squared Hellinger distance under a reference occupation measure.

    ``occupation`` either exposes ``mass_in_foot_box(box) -> float`` (an
    exact finite-state occupation) or is a density callable on
    (state, control) points, integrated by a midpoint rule with
    ``resolution`` nodes per axis.
    """
    axes = f1.shape.full_axes
    common = overlay(f1.partition, f2.partition, axes)
    shape = f1.shape
    terms = []
    for cell in common:
        v1, v2 = f1.value_on(cell), f2.value_on(cell)
        if v1 == v2:
            continue
        foot = _foot_box(cell, shape)
        mass = _foot_mass(occupation, foot, resolution)
        vol = 2.0 ** (-cell.depth * shape.d1)
        terms.append(mass * vol * (math.sqrt(v1) - math.sqrt(v2)) ** 2 / 2.0)
    return math.fsum(terms)


def _foot_mass(occupation, box, resolution: int) -> float:
    if hasattr(occupation, "mass_in_foot_box"):
        return occupation.mass_in_foot_box(box)
    axes = [
        np.linspace(lo, hi, 2 * resolution + 1)[1::2]
        for lo, hi in zip(box.lo, box.hi)
    ]
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    vals = [occupation(p) for p in pts]
    return float(np.mean(vals) * box.volume())


def best_approx_hellinger_sq(
    truth,
    partition: Partition,
    traj: Trajectory,
    resolution: int = 8,
) -> tuple[float, PiecewiseKernel]:
    """Distance from a true kernel to its best approximation on a partition.

    Minimizes the empirical squared Hellinger loss over all nonnegative
    piecewise-constant kernels on the partition; the optimum takes, on
    each leaf, the occupation-weighted mean of the truth's square root.
    Returns the minimal loss and its minimizer.
    """
    shape = SpaceShape(traj.d1, traj.d2)
    n = traj.n_transitions
    pairs = traj.pair_matrix()
    values: dict[Cell, float] = {}
    terms = []
    for leaf in partition:
        foot_box = _foot_box(leaf, shape)
        block = _next_box(leaf, shape)
        vol = block.volume()
        inside = [i for i in range(len(pairs)) if foot_box.contains_point(pairs[i])]
        if not inside:
            values[leaf] = 0.0
            continue
        mass_sum = 0.0
        root_sum = 0.0
        for i in inside:
            x, a = traj.states[i], traj.controls[i]
            mass_sum += _next_block_integral(truth, x, a, block, shape.d1, resolution)
            root_sum += _next_block_integral(
                truth, x, a, block, shape.d1, resolution, transform=math.sqrt
            )
        m_count = len(inside)
        values[leaf] = (root_sum / (m_count * vol)) ** 2
        terms.append((mass_sum - root_sum**2 / (m_count * vol)) / (2.0 * n))
    kernel = PiecewiseKernel(partition, values, shape, meta={"best_approx": True})
    return math.fsum(terms), kernel


def best_approx_from_tree(
    truth: PiecewiseKernel,
    partition: Partition,
    tree: CountTree,
) -> float:
    """Best-approximation loss on a partition, assembled from tree counts.

    Same quantity as :func:`best_approx_hellinger_sq` when the truth is
    piecewise constant on dyadic cells no deeper than the tree's depth
    bound, but computed from occupancy counts alone -- no trajectory
    scan, no quadrature.  The two routes are independent and are
    cross-checked in the test suite.
    """
    from .geometry import restrict_partition

    shape = truth.shape
    n = tree.n
    terms = []
    for leaf in partition:
        mass_sum = root_sum = weight = 0.0
        for piece in restrict_partition(truth.partition, leaf):
            m_count = tree.n_pairs(piece.footprint(shape))
            if not m_count:
                continue
            w = m_count * tree.next_volume(piece.depth)
            v = truth.value_on(piece)
            mass_sum += w * v
            root_sum += w * math.sqrt(v)
            weight += w
        if weight:
            # nonnegative by Cauchy-Schwarz; clamp the roundoff dust
            terms.append(max(0.0, mass_sum - root_sum**2 / weight) / (2.0 * n))
    return math.fsum(terms)


def weighted_hellinger_sq(
    truth: Callable,
    kernel: PiecewiseKernel,
    foot_density: Callable,
    resolution: int = 16,
) -> float:
    """Squared Hellinger loss under an explicit footprint density.

    Integrates ``(sqrt(truth) - sqrt(kernel))**2 / 2`` against
    ``foot_density(x, a) dx da dy`` by Gauss-Legendre quadrature on each
    leaf of the kernel's partition.  ``truth`` broadcasts like in
    :func:`hellinger_sq_vs_density`; ``foot_density`` maps flat arrays
    of states and controls to nonnegative weights.  Scalar states and
    controls only.
    """
    shape = kernel.shape
    if shape.d1 != 1 or shape.d2 != 1:
        raise NotImplementedError("quadrature loss implemented for scalar axes")
    nodes, weights = np.polynomial.legendre.leggauss(resolution)
    terms = []
    for leaf in kernel.partition:
        box = leaf.box(shape.full_axes)
        v = kernel.values.get(leaf, 0.0)
        axis_nodes = []
        axis_weights = []
        for lo, hi in zip(box.lo, box.hi):
            axis_nodes.append(0.5 * (hi - lo) * nodes + 0.5 * (hi + lo))
            axis_weights.append(0.5 * (hi - lo) * weights)
        xg, ag, yg = np.meshgrid(*axis_nodes, indexing="ij")
        wg = (
            axis_weights[0][:, None, None]
            * axis_weights[1][None, :, None]
            * axis_weights[2][None, None, :]
        )
        dens = truth(
            xg.reshape(-1, 1), ag.reshape(-1, 1), yg.reshape(-1, 1)
        )
        occ = foot_density(xg.ravel(), ag.ravel())
        integrand = occ * (np.sqrt(dens) - math.sqrt(v)) ** 2 / 2.0
        terms.append(float(integrand @ wg.ravel()))
    return math.fsum(terms)


def _foot_mask(pairs: np.ndarray, box) -> np.ndarray:
    """Rows of ``pairs`` inside a footprint box, upper face closed at 1."""
    lo = np.asarray(box.lo)
    hi = np.asarray(box.hi)
    return np.all(
        (pairs >= lo) & ((pairs < hi) | ((hi == 1.0) & (pairs == 1.0))), axis=1
    )


def best_approx_vs_density(
    truth: Callable,
    partition: Partition,
    traj: Trajectory,
    resolution: int = 16,
) -> float:
    """Best-approximation loss against a smooth truth, by quadrature.

    Quadrature counterpart of :func:`best_approx_hellinger_sq` for
    callable truths that broadcast over arrays, vectorized over the
    trajectory like :func:`hellinger_sq_vs_density`.  Returns the loss
    alone.  1-d states only.
    """
    shape = SpaceShape(traj.d1, traj.d2)
    if shape.d1 != 1:
        raise NotImplementedError("vectorized loss implemented for 1-d states")
    n = traj.n_transitions
    states = traj.states[:-1]
    controls = traj.controls[:-1]
    pairs = np.hstack([states, controls])
    nodes, weights = np.polynomial.legendre.leggauss(resolution)
    terms = []
    for leaf in partition:
        foot_box = _foot_box(leaf, shape)
        block = _next_box(leaf, shape)
        lo, hi = block.lo[0], block.hi[0]
        mask = _foot_mask(pairs, foot_box)
        k = int(mask.sum())
        if k == 0:
            continue
        ys = 0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)
        w = 0.5 * (hi - lo) * weights
        xs = np.repeat(states[mask][:, None, :], resolution, axis=1)
        as_ = np.repeat(controls[mask][:, None, :], resolution, axis=1)
        ys_full = np.broadcast_to(ys.reshape(1, -1, 1), (k, resolution, 1))
        vals = truth(
            xs.reshape(-1, shape.d1),
            as_.reshape(-1, shape.d2),
            ys_full.reshape(-1, shape.d1),
        ).reshape(k, resolution)
        mass = float((vals @ w).sum())
        root = float((np.sqrt(vals) @ w).sum())
        terms.append((mass - root**2 / (k * (hi - lo))) / (2.0 * n))
    return math.fsum(terms)


def hellinger_sq_vs_density(
    truth: Callable,
    kernel: PiecewiseKernel,
    traj: Trajectory,
    resolution: int = 16,
) -> float:
    """Empirical squared Hellinger loss of a histogram against a smooth truth.

    ``truth`` must broadcast over arrays: given (k, d1), (k, d2), (k, d1)
    arrays it returns k density values.  Next-state integrals use
    Gauss-Legendre quadrature with ``resolution`` nodes per axis of each
    leaf block, vectorized over the trajectory.
    """
    shape = SpaceShape(traj.d1, traj.d2)
    if shape.d1 != 1:
        raise NotImplementedError("vectorized loss implemented for 1-d states")
    n = traj.n_transitions
    states = traj.states[:-1]
    controls = traj.controls[:-1]
    pairs = np.hstack([states, controls])
    nodes, weights = np.polynomial.legendre.leggauss(resolution)
    terms = []
    for leaf in kernel.partition:
        foot_box = _foot_box(leaf, shape)
        block = _next_box(leaf, shape)
        lo, hi = block.lo[0], block.hi[0]
        mask = _foot_mask(pairs, foot_box)
        k = int(mask.sum())
        if k == 0:
            continue
        v = kernel.values[leaf]
        ys = (0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)).reshape(1, -1, 1)
        w = 0.5 * (hi - lo) * weights
        xs = np.repeat(states[mask][:, None, :], resolution, axis=1)
        as_ = np.repeat(controls[mask][:, None, :], resolution, axis=1)
        ys_full = np.broadcast_to(ys, (k, resolution, 1))
        flat = truth(
            xs.reshape(-1, shape.d1),
            as_.reshape(-1, shape.d2),
            ys_full.reshape(-1, shape.d1),
        )
        integrand = (np.sqrt(flat) - math.sqrt(v)) ** 2
        per_point = integrand.reshape(k, resolution) @ w
        terms.append(float(per_point.sum()) / (2.0 * n))
    return math.fsum(terms)
