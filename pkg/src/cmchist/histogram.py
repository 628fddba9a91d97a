"""Piecewise-constant transition kernels on dyadic partitions.

The estimator for a partition ``m`` assigns to each leaf ``K = A x B x C``
the value ``N(K) / (M(A x B) * Vol(C))`` -- triples through the cell over
pairs through its footprint, normalized by next-state volume -- with the
``0/0 -> 0`` convention.  Summing ``value * Vol(C)`` over the next-state
blocks above any footprint therefore reproduces ``N/M`` ratios exactly;
``next_state_mass`` exposes that sum, optionally in exact rational
arithmetic.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .counts import CountTree
from .errors import NegativeDensityError
from .geometry import Box, Cell, Partition, SpaceShape, cell_at_point
from .trajectory import Trajectory

KernelLike = "PiecewiseKernel | Callable[[np.ndarray, np.ndarray, np.ndarray], float]"


class PiecewiseKernel:
    """A nonnegative piecewise-constant function on a dyadic partition."""

    def __init__(
        self,
        partition: Partition,
        values: dict[Cell, float],
        shape: SpaceShape,
        exact_ratios: dict[Cell, tuple[int, int]] | None = None,
        meta: dict | None = None,
    ):
        for leaf in partition:
            v = values.get(leaf, 0.0)
            if v < 0:
                raise NegativeDensityError(f"negative value {v} on {leaf}")
        self.partition = partition
        self.values = {leaf: float(values.get(leaf, 0.0)) for leaf in partition}
        self.shape = shape
        self.exact_ratios = exact_ratios
        self.meta = meta or {}

    def value_on(self, cell: Cell) -> float:
        """Value on any cell nested inside a leaf."""
        return self.values[self.partition.leaf_containing(cell)]

    def __call__(self, x, a, y) -> float:
        point = np.concatenate([np.atleast_1d(x), np.atleast_1d(a), np.atleast_1d(y)])
        leaf = self.partition.leaf_at_point(point, self.shape.full_axes)
        return self.values[leaf]

    def next_state_mass(self, x, a, exact: bool = False):
        """Integral of the kernel over next states at a fixed (x, a).

        With ``exact=True`` (fitted kernels only) the mass is assembled
        from the stored integer count ratios as a ``Fraction``.
        """
        point = np.concatenate([np.atleast_1d(x), np.atleast_1d(a)])
        foot_axes = self.shape.foot_axes
        total_exact = Fraction(0)
        total_float = 0.0
        for leaf in self.partition:
            foot_box = leaf.footprint(self.shape).box(foot_axes)
            if not foot_box.contains_point(point):
                continue
            vol_next = 2.0 ** (-leaf.depth * self.shape.d1)
            if exact:
                if self.exact_ratios is None:
                    raise ValueError("kernel carries no exact count ratios")
                n_triples, n_pairs = self.exact_ratios[leaf]
                if n_triples:
                    # value * Vol(C) = N / M exactly
                    total_exact += Fraction(n_triples, n_pairs)
            else:
                total_float += self.values[leaf] * vol_next
        return total_exact if exact else total_float

    def sup_norm(self) -> float:
        return max(self.values.values())

    def to_json(self) -> dict:
        obj = {
            "d1": self.shape.d1,
            "d2": self.shape.d2,
            "partition": self.partition.to_json(),
            "values": [self.values[leaf] for leaf in self.partition],
            "meta": self.meta,
        }
        if self.exact_ratios is not None:
            obj["exact_ratios"] = [
                list(self.exact_ratios[leaf]) for leaf in self.partition
            ]
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "PiecewiseKernel":
        shape = SpaceShape(int(obj["d1"]), int(obj["d2"]))
        partition = Partition.from_json(obj["partition"], shape.full_axes)
        values = dict(zip(partition.leaves, obj["values"]))
        exact = None
        if "exact_ratios" in obj:
            exact = {
                leaf: (int(n), int(m))
                for leaf, (n, m) in zip(partition.leaves, obj["exact_ratios"])
            }
        return cls(partition, values, shape, exact_ratios=exact, meta=obj.get("meta"))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path: str | Path) -> "PiecewiseKernel":
        return cls.from_json(json.loads(Path(path).read_text()))


def constant_kernel(value: float, shape: SpaceShape) -> PiecewiseKernel:
    from .geometry import root_partition

    part = root_partition(shape.full_axes)
    return PiecewiseKernel(part, {next(iter(part)): value}, shape)


def fit_histogram(tree: CountTree, partition: Partition) -> PiecewiseKernel:
    """The histogram estimator on a fixed partition."""
    values: dict[Cell, float] = {}
    exact: dict[Cell, tuple[int, int]] = {}
    for leaf in partition:
        counts = tree.query(leaf)
        values[leaf] = counts.hist_value
        exact[leaf] = (counts.n_triples, counts.n_pairs)
    return PiecewiseKernel(
        partition,
        values,
        tree.shape,
        exact_ratios=exact,
        meta={"n": tree.n, "depth_bound": tree.depth},
    )


def _next_block_integral(
    truth,
    x: np.ndarray,
    a: np.ndarray,
    block: Box,
    d1: int,
    resolution: int,
    transform=None,
) -> float:
    """Integral of transform(truth(x, a, .)) over a next-state box.

    Exact for piecewise-constant truths (any pointwise transform);
    midpoint rule otherwise.
    """
    if isinstance(truth, PiecewiseKernel):
        # leaves whose footprint holds (x, a) tile the next-state axis,
        # so piecewise-constant truths integrate exactly
        total = 0.0
        foot_axes = truth.shape.foot_axes
        point = np.concatenate([x, a])
        for leaf, v in truth.values.items():
            if not leaf.footprint(truth.shape).box(foot_axes).contains_point(point):
                continue
            own_block = _next_box(leaf, truth.shape)
            frac = block.overlap_fraction(own_block)
            if frac:
                total += (transform(v) if transform else v) * frac * own_block.volume()
        return total
    # midpoint rule, `resolution` nodes per axis
    axes = [
        np.linspace(lo, hi, 2 * resolution + 1)[1::2]
        for lo, hi in zip(block.lo, block.hi)
    ]
    grids = np.meshgrid(*axes, indexing="ij")
    ys = np.stack([g.ravel() for g in grids], axis=-1)
    vals = [truth(x, a, y) for y in ys]
    if transform is not None:
        vals = [transform(v) for v in vals]
    return float(np.mean(vals) * block.volume())


def _next_box(cell: Cell, shape: SpaceShape) -> Box:
    full = cell.box(shape.full_axes)
    return Box(full.lo[shape.foot_axes :], full.hi[shape.foot_axes :])


def _foot_box(cell: Cell, shape: SpaceShape) -> Box:
    full = cell.box(shape.full_axes)
    return Box(full.lo[: shape.foot_axes], full.hi[: shape.foot_axes])


def conditional_projection(
    truth,
    traj: Trajectory,
    partition: Partition,
    resolution: int = 8,
) -> PiecewiseKernel:
    """Project a true kernel onto a partition under the empirical pair law.

    On each leaf the projected value averages, over the observed pairs in
    the leaf's footprint, the truth's conditional mass of the leaf's
    next-state block, divided by the block volume.  Empty footprints get
    zero.  Piecewise-constant truths are integrated exactly; callables
    with a midpoint rule at ``resolution >= 2`` nodes per axis.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2 nodes per axis")
    shape = SpaceShape(traj.d1, traj.d2)
    pairs = traj.pair_matrix()
    values: dict[Cell, float] = {}
    for leaf in partition:
        foot_box = _foot_box(leaf, shape)
        block = _next_box(leaf, shape)
        inside = [
            i for i in range(len(pairs)) if foot_box.contains_point(pairs[i])
        ]
        if not inside:
            values[leaf] = 0.0
            continue
        acc = 0.0
        for i in inside:
            x, a = traj.states[i], traj.controls[i]
            acc += _next_block_integral(truth, x, a, block, shape.d1, resolution)
        values[leaf] = acc / (len(inside) * block.volume())
    return PiecewiseKernel(partition, values, shape, meta={"projection": True})
