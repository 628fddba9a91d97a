"""Dyadic geometry of the product cube.

The sample space is the unit cube ``[0,1]**D`` where ``D = 2*d1 + d2``:
``d1`` axes for the current state, ``d2`` for the control, and ``d1``
again for the next state.  Cells are nodes of the ``2**D``-ary dyadic
tree, addressed by a path of child indices; a child index packs one bit
per axis (bit ``j`` selects the upper half along axis ``j``).

A partition is a finite leaf antichain whose boxes tile the cube.  The
module provides the lattice operations the estimator needs: splitting,
restriction, overlay, and exhaustive enumeration of all partitions up to
a depth bound.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Sequence

from .errors import (
    EnumerationTooLargeError,
    MaxDepthExceededError,
    PointOutsideDomainError,
)

#: Deepest split level supported.  At depth 40 a cell edge is 2**-40,
#: still comfortably exact in float64.
MAX_DEPTH = 40

#: Refuse exhaustive enumeration beyond this many partitions.
ENUMERATION_CAP = 1_000_000


@dataclass(frozen=True)
class SpaceShape:
    """Axis layout of the (state, control, next state) product cube."""

    d1: int
    d2: int

    def __post_init__(self) -> None:
        if self.d1 < 1 or self.d2 < 1:
            raise ValueError("state and control dimensions must be >= 1")

    @property
    def full_axes(self) -> int:
        return 2 * self.d1 + self.d2

    @property
    def foot_axes(self) -> int:
        """Axes of the (state, control) footprint block."""
        return self.d1 + self.d2

    def footprint_child(self, child: int) -> int:
        """Project a full-space child index onto the footprint axes."""
        return child & ((1 << self.foot_axes) - 1)

    def next_state_child(self, child: int) -> int:
        return child >> self.foot_axes


@dataclass(frozen=True, order=True)
class Cell:
    """A dyadic cell, identified by its path from the root.

    ``path[k]`` is the child index taken at level ``k``; the root is the
    empty path.  The number of axes is not stored -- a cell is reusable
    over the full product space or the footprint space, as long as every
    path entry fits the axis count in play.
    """

    path: tuple[int, ...]

    @property
    def depth(self) -> int:
        return len(self.path)

    def child(self, index: int) -> "Cell":
        return Cell(self.path + (index,))

    def children(self, n_axes: int) -> list["Cell"]:
        if self.depth >= MAX_DEPTH:
            raise MaxDepthExceededError(
                f"cannot split below depth {MAX_DEPTH}"
            )
        return [self.child(i) for i in range(1 << n_axes)]

    def ancestor(self, depth: int) -> "Cell":
        if not 0 <= depth <= self.depth:
            raise ValueError(f"no ancestor of {self} at depth {depth}")
        return Cell(self.path[:depth])

    def ancestors(self) -> Iterator["Cell"]:
        """Strict ancestors, root first."""
        for j in range(self.depth):
            yield Cell(self.path[:j])

    def contains(self, other: "Cell") -> bool:
        """Ancestor-or-equal in the tree order."""
        return other.path[: self.depth] == self.path

    def box(self, n_axes: int) -> "Box":
        lo = [0.0] * n_axes
        width = 1.0
        for child in self.path:
            width *= 0.5
            for axis in range(n_axes):
                if (child >> axis) & 1:
                    lo[axis] += width
        hi = [a + width for a in lo]
        return Box(tuple(lo), tuple(hi))

    def footprint(self, shape: SpaceShape) -> "Cell":
        """Project a full-space cell onto the (state, control) axes."""
        return Cell(tuple(shape.footprint_child(c) for c in self.path))

    def to_json(self) -> dict:
        return {"path": list(self.path), "depth": self.depth}

    @classmethod
    def from_json(cls, obj: dict) -> "Cell":
        path = tuple(int(c) for c in obj["path"])
        if len(path) != int(obj.get("depth", len(path))):
            raise ValueError("cell depth disagrees with path length")
        return cls(path)

    def __repr__(self) -> str:  # compact: Cell(3,0,7)
        return f"Cell({','.join(map(str, self.path))})"


ROOT = Cell(())


@dataclass(frozen=True)
class Box:
    """Axis-aligned box with dyadic-rational corners."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def volume(self) -> float:
        return math.prod(h - l for l, h in zip(self.lo, self.hi))

    def contains_point(self, point: Sequence[float]) -> bool:
        """Half-open membership, closed on the cube's upper boundary."""
        for p, l, h in zip(point, self.lo, self.hi):
            if not (l <= p < h or (h == 1.0 and p == 1.0)):
                return False
        return True

    def overlap_fraction(self, other: "Box") -> float:
        """Fraction of *other*'s volume covered by this box."""
        frac = 1.0
        for l1, h1, l2, h2 in zip(self.lo, self.hi, other.lo, other.hi):
            width = h2 - l2
            inter = min(h1, h2) - max(l1, l2)
            if inter <= 0.0:
                return 0.0
            frac *= inter / width
        return frac


def cell_at_point(point: Sequence[float], depth: int, n_axes: int) -> Cell:
    """The depth-``depth`` cell containing ``point``.

    Cells are half-open; the cube's upper boundary is folded into the
    last cell along each axis.
    """
    if len(point) != n_axes:
        raise ValueError(f"expected {n_axes} coordinates, got {len(point)}")
    coords = []
    scale = 1 << depth
    for p in point:
        if not 0.0 <= p <= 1.0:
            raise PointOutsideDomainError(f"coordinate {p!r} outside [0, 1]")
        coords.append(min(int(p * scale), scale - 1))
    path = []
    for level in range(depth):
        shift = depth - 1 - level
        child = 0
        for axis, c in enumerate(coords):
            child |= ((c >> shift) & 1) << axis
        path.append(child)
    return Cell(tuple(path))


class Partition:
    """A dyadic partition: a leaf antichain tiling the unit cube.

    Leaves are kept sorted by path, which groups ancestors immediately
    before their descendants and makes the antichain check linear.
    """

    __slots__ = ("leaves", "_leaf_set")

    def __init__(self, leaves: Iterable[Cell], n_axes: int, *, validate: bool = True):
        ordered = tuple(sorted(leaves))
        if validate:
            _check_partition(ordered, n_axes)
        self.leaves = ordered
        self._leaf_set = frozenset(ordered)

    def __len__(self) -> int:
        return len(self.leaves)

    def __iter__(self) -> Iterator[Cell]:
        return iter(self.leaves)

    def __contains__(self, cell: Cell) -> bool:
        return cell in self._leaf_set

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Partition) and self.leaves == other.leaves

    def __hash__(self) -> int:
        return hash(self.leaves)

    def __repr__(self) -> str:
        return f"Partition({len(self.leaves)} leaves)"

    @property
    def max_depth(self) -> int:
        return max(leaf.depth for leaf in self.leaves)

    def leaf_containing(self, cell: Cell) -> Cell:
        """The unique leaf that is an ancestor-or-equal of ``cell``."""
        for j in range(cell.depth + 1):
            anc = cell.ancestor(j)
            if anc in self._leaf_set:
                return anc
        raise KeyError(f"{cell} is strictly above every leaf")

    def leaf_at_point(self, point: Sequence[float], n_axes: int) -> Cell:
        cell = cell_at_point(point, self.max_depth, n_axes)
        return self.leaf_containing(cell)

    def to_json(self) -> dict:
        return {"leaves": [leaf.to_json() for leaf in self.leaves]}

    @classmethod
    def from_json(cls, obj: dict, n_axes: int) -> "Partition":
        return cls((Cell.from_json(c) for c in obj["leaves"]), n_axes)


def _check_partition(ordered: tuple[Cell, ...], n_axes: int) -> None:
    if not ordered:
        raise ValueError("a partition needs at least one leaf")
    for a, b in itertools.pairwise(ordered):
        if a.contains(b):
            raise ValueError(f"{a} and {b} are nested: not an antichain")
    # An antichain tiles the cube iff its volumes sum to 1 (exactly, in
    # integer arithmetic at the deepest level).
    deepest = max(c.depth for c in ordered)
    total = sum(1 << (n_axes * (deepest - c.depth)) for c in ordered)
    if total != 1 << (n_axes * deepest):
        raise ValueError("leaves do not tile the cube")


def root_partition(n_axes: int) -> Partition:
    return Partition((ROOT,), n_axes, validate=False)


def uniform_partition(depth: int, n_axes: int) -> Partition:
    """All cells at a fixed depth."""
    if depth == 0:
        return root_partition(n_axes)
    arity = 1 << n_axes
    leaves = (Cell(path) for path in itertools.product(range(arity), repeat=depth))
    return Partition(leaves, n_axes, validate=False)


def split_leaf(partition: Partition, leaf: Cell, n_axes: int) -> Partition:
    """Replace one leaf by its 2**n_axes children."""
    if leaf not in partition:
        raise KeyError(f"{leaf} is not a leaf of the partition")
    leaves = [c for c in partition.leaves if c != leaf]
    leaves.extend(leaf.children(n_axes))
    return Partition(leaves, n_axes, validate=False)


def restrict_partition(partition: Partition, cell: Cell) -> tuple[Cell, ...]:
    """Pieces of ``partition`` intersected with ``cell``.

    Every piece is either ``cell`` itself (when some leaf contains it) or
    a strict descendant of ``cell`` (a leaf below it).  The returned
    pieces tile ``cell``.
    """
    for j in range(cell.depth + 1):
        if cell.ancestor(j) in partition:
            return (cell,)
    pieces = tuple(leaf for leaf in partition.leaves if cell.contains(leaf))
    if not pieces:
        raise ValueError(f"{cell} deeper than the partition's leaves under it")
    return pieces


def overlay(m1: Partition, m2: Partition, n_axes: int) -> Partition:
    """Common refinement: each piece is the deeper of two nested cells."""
    pieces: list[Cell] = []
    for leaf in m1.leaves:
        pieces.extend(restrict_partition(m2, leaf))
    return Partition(pieces, n_axes, validate=False)


def count_partitions(max_depth: int, n_axes: int) -> int:
    """Number of dyadic partitions with leaves at depth <= max_depth."""
    count = 1
    for _ in range(max_depth):
        count = 1 + count ** (1 << n_axes)
    return count


def enumerate_partitions(max_depth: int, n_axes: int) -> list[Partition]:
    """All partitions of depth <= max_depth, coarsest first.

    Guarded: raises when the family exceeds ``ENUMERATION_CAP``.
    """
    total = count_partitions(max_depth, n_axes)
    if total > ENUMERATION_CAP:
        raise EnumerationTooLargeError(
            f"{total} partitions at depth {max_depth} with {n_axes} axes "
            f"exceeds the cap of {ENUMERATION_CAP}"
        )

    def antichains(cell: Cell, budget: int) -> list[tuple[Cell, ...]]:
        results = [(cell,)]
        if budget > 0:
            child_chains = [
                antichains(child, budget - 1) for child in cell.children(n_axes)
            ]
            for combo in itertools.product(*child_chains):
                results.append(tuple(itertools.chain.from_iterable(combo)))
        return results

    chains = antichains(ROOT, max_depth)
    chains.sort(key=len)
    return [Partition(c, n_axes, validate=False) for c in chains]


def random_partition(
    rng, max_depth: int, n_axes: int, split_probability: float = 0.5
) -> Partition:
    """Sample a partition by recursive coin-flip splitting."""
    leaves: list[Cell] = []

    def grow(cell: Cell) -> None:
        if cell.depth < max_depth and rng.random() < split_probability:
            for child in cell.children(n_axes):
                grow(child)
        else:
            leaves.append(cell)

    grow(ROOT)
    return Partition(leaves, n_axes, validate=False)


def complement_cells(cell: Cell, n_axes: int) -> list[Cell]:
    """Dyadic cells tiling the cube minus ``cell``: all siblings along
    the ancestor chain."""
    arity = 1 << n_axes
    out = []
    for level, taken in enumerate(cell.path):
        prefix = cell.path[:level]
        out.extend(Cell(prefix + (i,)) for i in range(arity) if i != taken)
    return out
