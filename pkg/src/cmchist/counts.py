"""Sparse occupancy counts over the dyadic tree.

For a trajectory with ``n`` transitions the tree records, at every depth
``t <= depth``, how many transition triples ``(X_i, a_i, X_{i+1})`` fall
in each full-space cell (``N``) and how many footprint pairs
``(X_i, a_i)`` fall in each (state, control) cell (``M``).  Only
occupied nodes are materialized, so memory is ``O(n * depth)``.

Nodes are keyed by ``(depth, code)`` where ``code`` packs the path's
child indices most-significant-level first; truncating a code by one
level is a single shift, which keeps the per-depth accumulation a pure
numpy reduction.

By construction the counts are conserved: summing ``N`` over the
``2**d1`` next-state blocks of any footprint cell recovers that cell's
``M`` exactly (integer arithmetic, no tolerance).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PointOutsideDomainError, UnindexedDepthError
from .geometry import Cell, SpaceShape
from .trajectory import Trajectory

_CODE_BITS = 62  # stay within int64


def code_of_path(path: tuple[int, ...], n_axes: int) -> int:
    code = 0
    for entry in path:
        code = (code << n_axes) | entry
    return code


def path_of_code(code: int, depth: int, n_axes: int) -> tuple[int, ...]:
    mask = (1 << n_axes) - 1
    return tuple((code >> (n_axes * (depth - 1 - k))) & mask for k in range(depth))


def interleave(points: np.ndarray, depth: int) -> np.ndarray:
    """Depth-``depth`` cell codes for points in the unit cube.

    ``points`` is ``(n, n_axes)``; the result is ``(n,)`` int64.  The
    upper boundary folds into the last cell along each axis.
    """
    n_axes = points.shape[1]
    if n_axes * depth > _CODE_BITS:
        raise UnindexedDepthError(
            f"{n_axes} axes at depth {depth} exceeds the 62-bit code budget"
        )
    scale = 1 << depth
    coords = np.minimum((points * scale).astype(np.int64), scale - 1)
    codes = np.zeros(len(points), dtype=np.int64)
    for level in range(depth):
        shift = depth - 1 - level
        child = np.zeros(len(points), dtype=np.int64)
        for axis in range(n_axes):
            child |= ((coords[:, axis] >> shift) & 1) << axis
        codes = (codes << n_axes) | child
    return codes


@dataclass(frozen=True)
class CellCounts:
    n_triples: int
    n_pairs: int
    next_volume: float

    @property
    def hist_value(self) -> float:
        """N / (M * Vol(C)) with the 0/0 -> 0 convention."""
        if self.n_triples == 0:
            return 0.0
        return self.n_triples / (self.n_pairs * self.next_volume)


class CountTree:
    """Triple and pair occupancy counts down to a fixed depth bound."""

    def __init__(self, traj: Trajectory, depth: int, shape: SpaceShape | None = None):
        if shape is None:
            shape = SpaceShape(traj.d1, traj.d2)
        if shape.d1 != traj.d1 or shape.d2 != traj.d2:
            raise ValueError("shape disagrees with trajectory dimensions")
        if not traj.in_unit_cube():
            raise PointOutsideDomainError(
                "trajectory must lie in the unit cube; rescale it first"
            )
        self.shape = shape
        self.depth = depth
        self.n = traj.n_transitions

        triples = traj.triple_matrix()
        pairs = traj.pair_matrix()
        self._triple_leaf_codes = interleave(triples, depth)
        self._pair_leaf_codes = interleave(pairs, depth)
        self.triple_counts = _accumulate(
            self._triple_leaf_codes, depth, shape.full_axes
        )
        self.pair_counts = _accumulate(self._pair_leaf_codes, depth, shape.foot_axes)
        self.triple_children = _child_map(self.triple_counts, shape.full_axes)

    def _key(self, cell: Cell, n_axes: int) -> tuple[int, int]:
        if cell.depth > self.depth:
            raise UnindexedDepthError(
                f"depth {cell.depth} beyond the tree's bound of {self.depth}"
            )
        return cell.depth, code_of_path(cell.path, n_axes)

    def n_triples(self, cell: Cell) -> int:
        return self.triple_counts.get(self._key(cell, self.shape.full_axes), 0)

    def n_pairs(self, foot_cell: Cell) -> int:
        return self.pair_counts.get(self._key(foot_cell, self.shape.foot_axes), 0)

    def next_volume(self, depth: int) -> float:
        return 2.0 ** (-depth * self.shape.d1)

    def query(self, cell: Cell) -> CellCounts:
        """Counts for a full-space cell."""
        return CellCounts(
            n_triples=self.n_triples(cell),
            n_pairs=self.n_pairs(cell.footprint(self.shape)),
            next_volume=self.next_volume(cell.depth),
        )

    def hist_value(self, cell: Cell) -> float:
        return self.query(cell).hist_value

    def occupied_cells(self, depth: int) -> list[Cell]:
        """Full-space cells with at least one triple at a given depth."""
        if depth > self.depth:
            raise UnindexedDepthError(
                f"depth {depth} beyond the tree's bound of {self.depth}"
            )
        axes = self.shape.full_axes
        return [
            Cell(path_of_code(code, d, axes))
            for (d, code) in self.triple_counts
            if d == depth
        ]


def _accumulate(leaf_codes: np.ndarray, depth: int, n_axes: int) -> dict:
    counts: dict[tuple[int, int], int] = {}
    for t in range(depth, -1, -1):
        codes = leaf_codes >> (n_axes * (depth - t))
        uniq, cnt = np.unique(codes, return_counts=True)
        for code, c in zip(uniq.tolist(), cnt.tolist()):
            counts[(t, code)] = c
    return counts


def _child_map(counts: dict, n_axes: int) -> dict:
    children: dict[tuple[int, int], list[int]] = {}
    for (t, code) in counts:
        if t == 0:
            continue
        children.setdefault((t - 1, code >> n_axes), []).append(code)
    return {key: sorted(codes) for key, codes in children.items()}
