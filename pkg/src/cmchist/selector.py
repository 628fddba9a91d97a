"""Penalized partition selection by pairwise comparisons.

Each candidate partition ``m`` is scored by

    gamma(m) = sum over leaves K of  sup over competitors m' of
        [ weighted Hellinger + comparison statistic - penalty(pieces) ]
      + 2 * penalty(|m|)

where the sup ranges over every partition in the dyadic family and the
bracket is localized to ``K`` through the competitor's restriction.  Two
structural facts make exact minimization cheap:

* the histogram value on a cell does not depend on the partition the
  cell belongs to, so the per-leaf sup is a pure function of the leaf;
* inside the sup, pieces strictly below ``K`` carry their own histogram
  value, while the piece equal to ``K`` may also borrow the value of any
  ancestor of ``K``; the sup therefore decomposes over the subtree.

Together they give a bottom-up dynamic program over the occupied nodes
of the count tree, linear in the tree size, with subtrees holding no
transitions collapsed in closed form.  ``brute_force_select`` minimizes
the same objective by literal enumeration, with scores assembled from
the loss-module primitives, and is the reference the fast path is tested
against.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

from .counts import CountTree, code_of_path
from .geometry import Cell, Partition, enumerate_partitions
from .histogram import PiecewiseKernel, fit_histogram
from .losses import (
    MIN_PENALTY_SCALE,
    SCORE_HELLINGER_WEIGHT,
    cell_score,
    penalty,
    pieces_of_restriction,
    psi,
)

#: Per-unit-mass score of a subtree with no transitions, any split.
_ZERO_COEF = SCORE_HELLINGER_WEIGHT / 2.0 + 1.0 - 1.0 / math.sqrt(2.0)


@dataclass
class SelectionResult:
    partition: Partition
    kernel: PiecewiseKernel
    gamma: float
    penalty_scale: float
    effective_depth: int
    runtime_seconds: float
    meta: dict = field(default_factory=dict)


class _Program:
    """Shared state of the selection dynamic program."""

    def __init__(self, tree: CountTree, scale: float):
        self.tree = tree
        self.shape = tree.shape
        self.n = tree.n
        self.axes = self.shape.full_axes
        self.arity = 1 << self.axes
        self.effective_depth = min(tree.depth, tree.n)
        self.scale = scale
        self.pen_unit = penalty(1, tree.n, scale)

    # -- node lookups ----------------------------------------------------

    def _foot_code(self, code: int, depth: int) -> int:
        mask = (1 << self.shape.foot_axes) - 1
        out = 0
        for level in range(depth):
            child = (code >> (self.axes * (depth - 1 - level))) & (self.arity - 1)
            out = (out << self.shape.foot_axes) | (child & mask)
        return out

    def _counts(self, depth: int, code: int) -> tuple[int, int, float]:
        n_triples = self.tree.triple_counts.get((depth, code), 0)
        n_pairs = self.tree.pair_counts.get(
            (depth, self._foot_code(code, depth)), 0
        )
        return n_triples, n_pairs, 2.0 ** (-depth * self.shape.d1)

    def _hist(self, depth: int, code: int) -> float:
        n_triples, n_pairs, vol = self._counts(depth, code)
        if n_triples == 0:
            return 0.0
        return n_triples / (n_pairs * vol)

    # -- inner sup over competitors ---------------------------------------

    def _piece_score(
        self, n_triples: int, n_pairs: int, vol: float, c: float, v: float
    ) -> float:
        s1, s2 = math.sqrt(c), math.sqrt(v)
        w = n_pairs * vol
        hell = w * (s1 - s2) ** 2 / (2.0 * self.n)
        tstat = (
            n_triples * psi(c, v)
            + w * (math.sqrt((c + v) / 2.0) * (s2 - s1) + (c - v))
        ) / self.n
        return SCORE_HELLINGER_WEIGHT * hell + tstat - self.pen_unit

    def _split_sum(self, depth: int, code: int, c: float, w_node: float) -> float:
        """Best score of splitting: children solved recursively, with all
        transition-free children folded into one closed-form term."""
        kids = self.tree.triple_children.get((depth, code), ())
        parts = []
        w_occupied = 0.0
        for kid in kids:
            parts.append(self._descend(depth + 1, kid, c))
            _, kp, kvol = self._counts(depth + 1, kid)
            w_occupied += kp * kvol
        n_empty = self.arity - len(kids)
        parts.append(
            (w_node - w_occupied) * c * _ZERO_COEF / self.n
            - n_empty * self.pen_unit
        )
        return math.fsum(parts)

    def _descend(self, depth: int, code: int, c: float) -> float:
        """Sup over antichains of this subtree, own-value pieces only."""
        n_triples, n_pairs, vol = self._counts(depth, code)
        w = n_pairs * vol
        if n_triples == 0:
            # every piece below has histogram value 0: data terms add up
            # the same for any split, penalties favor a single piece
            return w * c * _ZERO_COEF / self.n - self.pen_unit
        best = self._piece_score(n_triples, n_pairs, vol, c, n_triples / w)
        if depth < self.effective_depth:
            best = max(best, self._split_sum(depth, code, c, w))
        return best

    def top_score(self, depth: int, code: int, c: float) -> float:
        """Sup over competitors restricted to the cell, full candidate set:
        the cell itself may borrow any ancestor's histogram value."""
        n_triples, n_pairs, vol = self._counts(depth, code)
        values = {self._hist(depth, code)}
        for level in range(depth):
            values.add(self._hist(level, code >> (self.axes * (depth - level))))
        best = max(
            self._piece_score(n_triples, n_pairs, vol, c, v) for v in values
        )
        if depth < self.effective_depth:
            best = max(best, self._split_sum(depth, code, c, n_pairs * vol))
        return best

    # -- outer minimization ------------------------------------------------

    def minimize(self, depth: int, code: int, path: tuple[int, ...]):
        own = self.top_score(depth, code, self._hist(depth, code))
        leaf_value = own + 2.0 * self.pen_unit
        if depth >= self.effective_depth:
            return leaf_value, [Cell(path)]
        kids = self.tree.triple_children.get((depth, code), ())
        parts, leaves = [], []
        for kid in kids:
            value, sub = self.minimize(depth + 1, kid, path + (kid & (self.arity - 1),))
            parts.append(value)
            leaves.extend(sub)
        kid_children = {kid & (self.arity - 1) for kid in kids}
        for i in range(self.arity):
            if i not in kid_children:
                # transition-free region: collapses to a single leaf
                parts.append(self.pen_unit)
                leaves.append(Cell(path + (i,)))
        split_value = math.fsum(parts)
        if leaf_value <= split_value:  # ties prefer the coarser model
            return leaf_value, [Cell(path)]
        return split_value, leaves


def inner_sup(tree: CountTree, cell: Cell, own_value: float, scale: float = MIN_PENALTY_SCALE) -> float:
    """Sup over competitor partitions of the localized comparison score."""
    program = _Program(tree, scale)
    return program.top_score(cell.depth, code_of_path(cell.path, program.axes), own_value)


def gamma_of(tree: CountTree, partition: Partition, scale: float = MIN_PENALTY_SCALE) -> float:
    """Selection objective of one partition, by the fast per-leaf sup."""
    program = _Program(tree, scale)
    terms = []
    for leaf in partition:
        code = code_of_path(leaf.path, program.axes)
        terms.append(program.top_score(leaf.depth, code, program._hist(leaf.depth, code)))
    return math.fsum(terms) + 2.0 * penalty(len(partition), tree.n, scale)


def select_partition(tree: CountTree, scale: float = MIN_PENALTY_SCALE) -> SelectionResult:
    """Exact minimizer of the selection objective over the dyadic family.

    Ties break toward coarser partitions at every node, so the result is
    the unique coarsest minimizer.
    """
    start = time.perf_counter()
    program = _Program(tree, scale)
    gamma, leaves = program.minimize(0, 0, ())
    partition = Partition(leaves, program.axes, validate=False)
    kernel = fit_histogram(tree, partition)
    return SelectionResult(
        partition=partition,
        kernel=kernel,
        gamma=gamma,
        penalty_scale=scale,
        effective_depth=program.effective_depth,
        runtime_seconds=time.perf_counter() - start,
        meta={"n": tree.n, "n_leaves": len(partition)},
    )


def brute_force_gamma(
    tree: CountTree,
    partition: Partition,
    competitors: list[Partition],
    scale: float = MIN_PENALTY_SCALE,
) -> float:
    """Objective by literal enumeration, assembled from loss primitives."""
    pen_unit = penalty(1, tree.n, scale)
    totals = []
    for leaf in partition:
        own_value = tree.hist_value(leaf)
        best = -math.inf
        for competitor in competitors:
            score = math.fsum(
                cell_score(piece, own_value, tree.hist_value(source), tree, pen_unit)
                for piece, source in pieces_of_restriction(competitor, leaf)
            )
            best = max(best, score)
        totals.append(best)
    return math.fsum(totals) + 2.0 * penalty(len(partition), tree.n, scale)


def brute_force_select(
    tree: CountTree, scale: float = MIN_PENALTY_SCALE
) -> tuple[Partition, float]:
    """Reference minimizer: enumerate the whole family.

    Candidates are visited coarsest first and only strict improvements
    are kept, matching the fast path's preference for coarse models.
    """
    effective_depth = min(tree.depth, tree.n)
    family = enumerate_partitions(effective_depth, tree.shape.full_axes)
    pen_unit = penalty(1, tree.n, scale)

    cells = {leaf for m in family for leaf in m}
    sup_table: dict[Cell, float] = {}
    for cell in cells:
        own_value = tree.hist_value(cell)
        sup_table[cell] = max(
            math.fsum(
                cell_score(piece, own_value, tree.hist_value(source), tree, pen_unit)
                for piece, source in pieces_of_restriction(competitor, cell)
            )
            for competitor in family
        )

    best_partition, best_gamma = None, math.inf
    for m in family:  # sorted by leaf count: coarsest first
        gamma = math.fsum(sup_table[leaf] for leaf in m) + 2.0 * penalty(
            len(m), tree.n, scale
        )
        if gamma < best_gamma:
            best_partition, best_gamma = m, gamma
    return best_partition, best_gamma
