"""Exact minimal consistent trees by memoized search over instance subsets."""

from __future__ import annotations

import numpy as np

from .clustering import LabeledDataset
from .errors import BudgetError, NoConsistentTreeError
from .splits import candidate_set
from .tree import Branch, Leaf, Node, SplitCriterion

DEFAULT_BUDGET = 24


def subset_key(rows) -> tuple[int, ...]:
    """Canonical memo key for a set of row ids."""
    return tuple(sorted(int(r) for r in rows))


class MinimalTreeOracle:
    """Memoized ``mts`` for subsets of one dataset.

    ``mts(S)`` is 1 for a pure set and otherwise
    ``1 + min_c mts(left_c) + mts(right_c)`` over the valid criteria of S.
    The memo only ever receives the value the recursion computes, so
    sharing one oracle across callers is safe.
    """

    def __init__(self, d: LabeledDataset, budget: int = DEFAULT_BUDGET):
        self.d = d
        self.budget = budget
        self._memo: dict[tuple[int, ...], tuple[int, int]] = {}
        self._cands: dict[tuple[int, ...], object] = {}

    def _check(self, key):
        if len(key) == 0:
            raise ValueError("mts of an empty instance set")
        if len(key) > self.budget:
            raise BudgetError(f"{len(key)} instances exceed the oracle budget of {self.budget}")

    def _solve(self, key) -> tuple[int, int]:
        """(mts, index of the first optimal criterion or -1 for a pure set)."""
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        rows = np.fromiter(key, dtype=np.int64, count=len(key))
        if len(np.unique(self.d.labels[rows])) <= 1:
            res = (1, -1)
        else:
            cs = candidate_set(self.d, rows)
            self._cands[key] = cs
            if len(cs) == 0:
                raise NoConsistentTreeError(
                    f"rows {list(key)} have identical features but different labels")
            best, arg = None, -1
            for c in range(len(cs)):
                left, right = cs.sides(c)
                lv = self._solve(tuple(left.tolist()))[0]
                if best is not None and 2 + lv >= best:
                    continue
                val = 1 + lv + self._solve(tuple(right.tolist()))[0]
                if best is None or val < best:
                    best, arg = val, c
                    if best == 3:
                        break
            res = (best, arg)
        self._memo[key] = res
        return res

    def mts(self, rows) -> int:
        key = subset_key(rows)
        self._check(key)
        return self._solve(key)[0]

    def delta_mts(self, rows, criterion: SplitCriterion) -> int:
        """Minimal remaining size after splitting ``rows`` at ``criterion``."""
        rows = np.asarray(rows, dtype=np.int64)
        self._check(subset_key(rows))
        go_left = self.d.features[rows, criterion.feature] <= criterion.threshold
        if go_left.all() or not go_left.any():
            raise ValueError(f"criterion {criterion} does not split the instances")
        return self.mts(rows[go_left]) + self.mts(rows[~go_left])

    def minimal_tree(self, rows) -> Node:
        key = subset_key(rows)
        self._check(key)
        value, arg = self._solve(key)
        if arg < 0:
            return Leaf(int(self.d.labels[key[0]]))
        cs = self._cands[key]
        left, right = cs.sides(arg)
        return Branch(cs.criterion(arg), self.minimal_tree(left), self.minimal_tree(right))


def mts(d: LabeledDataset, rows=None, budget: int = DEFAULT_BUDGET) -> int:
    rows = d.all_rows() if rows is None else rows
    return MinimalTreeOracle(d, budget).mts(rows)


def minimal_tree(d: LabeledDataset, rows=None, budget: int = DEFAULT_BUDGET) -> Node:
    rows = d.all_rows() if rows is None else rows
    return MinimalTreeOracle(d, budget).minimal_tree(rows)


def delta_mts(d: LabeledDataset, leaf_rows, criterion: SplitCriterion,
              budget: int = DEFAULT_BUDGET) -> int:
    return MinimalTreeOracle(d, budget).delta_mts(leaf_rows, criterion)
