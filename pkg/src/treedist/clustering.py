"""Labeled datasets, clusterings over row-id universes, and contingency tables."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, InvalidLabelError, UniverseMismatchError


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Feature matrix (n x m) with one class index per row.

    ``k`` may exceed the number of classes actually present.
    """

    features: np.ndarray
    labels: np.ndarray
    k: int
    feature_names: tuple[str, ...] = ()
    class_names: tuple[str, ...] = ()

    def __post_init__(self):
        X = np.array(self.features, dtype=float, ndmin=2, copy=True)
        y = np.array(self.labels, dtype=np.int64, copy=True).reshape(-1)
        if X.size == 0:
            X = X.reshape(len(y), -1 if len(y) else 0)
        if X.shape[0] != len(y):
            raise DataError(f"{X.shape[0]} feature rows but {len(y)} labels")
        if self.k < 1:
            raise DataError("class count k must be >= 1")
        if not np.all(np.isfinite(X)):
            raise DataError("feature values must be finite")
        if len(y) and (y.min() < 0 or y.max() >= self.k):
            raise InvalidLabelError(f"labels must lie in 0..{self.k - 1}")
        object.__setattr__(self, "features", _frozen(X))
        object.__setattr__(self, "labels", _frozen(y))
        fn = tuple(self.feature_names) or tuple(f"x{j}" for j in range(X.shape[1]))
        cn = tuple(self.class_names) or tuple(str(i) for i in range(self.k))
        if len(fn) != X.shape[1]:
            raise DataError("feature_names length does not match feature count")
        if len(cn) != self.k:
            raise DataError("class_names length does not match k")
        object.__setattr__(self, "feature_names", fn)
        object.__setattr__(self, "class_names", cn)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def m(self) -> int:
        return self.features.shape[1]

    def all_rows(self) -> np.ndarray:
        return np.arange(self.n)

    def with_labels(self, labels) -> "LabeledDataset":
        return LabeledDataset(self.features, labels, self.k,
                              self.feature_names, self.class_names)

    def has_contradictions(self, rows=None) -> bool:
        """True if two rows share all feature values but not the label."""
        rows = self.all_rows() if rows is None else np.asarray(rows)
        seen: dict[bytes, int] = {}
        for r in rows:
            key = self.features[r].tobytes()
            lab = int(self.labels[r])
            if seen.setdefault(key, lab) != lab:
                return True
        return False


@dataclass(frozen=True, eq=False)
class Clustering:
    """A k-part indexed partition of a set of row ids.

    ``universe`` is sorted and unique; ``membership[p]`` is the part index of
    ``universe[p]``.  Empty parts are kept so index alignment survives.
    """

    universe: np.ndarray
    membership: np.ndarray
    k: int

    def __post_init__(self):
        u = np.array(self.universe, dtype=np.int64, copy=True).reshape(-1)
        mem = np.array(self.membership, dtype=np.int64, copy=True).reshape(-1)
        if len(u) != len(mem):
            raise DataError("universe and membership lengths differ")
        order = np.argsort(u, kind="stable")
        u, mem = u[order], mem[order]
        if len(u) > 1 and np.any(u[1:] == u[:-1]):
            raise DataError("universe contains duplicate row ids")
        if self.k < 1:
            raise DataError("a clustering needs at least one part")
        if len(mem) and (mem.min() < 0 or mem.max() >= self.k):
            raise InvalidLabelError(f"part index outside 0..{self.k - 1}")
        object.__setattr__(self, "universe", _frozen(u))
        object.__setattr__(self, "membership", _frozen(mem))

    @classmethod
    def from_parts(cls, parts: Sequence[Iterable[int]]) -> "Clustering":
        ids, mem = [], []
        for i, part in enumerate(parts):
            for r in part:
                ids.append(r)
                mem.append(i)
        return cls(np.array(ids, dtype=np.int64), np.array(mem, dtype=np.int64), len(parts))

    @property
    def size(self) -> int:
        """|X|, the number of instances in the universe."""
        return len(self.universe)

    def part_sizes(self) -> np.ndarray:
        return np.bincount(self.membership, minlength=self.k)

    def parts(self) -> tuple[frozenset, ...]:
        return tuple(frozenset(self.universe[self.membership == i].tolist())
                     for i in range(self.k))

    def probabilities(self) -> np.ndarray:
        return self.part_sizes() / self.size

    def is_trivial(self) -> bool:
        return bool(np.any(self.part_sizes() == self.size))

    def same_universe(self, other: "Clustering") -> bool:
        return np.array_equal(self.universe, other.universe)

    def permuted(self, perm: Sequence[int]) -> "Clustering":
        """Part ``i`` of the result is part ``perm[i]`` of this clustering."""
        inv = np.empty(self.k, dtype=np.int64)
        inv[np.asarray(perm)] = np.arange(self.k)
        return Clustering(self.universe, inv[self.membership], self.k)

    def __eq__(self, other):
        if not isinstance(other, Clustering):
            return NotImplemented
        return (self.k == other.k and self.same_universe(other)
                and np.array_equal(self.membership, other.membership))

    def __hash__(self):
        return hash((self.k, self.universe.tobytes(), self.membership.tobytes()))

    def __repr__(self):
        parts = ", ".join("{" + ",".join(map(str, sorted(p))) + "}" for p in self.parts())
        return f"Clustering({parts})"


@dataclass(frozen=True, eq=False)
class ContingencyTable:
    """Joint counts ``counts[i, j] = |A_i & B_j|``."""

    counts: np.ndarray
    row_sums: np.ndarray = field(init=False)
    col_sums: np.ndarray = field(init=False)

    def __post_init__(self):
        c = np.array(self.counts, dtype=np.int64, ndmin=2, copy=True)
        if np.any(c < 0):
            raise DataError("negative count in contingency table")
        object.__setattr__(self, "counts", _frozen(c))
        object.__setattr__(self, "row_sums", _frozen(c.sum(axis=1)))
        object.__setattr__(self, "col_sums", _frozen(c.sum(axis=0)))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def shape(self) -> tuple[int, int]:
        return self.counts.shape

    def joint(self) -> np.ndarray:
        return self.counts / self.total

    def transpose(self) -> "ContingencyTable":
        return ContingencyTable(self.counts.T)


def clustering_from_labels(labels, k: int, universe=None) -> Clustering:
    """Cluster ``i`` collects the instances labeled ``i``.

    ``labels[p]`` belongs to row ``universe[p]`` (default ``0..len-1``).
    """
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    if len(y) and (y.min() < 0 or y.max() >= k):
        raise InvalidLabelError(f"label outside 0..{k - 1}")
    u = np.arange(len(y)) if universe is None else np.asarray(universe, dtype=np.int64)
    return Clustering(u, y, k)


def dataset_clustering(d: LabeledDataset, universe=None) -> Clustering:
    """The ground-truth clustering of ``d`` restricted to ``universe``."""
    u = d.all_rows() if universe is None else np.unique(np.asarray(universe, dtype=np.int64))
    return Clustering(u, d.labels[u], d.k)


def _check_universe(a: Clustering, b: Clustering):
    if not a.same_universe(b):
        raise UniverseMismatchError("clusterings are defined on different instance sets")


def contingency(a: Clustering, b: Clustering) -> ContingencyTable:
    _check_universe(a, b)
    flat = np.bincount(a.membership * b.k + b.membership, minlength=a.k * b.k)
    return ContingencyTable(flat.reshape(a.k, b.k))


def meet(a: Clustering, b: Clustering) -> Clustering:
    """All pairwise intersections, part ``i*l + j`` being ``A_i & B_j``."""
    _check_universe(a, b)
    return Clustering(a.universe, a.membership * b.k + b.membership, a.k * b.k)
