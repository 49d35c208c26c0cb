"""Candidate threshold criteria for a set of instances."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import LabeledDataset
from .tree import SplitCriterion


@dataclass(frozen=True, eq=False)
class CandidateSet:
    """All valid criteria for one instance set, with per-class counts.

    Ordered by feature, then threshold.  ``left_counts[c]`` holds the class
    counts of the instances satisfying criterion ``c``; ``order[f]`` and
    ``cut[c]`` let callers recover the actual rows on either side.
    """

    rows: np.ndarray
    features: np.ndarray
    thresholds: np.ndarray
    left_counts: np.ndarray
    total: np.ndarray
    cut: np.ndarray
    sorted_rows: tuple

    def __len__(self):
        return len(self.features)

    @property
    def right_counts(self) -> np.ndarray:
        return self.total[None, :] - self.left_counts

    def criterion(self, c: int) -> SplitCriterion:
        return SplitCriterion(int(self.features[c]), float(self.thresholds[c]))

    def sides(self, c: int) -> tuple[np.ndarray, np.ndarray]:
        srt = self.sorted_rows[int(self.features[c])]
        n_left = int(self.cut[c])
        return np.sort(srt[:n_left]), np.sort(srt[n_left:])


def candidate_set(d: LabeledDataset, rows) -> CandidateSet:
    rows = np.sort(np.asarray(rows, dtype=np.int64))
    k = d.k
    y = d.labels[rows]
    total = np.bincount(y, minlength=k)
    feats, ths, lefts, cuts, sorted_rows = [], [], [], [], []
    onehot = np.eye(k, dtype=np.int64)[y]
    for j in range(d.m):
        x = d.features[rows, j]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        sorted_rows.append(rows[order])
        if len(xs) < 2:
            continue
        gaps = np.nonzero(xs[1:] > xs[:-1])[0]
        if len(gaps) == 0:
            continue
        lo, hi = xs[gaps], xs[gaps + 1]
        mid = (lo + hi) / 2.0
        # adjacent floats can round the midpoint onto the upper value
        mid = np.where(mid < hi, mid, lo)
        cum = np.cumsum(onehot[order], axis=0)
        feats.append(np.full(len(gaps), j, dtype=np.int64))
        ths.append(mid)
        lefts.append(cum[gaps])
        cuts.append(gaps + 1)
    if feats:
        features = np.concatenate(feats)
        thresholds = np.concatenate(ths)
        left_counts = np.concatenate(lefts)
        cut = np.concatenate(cuts)
    else:
        features = np.zeros(0, dtype=np.int64)
        thresholds = np.zeros(0)
        left_counts = np.zeros((0, k), dtype=np.int64)
        cut = np.zeros(0, dtype=np.int64)
    return CandidateSet(rows, features, thresholds, left_counts, total, cut, tuple(sorted_rows))


def candidate_splits(d: LabeledDataset, universe) -> list[SplitCriterion]:
    """Midpoint thresholds between consecutive distinct values of each feature.

    Every returned criterion sends at least one instance to each side.
    """
    cs = candidate_set(d, universe)
    return [cs.criterion(c) for c in range(len(cs))]


def majority_label(d: LabeledDataset, rows, fallback: int = 0) -> int:
    """Most frequent label among ``rows``; ties go to the smaller index.

    ``fallback`` (the parent leaf's label) is returned for an empty set.
    """
    rows = np.asarray(rows, dtype=np.int64)
    if len(rows) == 0:
        return int(fallback)
    return int(np.argmax(np.bincount(d.labels[rows], minlength=d.k)))


def majority_of_counts(counts: np.ndarray, fallback: int = 0) -> np.ndarray:
    """Row-wise argmax with smallest-index ties; ``fallback`` for all-zero rows."""
    counts = np.asarray(counts)
    arg = np.argmax(counts, axis=-1)
    return np.where(counts.sum(axis=-1) > 0, arg, fallback)
