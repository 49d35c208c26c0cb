"""Shared fixtures and slow-but-obvious reference implementations.

The reference functions below work on plain Python sets and ``fractions``
so they share no code with the package they check.
"""

import itertools
import math

import numpy as np
import pytest
from hypothesis import strategies as st

from treedist.clustering import LabeledDataset, clustering_from_labels


# -- set-based measure oracle ---------------------------------------------------

def parts_of(labels, k):
    return [frozenset(i for i, lab in enumerate(labels) if lab == c) for c in range(k)]


def _h(ps):
    return -sum(p * math.log2(p) for p in ps if p > 0)


def ref_entropy(a, n):
    return _h([len(p) / n for p in a])


def ref_meet(a, b):
    return [x & y for x in a for y in b]


def ref_cond_entropy(a, b, n):
    total = 0.0
    for bj in b:
        if bj:
            total += len(bj) / n * _h([len(ai & bj) / len(bj) for ai in a])
    return total


def ref_gain(a, b, n):
    total = 0.0
    for ai in a:
        for bj in b:
            pij = len(ai & bj) / n
            if pij > 0:
                total += pij * math.log2(pij / (len(ai) / n * len(bj) / n))
    return total


def ref_gain_ratio(a, b, n):
    hb = ref_entropy(b, n)
    return 0.0 if hb == 0 else ref_gain(a, b, n) / hb


def ref_vi(a, b, n):
    return ref_cond_entropy(a, b, n) + ref_cond_entropy(b, a, n)


def ref_nvi(a, b, n):
    hm = ref_entropy(ref_meet(a, b), n)
    return 0.0 if hm == 0 else ref_vi(a, b, n) / hm


def ref_gini(a, b, n):
    total = 0.0
    for bj in b:
        if bj:
            total += len(bj) / n * (1 - sum((len(ai & bj) / len(bj)) ** 2 for ai in a))
    return total


def ref_jaccard(a, b, n):
    total = 0.0
    for ai, bi in zip(a, b):
        union = ai | bi
        total += 1.0 if not union else len(ai & bi) / len(union)
    return len(a) - total


def ref_accuracy(a, b, n):
    return sum(len(ai & bi) for ai, bi in zip(a, b)) / n


REF_DISTANCE = {
    "gain": lambda a, b, n: -ref_gain(a, b, n),
    "gain-ratio": lambda a, b, n: -ref_gain_ratio(a, b, n),
    "nvi": ref_nvi,
    "gini": ref_gini,
    "jaccard": ref_jaccard,
    "accuracy": lambda a, b, n: 1 - ref_accuracy(a, b, n),
}


# -- exhaustive minimal-tree oracle ---------------------------------------------

def brute_mts(X, y):
    """Smallest consistent tree by iterative deepening over all tree shapes.

    Criteria are midpoints of the whole dataset's distinct values, including
    ones that leave a side empty.  Returns None for contradictory data.
    """
    X = np.asarray(X, dtype=float)
    y = list(y)
    n, m = X.shape
    crits = []
    for j in range(m):
        vals = sorted(set(X[:, j]))
        crits += [(j, (lo + hi) / 2) for lo, hi in zip(vals, vals[1:])]
    memo = {}

    def fits(rows, s):
        key = (rows, s)
        if key in memo:
            return memo[key]
        ok = len({y[r] for r in rows}) <= 1
        if not ok and s >= 3:
            for j, r in crits:
                left = frozenset(i for i in rows if X[i, j] <= r)
                right = rows - left
                for s1 in range(1, s - 1, 2):
                    if fits(left, s1) and fits(right, s - 1 - s1):
                        ok = True
                        break
                if ok:
                    break
        memo[key] = ok
        return ok

    rows = frozenset(range(n))
    for s in range(1, 2 * n + 2, 2):
        if fits(rows, s):
            return s
    return None


# -- hypothesis strategies ------------------------------------------------------

@st.composite
def label_vectors(draw, max_n=12, max_k=4, min_n=1):
    n = draw(st.integers(min_n, max_n))
    k = draw(st.integers(1, max_k))
    labels = draw(st.lists(st.integers(0, k - 1), min_size=n, max_size=n))
    return labels, k


@st.composite
def clustering_pairs(draw, max_n=12, max_k=4, same_k=False):
    n = draw(st.integers(1, max_n))
    k = draw(st.integers(1, max_k))
    l = k if same_k else draw(st.integers(1, max_k))
    a = draw(st.lists(st.integers(0, k - 1), min_size=n, max_size=n))
    b = draw(st.lists(st.integers(0, l - 1), min_size=n, max_size=n))
    return (a, k), (b, l)


def random_clustering(g, n, k):
    labels = g.integers(k, size=n)
    return clustering_from_labels(labels, k), parts_of(labels.tolist(), k)


def all_small_datasets(max_n=6, max_m=2):
    """Every multiset of binary-feature rows with binary labels."""
    for m in range(1, max_m + 1):
        points = list(itertools.product((0.0, 1.0), repeat=m))
        rows = [(p, c) for p in points for c in (0, 1)]
        for n in range(1, max_n + 1):
            for combo in itertools.combinations_with_replacement(rows, n):
                X = np.array([p for p, _ in combo])
                y = np.array([c for _, c in combo])
                yield LabeledDataset(X, y, 2)


def has_contradiction(d):
    seen = {}
    for x, c in zip(map(tuple, d.features), d.labels):
        if seen.setdefault(x, c) != c:
            return True
    return False


@pytest.fixture
def line():
    from treedist.bench import line_dataset
    return line_dataset()


@pytest.fixture
def grid():
    from treedist.bench import grid_dataset
    return grid_dataset()


@pytest.fixture(scope="session")
def iris():
    from treedist.data import load_builtin
    return load_builtin("iris")
