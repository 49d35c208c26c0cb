"""Clustering comparison measures.

Every measure is computed from joint counts ``n[..., i, j] = |A_i & B_j|``
with rows indexing the first clustering and columns the second.  The
``*_counts`` functions broadcast over leading batch dimensions, which is
what the learners use to score thousands of candidate splits at once.
Logarithms are base 2 and ``0 log 0 = 0``.
"""

from __future__ import annotations

import enum

import numpy as np

from .clustering import Clustering, contingency
from .errors import ArityError, SpecError, UndefinedInputError

#: Scores closer than this are treated as equal when breaking ties.
TIE_TOLERANCE = 1e-12


class Measure(str, enum.Enum):
    GAIN = "gain"
    GAIN_RATIO = "gain-ratio"
    NVI = "nvi"
    GINI = "gini"
    JACCARD = "jaccard"
    ACCURACY = "accuracy"
    MTS = "mts"

    @property
    def is_similarity(self) -> bool:
        return self in (Measure.GAIN, Measure.GAIN_RATIO)

    @property
    def permutation_invariant(self) -> bool:
        return self in (Measure.GAIN, Measure.GAIN_RATIO, Measure.NVI, Measure.GINI)

    @property
    def index_sensitive(self) -> bool:
        return self in (Measure.JACCARD, Measure.ACCURACY)


#: Measures that only need the two clusterings (everything except mts).
TABLE_MEASURES = (Measure.GAIN, Measure.GAIN_RATIO, Measure.NVI,
                  Measure.GINI, Measure.JACCARD, Measure.ACCURACY)


def parse_measure(name) -> Measure:
    if isinstance(name, Measure):
        return name
    try:
        return Measure(str(name).strip().lower())
    except ValueError:
        choices = ", ".join(m.value for m in Measure)
        raise SpecError(f"unknown measure {name!r} (expected one of: {choices})") from None


def _neg_plogp(p):
    with np.errstate(divide="ignore", invalid="ignore"):
        return -np.where(p > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0)


def _joint(counts):
    n = np.asarray(counts, dtype=float)
    total = n.sum(axis=(-2, -1), keepdims=True)
    if np.any(total == 0):
        raise UndefinedInputError("measure of an empty instance set")
    return n / total


#: Entropies below this are rounding noise from summing probabilities.
_ZERO = 1e-12


def _safe_div(num, den, zero=0.0):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > zero, num / np.where(den > zero, den, 1.0), 0.0)


# -- building blocks over joint distributions ------------------------------

def _row_entropy(P):
    return _neg_plogp(P.sum(axis=-1)).sum(axis=-1)


def _col_entropy(P):
    return _neg_plogp(P.sum(axis=-2)).sum(axis=-1)


def _joint_entropy(P):
    return _neg_plogp(P).sum(axis=(-2, -1))


def _conditional_entropy(P):
    # H(rows | cols) = -sum P_ij log(P_ij / P_j)
    pb = P.sum(axis=-2, keepdims=True)
    cond = _safe_div(P, np.broadcast_to(pb, P.shape))
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(P > 0, P * np.log2(np.where(cond > 0, cond, 1.0)), 0.0)
    return -terms.sum(axis=(-2, -1))


def _mutual_information(P):
    pa = P.sum(axis=-1, keepdims=True)
    pb = P.sum(axis=-2, keepdims=True)
    indep = pa * pb
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(P > 0, P / np.where(indep > 0, indep, 1.0), 1.0)
        terms = np.where(P > 0, P * np.log2(ratio), 0.0)
    return np.maximum(terms.sum(axis=(-2, -1)), 0.0)


# -- batched measures on counts --------------------------------------------

def gain_counts(counts):
    return _mutual_information(_joint(counts))


def gain_ratio_counts(counts):
    P = _joint(counts)
    return np.minimum(_safe_div(_mutual_information(P), _col_entropy(P), _ZERO), 1.0)


def vi_counts(counts):
    P = _joint(counts)
    return np.maximum(2 * _joint_entropy(P) - _row_entropy(P) - _col_entropy(P), 0.0)


def nvi_counts(counts):
    P = _joint(counts)
    hm = _joint_entropy(P)
    vi = np.maximum(2 * hm - _row_entropy(P) - _col_entropy(P), 0.0)
    return np.clip(_safe_div(vi, hm, _ZERO), 0.0, 1.0)


def gini_counts(counts):
    """Expected impurity of the row clustering within each column part."""
    P = _joint(counts)
    pb = P.sum(axis=-2)
    sq = (P ** 2).sum(axis=-2)
    return np.maximum(1.0 - _safe_div(sq, pb).sum(axis=-1), 0.0)


def _require_square(counts):
    shape = np.shape(counts)
    if shape[-1] != shape[-2]:
        raise ArityError(f"measure needs equal part counts, got {shape[-2]} and {shape[-1]}")


def jaccard_counts(counts):
    _require_square(counts)
    P = _joint(counts)
    diag = np.diagonal(P, axis1=-2, axis2=-1)
    union = P.sum(axis=-1) + P.sum(axis=-2) - diag
    # both parts empty counts as agreement
    sim = np.where(union > 0, _safe_div(diag, union), 1.0)
    k = P.shape[-1]
    return np.clip(k - sim.sum(axis=-1), 0.0, k)


def accuracy_counts(counts):
    _require_square(counts)
    P = _joint(counts)
    return np.diagonal(P, axis1=-2, axis2=-1).sum(axis=-1)


_DISTANCE = {
    Measure.GAIN: lambda n: -gain_counts(n),
    Measure.GAIN_RATIO: lambda n: -gain_ratio_counts(n),
    Measure.NVI: nvi_counts,
    Measure.GINI: gini_counts,
    Measure.JACCARD: jaccard_counts,
    Measure.ACCURACY: lambda n: 1.0 - accuracy_counts(n),
}


def distance_counts(measure, counts):
    """Distance-oriented value (similarities negated) for each table in ``counts``."""
    m = parse_measure(measure)
    if m is Measure.MTS:
        raise SpecError("mts needs feature values; use treedist.oracle.delta_mts")
    return _DISTANCE[m](counts)


# -- clustering-level API ---------------------------------------------------

def _table(a: Clustering, b: Clustering):
    if a.size == 0:
        raise UndefinedInputError("measure of an empty instance set")
    return contingency(a, b).counts


def entropy(a: Clustering) -> float:
    if a.size == 0:
        raise UndefinedInputError("entropy of an empty clustering")
    return float(_neg_plogp(a.probabilities()).sum())


def conditional_entropy(a: Clustering, b: Clustering) -> float:
    """H(a | b)."""
    return float(_conditional_entropy(_joint(_table(a, b))))


def joint_entropy(a: Clustering, b: Clustering) -> float:
    """H of the meet of ``a`` and ``b``."""
    return float(_joint_entropy(_joint(_table(a, b))))


def kl_divergence(c: Clustering, c2: Clustering) -> float:
    """Relative entropy of the part-size profile of ``c`` to that of ``c2``.

    The two clusterings may live on different universes.  Returns ``inf``
    when ``c`` has mass on a part that is empty in ``c2``.
    """
    if c.k != c2.k:
        raise ArityError(f"part counts differ: {c.k} vs {c2.k}")
    if c.size == 0 or c2.size == 0:
        raise UndefinedInputError("KL divergence of an empty clustering")
    p, q = c.probabilities(), c2.probabilities()
    if np.any((p > 0) & (q == 0)):
        return float("inf")
    mask = p > 0
    return float(max(np.sum(p[mask] * np.log2(p[mask] / q[mask])), 0.0))


def information_gain(a: Clustering, b: Clustering) -> float:
    return float(gain_counts(_table(a, b)))


def gain_ratio(a: Clustering, b: Clustering) -> float:
    """Gain(a, b) / H(b); 0 when ``b`` is trivial.  Not symmetric."""
    return float(gain_ratio_counts(_table(a, b)))


def variation_of_information(a: Clustering, b: Clustering) -> float:
    return float(vi_counts(_table(a, b)))


def normalized_vi(a: Clustering, b: Clustering) -> float:
    return float(nvi_counts(_table(a, b)))


def gini_impurity(a: Clustering, b: Clustering) -> float:
    return float(gini_counts(_table(a, b)))


def extended_jaccard(a: Clustering, b: Clustering) -> float:
    if a.k != b.k:
        raise ArityError(f"part counts differ: {a.k} vs {b.k}")
    return float(jaccard_counts(_table(a, b)))


def accuracy(a: Clustering, b: Clustering) -> float:
    if a.k != b.k:
        raise ArityError(f"part counts differ: {a.k} vs {b.k}")
    return float(accuracy_counts(_table(a, b)))


def evaluate(measure, a: Clustering, b: Clustering) -> float:
    """``measure`` as a distance: similarities are negated, accuracy inverted."""
    m = parse_measure(measure)
    if m.index_sensitive and a.k != b.k:
        raise ArityError(f"part counts differ: {a.k} vs {b.k}")
    return float(distance_counts(m, _table(a, b)))


def score_range(measure, k: int) -> tuple[float, float]:
    """Closed range of the distance-oriented value for ``k``-part inputs."""
    m = parse_measure(measure)
    if m is Measure.GAIN:
        return (-np.inf, 0.0)
    if m is Measure.GAIN_RATIO:
        return (-1.0, 0.0)
    if m is Measure.JACCARD:
        return (0.0, float(k))
    if m is Measure.MTS:
        return (1.0, np.inf)
    return (0.0, 1.0)
