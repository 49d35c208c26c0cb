"""Dataset loading, synthetic generators, label noise and train/test sampling.

Every random operation takes an explicit seed and draws from its own
``numpy.random.Generator`` (PCG64); nothing touches global random state.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass
from importlib import resources
from typing import Optional

import numpy as np

from .clustering import LabeledDataset
from .errors import DataError, SpecError
from .tree import Branch, Leaf, Node, SplitCriterion, predict_many, size

BUILTIN_DATASETS = ("iris", "wine")


def rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))


def stable_seed(*parts) -> int:
    """64-bit seed derived from ``parts``; stable across runs and platforms."""
    h = hashlib.blake2b(repr(parts).encode("utf-8"), digest_size=8)
    return int.from_bytes(h.digest(), "little")


# -- CSV ----------------------------------------------------------------------

def parse_csv(text: str, source: str = "<string>") -> LabeledDataset:
    """Header row, numeric feature columns, trailing class-label column.

    String labels become indices in order of first appearance.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise DataError(f"{source}: empty file") from None
    if len(header) < 1 or all(not h.strip() for h in header):
        raise DataError(f"{source}:1: empty header")
    width = len(header)
    features, labels, classes = [], [], {}
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != width:
            raise DataError(f"{source}:{line}: expected {width} columns, found {len(row)}")
        try:
            values = [float(c) for c in row[:-1]]
        except ValueError:
            bad = next(c for c in row[:-1] if not _is_float(c))
            raise DataError(f"{source}:{line}: non-numeric feature value {bad!r}") from None
        if not all(math.isfinite(v) for v in values):
            raise DataError(f"{source}:{line}: non-finite feature value")
        lab = row[-1].strip()
        labels.append(classes.setdefault(lab, len(classes)))
        features.append(values)
    X = np.array(features, dtype=float).reshape(len(features), width - 1)
    return LabeledDataset(X, np.array(labels, dtype=np.int64), max(len(classes), 1),
                          tuple(h.strip() for h in header[:-1]),
                          tuple(classes) if classes else ("0",))


def _is_float(s) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def load_csv(path) -> LabeledDataset:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    return parse_csv(text, str(path))


def load_builtin(name: str) -> LabeledDataset:
    if name not in BUILTIN_DATASETS:
        raise SpecError(f"unknown built-in dataset {name!r} (have {', '.join(BUILTIN_DATASETS)})")
    text = resources.files("treedist.datasets").joinpath(f"{name}.csv").read_text("utf-8")
    return parse_csv(text, name)


def to_csv(d: LabeledDataset) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(list(d.feature_names) + ["class"])
    for x, lab in zip(d.features, d.labels):
        w.writerow([repr(float(v)) for v in x] + [d.class_names[lab]])
    return out.getvalue()


def save_csv(d: LabeledDataset, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(to_csv(d))


# -- generators ---------------------------------------------------------------

def gen_blobs(n_samples: int, n_features: int, n_classes: int,
              stddev: float = 1.0, seed: int = 0) -> LabeledDataset:
    """Isotropic Gaussian blobs around centers drawn uniformly from [-10, 10]^m."""
    if n_samples < 1 or n_features < 1 or n_classes < 1 or stddev < 0:
        raise SpecError("blob parameters must be positive (stddev >= 0)")
    g = rng(seed)
    centers = g.uniform(-10.0, 10.0, size=(n_classes, n_features))
    per_class = [n_samples // n_classes + (1 if i < n_samples % n_classes else 0)
                 for i in range(n_classes)]
    X = np.concatenate([centers[i] + stddev * g.standard_normal((c, n_features))
                        for i, c in enumerate(per_class)])
    y = np.repeat(np.arange(n_classes), per_class)
    perm = g.permutation(n_samples)
    return LabeledDataset(X[perm], y[perm], n_classes)


@dataclass(frozen=True)
class RandomTreeSpec:
    target_size: int
    n_features: int
    n_classes: int
    n_samples: int
    seed: int = 0

    def __post_init__(self):
        if self.target_size < 1 or self.target_size % 2 == 0:
            raise SpecError("target_size must be a positive odd number")
        if self.n_features < 1 or self.n_classes < 1 or self.n_samples < 0:
            raise SpecError("n_features and n_classes must be positive")


def gen_random_tree(spec: RandomTreeSpec) -> tuple[Node, LabeledDataset]:
    """A random full binary tree over [0,1]^m and a uniform sample labeled by it.

    The tree grows by splitting a uniformly chosen leaf on a uniform feature
    at a threshold uniform inside that leaf's box.  Two sibling leaves never
    share a label (unless there is only one class).
    """
    g = rng(spec.seed)
    m, k = spec.n_features, spec.n_classes
    # mutable growth structure: node -> [box_lo, box_hi, feature, threshold, left, right]
    root = {"lo": np.zeros(m), "hi": np.ones(m), "split": None}
    leaves = [root]
    while 2 * len(leaves) - 1 < spec.target_size:
        v = leaves.pop(int(g.integers(len(leaves))))
        j = int(g.integers(m))
        r = float(g.uniform(v["lo"][j], v["hi"][j]))
        left = {"lo": v["lo"].copy(), "hi": v["hi"].copy(), "split": None}
        right = {"lo": v["lo"].copy(), "hi": v["hi"].copy(), "split": None}
        left["hi"][j] = r
        right["lo"][j] = r
        v["split"] = (j, r, left, right)
        leaves.extend([left, right])

    def build(v) -> Node:
        if v["split"] is None:
            return Leaf(int(g.integers(k)))
        j, r, lv, rv = v["split"]
        if lv["split"] is None and rv["split"] is None:
            a = int(g.integers(k))
            b = a if k == 1 else int((a + 1 + g.integers(k - 1)) % k)
            return Branch(SplitCriterion(j, r), Leaf(a), Leaf(b))
        return Branch(SplitCriterion(j, r), build(lv), build(rv))

    t = build(root)
    X = g.uniform(0.0, 1.0, size=(spec.n_samples, m))
    y = predict_many(t, X) if spec.n_samples else np.zeros(0, dtype=np.int64)
    assert size(t) == spec.target_size
    return t, LabeledDataset(X, y, k)


def inject_label_noise(d: LabeledDataset, fraction: float, seed: int,
                       rows=None) -> LabeledDataset:
    """Resample the labels of floor(fraction * |rows|) rows uniformly over the classes.

    ``rows`` restricts which rows are eligible (default: all).  A resampled
    label may coincide with the original one.
    """
    if not 0.0 <= fraction <= 1.0:
        raise SpecError("noise fraction must lie in [0, 1]")
    pool = d.all_rows() if rows is None else np.asarray(rows, dtype=np.int64)
    g = rng(seed)
    count = int(math.floor(fraction * len(pool)))
    chosen = g.choice(pool, size=count, replace=False) if count else np.zeros(0, dtype=np.int64)
    labels = d.labels.copy()
    labels[chosen] = g.integers(d.k, size=count)
    return d.with_labels(labels)


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.1
    train_size: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.test_fraction < 1.0:
            raise SpecError("test_fraction must lie in [0, 1)")
        if self.train_size is not None and self.train_size < 1:
            raise SpecError("train_size must be positive")


def split_train_test(d: LabeledDataset, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    """Disjoint (train rows, test rows), both sampled without replacement."""
    g = rng(spec.seed)
    n_test = int(math.floor(spec.test_fraction * d.n))
    perm = g.permutation(d.n)
    test, rest = perm[:n_test], perm[n_test:]
    if spec.train_size is None:
        train = rest
    elif spec.train_size > len(rest):
        raise SpecError(f"train_size {spec.train_size} exceeds the {len(rest)} rows left after "
                        f"holding out {n_test} test rows")
    else:
        train = g.choice(rest, size=spec.train_size, replace=False)
    return np.sort(train), np.sort(test)
