"""Binary decision trees over threshold criteria ``x[j] <= r``.

An instance satisfying the criterion is routed to the left child.  Node ids
are preorder positions and are recomputed after every structural edit.
Trees are immutable; edits return new trees.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Union

import numpy as np

from .clustering import Clustering, LabeledDataset
from .errors import DataError, NodeKindError, TreeParseError


@dataclass(frozen=True)
class SplitCriterion:
    feature: int
    threshold: float

    def __call__(self, x) -> bool:
        return bool(x[self.feature] <= self.threshold)

    def mask(self, X: np.ndarray) -> np.ndarray:
        return X[:, self.feature] <= self.threshold

    def __str__(self):
        return f"[x{self.feature} <= {self.threshold:g}]"


@dataclass(frozen=True)
class Leaf:
    label: int

    def __str__(self):
        return f"Leaf({self.label})"


@dataclass(frozen=True)
class Branch:
    criterion: SplitCriterion
    left: "Node"
    right: "Node"

    def __str__(self):
        return f"Branch({self.criterion}, {self.left}, {self.right})"


Node = Union[Leaf, Branch]
DecisionTree = Node


def nodes(t: Node) -> list[Node]:
    """All nodes in preorder; a node's id is its index here."""
    out, stack = [], [t]
    while stack:
        v = stack.pop()
        out.append(v)
        if isinstance(v, Branch):
            stack.append(v.right)
            stack.append(v.left)
    return out


def size(t: Node) -> int:
    return len(nodes(t))


def depth(t: Node) -> int:
    best, stack = 0, [(t, 0)]
    while stack:
        v, d = stack.pop()
        best = max(best, d)
        if isinstance(v, Branch):
            stack.extend(((v.left, d + 1), (v.right, d + 1)))
    return best


def leaf_ids(t: Node) -> list[int]:
    return [i for i, v in enumerate(nodes(t)) if isinstance(v, Leaf)]


def branch_ids(t: Node) -> list[int]:
    return [i for i, v in enumerate(nodes(t)) if isinstance(v, Branch)]


def node_at(t: Node, node_id: int) -> Node:
    all_nodes = nodes(t)
    if not 0 <= node_id < len(all_nodes):
        raise IndexError(f"node id {node_id} out of range for tree of size {len(all_nodes)}")
    return all_nodes[node_id]


def n_features_used(t: Node) -> int:
    """One more than the largest feature index referenced (0 for a leaf)."""
    return max((v.criterion.feature + 1 for v in nodes(t) if isinstance(v, Branch)), default=0)


def max_label(t: Node) -> int:
    return max(v.label for v in nodes(t) if isinstance(v, Leaf))


def predict(t: Node, x) -> int:
    x = np.asarray(x, dtype=float).reshape(-1)
    need = n_features_used(t)
    if len(x) < need:
        raise DataError(f"instance has {len(x)} features, tree uses {need}")
    v = t
    while isinstance(v, Branch):
        v = v.left if x[v.criterion.feature] <= v.criterion.threshold else v.right
    return v.label


def route(t: Node, X: np.ndarray, rows=None) -> dict[int, np.ndarray]:
    """Map each leaf id to the rows of ``X`` that reach it (all leaves present)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] < n_features_used(t):
        raise DataError("feature matrix does not cover the features used by the tree")
    rows = np.arange(X.shape[0]) if rows is None else np.asarray(rows, dtype=np.int64)
    out: dict[int, np.ndarray] = {}
    counter = 0
    stack = [(t, rows)]
    while stack:
        v, r = stack.pop()
        node_id = counter
        counter += 1
        if isinstance(v, Leaf):
            out[node_id] = r
            continue
        go_left = X[r, v.criterion.feature] <= v.criterion.threshold
        stack.append((v.right, r[~go_left]))
        stack.append((v.left, r[go_left]))
    return out


def predict_many(t: Node, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    out = np.empty(X.shape[0], dtype=np.int64)
    all_nodes = nodes(t)
    for leaf_id, r in route(t, X).items():
        out[r] = all_nodes[leaf_id].label
    return out


def induced_clustering(t: Node, d: LabeledDataset, universe=None) -> Clustering:
    """Partition of ``universe`` by predicted class, with ``d.k`` parts."""
    u = d.all_rows() if universe is None else np.unique(np.asarray(universe, dtype=np.int64))
    pred = predict_many(t, d.features[u])
    if len(pred) and pred.max() >= d.k:
        raise DataError("tree predicts a label outside the dataset's classes")
    return Clustering(u, pred, d.k)


def _require_leaf(t: Node, leaf_id: int) -> Leaf:
    v = node_at(t, leaf_id)
    if not isinstance(v, Leaf):
        raise NodeKindError(f"node {leaf_id} is a branch, not a leaf")
    return v


def instances_at_leaf(t: Node, d: LabeledDataset, universe, leaf_id: int) -> np.ndarray:
    _require_leaf(t, leaf_id)
    u = d.all_rows() if universe is None else np.unique(np.asarray(universe, dtype=np.int64))
    return np.sort(route(t, d.features, u)[leaf_id])


def is_pure(t: Node, d: LabeledDataset, universe, leaf_id: int) -> bool:
    rows = instances_at_leaf(t, d, universe, leaf_id)
    return len(np.unique(d.labels[rows])) <= 1


def _path_to(t: Node, node_id: int) -> list[tuple[Branch, bool]]:
    """Branches from the root to ``node_id`` with the direction taken (True = left)."""
    visited: list[Node] = []
    parent: list[tuple[int, bool]] = []
    stack: list[tuple[Node, int, bool]] = [(t, -1, True)]
    while stack:
        v, par, went_left = stack.pop()
        idx = len(visited)
        visited.append(v)
        parent.append((par, went_left))
        if idx == node_id:
            break
        if isinstance(v, Branch):
            stack.append((v.right, idx, False))
            stack.append((v.left, idx, True))
    else:
        raise IndexError(f"node id {node_id} not found")
    path = []
    idx = node_id
    while parent[idx][0] >= 0:
        par, went_left = parent[idx]
        path.append((visited[par], went_left))
        idx = par
    path.reverse()
    return path


def replace_node(t: Node, node_id: int, replacement: Node) -> Node:
    node_at(t, node_id)
    new = replacement
    for branch, went_left in reversed(_path_to(t, node_id)):
        if went_left:
            new = Branch(branch.criterion, new, branch.right)
        else:
            new = Branch(branch.criterion, branch.left, new)
    return new


def exchange(t: Node, leaf_id: int, replacement: Node) -> Node:
    """Replace the leaf ``leaf_id`` by ``replacement``."""
    _require_leaf(t, leaf_id)
    return replace_node(t, leaf_id, replacement)


# -- redundant splits --------------------------------------------------------

def _redundant_rewrite(v: Node):
    """The merged subtree if ``v`` is a redundant split, else None.

    Two patterns on a common feature collapse to one threshold:
    ``Branch(c1, Leaf(i), Branch(c2, Leaf(i), t))`` -> ``Branch([x<=max], Leaf(i), t)``
    and its mirror ``Branch(c1, Branch(c2, t, Leaf(i)), Leaf(i))`` ->
    ``Branch([x<=min], t, Leaf(i))``.
    """
    if not isinstance(v, Branch):
        return None
    c1 = v.criterion
    if isinstance(v.left, Leaf) and isinstance(v.right, Branch):
        inner = v.right
        if (isinstance(inner.left, Leaf) and inner.left.label == v.left.label
                and inner.criterion.feature == c1.feature):
            r = max(c1.threshold, inner.criterion.threshold)
            return Branch(SplitCriterion(c1.feature, r), v.left, inner.right)
    if isinstance(v.right, Leaf) and isinstance(v.left, Branch):
        inner = v.left
        if (isinstance(inner.right, Leaf) and inner.right.label == v.right.label
                and inner.criterion.feature == c1.feature):
            r = min(c1.threshold, inner.criterion.threshold)
            return Branch(SplitCriterion(c1.feature, r), inner.left, v.right)
    return None


def detect_redundant_splits(t: Node) -> list[int]:
    return [i for i, v in enumerate(nodes(t)) if _redundant_rewrite(v) is not None]


def merge_redundant_splits(t: Node) -> Node:
    """Collapse redundant splits until none remain; predictions are unchanged."""
    while True:
        found = detect_redundant_splits(t)
        if not found:
            return t
        # deepest-last preorder id first keeps earlier ids valid
        node_id = found[-1]
        t = replace_node(t, node_id, _redundant_rewrite(node_at(t, node_id)))


# -- serialization -----------------------------------------------------------

def to_dict(t: Node) -> dict:
    if isinstance(t, Leaf):
        return {"leaf": int(t.label)}
    return {
        "split": {"feature": int(t.criterion.feature), "threshold": float(t.criterion.threshold)},
        "left": to_dict(t.left),
        "right": to_dict(t.right),
    }


def from_dict(doc, location: str = "$") -> Node:
    if not isinstance(doc, dict):
        raise TreeParseError("expected an object", location)
    if "leaf" in doc:
        extra = set(doc) - {"leaf"}
        if extra:
            raise TreeParseError(f"unexpected keys {sorted(extra)} in leaf", location)
        label = doc["leaf"]
        if isinstance(label, bool) or not isinstance(label, int) or label < 0:
            raise TreeParseError("leaf label must be a non-negative integer", f"{location}.leaf")
        return Leaf(label)
    for key in ("split", "left", "right"):
        if key not in doc:
            raise TreeParseError(f"missing key {key!r}", location)
    extra = set(doc) - {"split", "left", "right"}
    if extra:
        raise TreeParseError(f"unexpected keys {sorted(extra)} in branch", location)
    split = doc["split"]
    if not isinstance(split, dict) or set(split) != {"feature", "threshold"}:
        raise TreeParseError("split needs exactly 'feature' and 'threshold'", f"{location}.split")
    feature, threshold = split["feature"], split["threshold"]
    if isinstance(feature, bool) or not isinstance(feature, int) or feature < 0:
        raise TreeParseError("feature must be a non-negative integer", f"{location}.split.feature")
    if isinstance(threshold, bool) or not isinstance(threshold, (int, float)) \
            or not np.isfinite(threshold):
        raise TreeParseError("threshold must be a finite number", f"{location}.split.threshold")
    return Branch(SplitCriterion(feature, float(threshold)),
                  from_dict(doc["left"], f"{location}.left"),
                  from_dict(doc["right"], f"{location}.right"))


def serialize(t: Node) -> str:
    return json.dumps(to_dict(t), sort_keys=True)


def _loads(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise TreeParseError(exc.msg, f"line {exc.lineno} column {exc.colno}") from None


def deserialize(text: str) -> Node:
    return from_dict(_loads(text))


def dump_tree(t: Node, path, class_names=None, feature_names=None):
    """Write a ``.tree.json`` document; names are optional display metadata."""
    doc = {"tree": to_dict(t)}
    if class_names is not None:
        doc["classes"] = list(class_names)
    if feature_names is not None:
        doc["features"] = list(feature_names)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_tree(path) -> tuple[Node, dict]:
    """Read a tree file; accepts a bare node document or the ``{"tree": ...}`` envelope."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = _loads(fh.read())
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    if isinstance(doc, dict) and "tree" in doc:
        meta = {k: v for k, v in doc.items() if k != "tree"}
        return from_dict(doc["tree"], "$.tree"), meta
    return from_dict(doc), {}


def threshold_grid(t: Node, n_features: int | None = None) -> np.ndarray:
    """One point in every cell of the threshold arrangement of ``t``.

    For each feature, takes every threshold used plus points between and
    beyond them; returns the Cartesian product.
    """
    m = max(n_features or 0, n_features_used(t), 1)
    axes = []
    for j in range(m):
        ths = sorted({v.criterion.threshold for v in nodes(t)
                      if isinstance(v, Branch) and v.criterion.feature == j})
        if not ths:
            axes.append(np.array([0.0]))
            continue
        pts = [ths[0] - 1.0, ths[-1] + 1.0]
        pts.extend(ths)
        pts.extend((a + b) / 2 for a, b in zip(ths, ths[1:]))
        axes.append(np.unique(pts))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.reshape(-1) for g in mesh], axis=1)
