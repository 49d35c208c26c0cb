"""ID3 with local, global and glocal split evaluation.

All three modes share one loop: pick the best (leaf, criterion, labels)
triple, replace the leaf with a stump, repeat until no impure leaf has a
valid split or a pruning guard fires.  They differ in how a candidate is
scored:

* local  -- distance between the ground truth and the split, restricted to
  the leaf's instances;
* global -- distance between the ground truth and the clustering induced by
  the whole tree after the split;
* glocal -- the best global step if it strictly lowers the global distance,
  otherwise the best local step.

Distances are always evaluated as ``evaluate(measure, truth, candidate)``.
Ties are broken by (score, leaf preorder position, feature, threshold,
left label, right label), with scores within ``TIE_TOLERANCE`` equal.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from typing import Iterator, Optional

import numpy as np

from .clustering import Clustering, LabeledDataset, dataset_clustering
from .errors import DataError, SpecError
from .measures import TIE_TOLERANCE, Measure, distance_counts, evaluate, parse_measure
from .oracle import DEFAULT_BUDGET, MinimalTreeOracle
from .splits import (CandidateSet, candidate_set, candidate_splits,  # noqa: F401
                     majority_label, majority_of_counts)
from .tree import (Branch, Leaf, Node, SplitCriterion, exchange, induced_clustering, leaf_ids,
                   size)

MODES = ("local", "global", "glocal")
LABEL_RULES = ("exhaustive", "majority")


@dataclass(frozen=True)
class LearnerConfig:
    measure: Measure = Measure.GINI
    mode: str = "local"
    global_label_rule: str = "majority"
    max_nodes: Optional[int] = None
    min_branch_instances: Optional[int] = None
    stop_on_no_decay: bool = False
    record_trace: bool = True
    oracle_budget: int = DEFAULT_BUDGET
    # the learners are deterministic; the seed is carried for run records
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "measure", parse_measure(self.measure))
        if self.mode not in MODES:
            raise SpecError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.global_label_rule not in LABEL_RULES:
            raise SpecError(f"global_label_rule must be one of {LABEL_RULES}")
        if self.measure is Measure.MTS and self.mode != "local":
            raise SpecError("the mts measure is only defined for mode=local")
        for name in ("max_nodes", "min_branch_instances"):
            v = getattr(self, name)
            if v is not None and (isinstance(v, bool) or not isinstance(v, int) or v < 1):
                raise SpecError(f"{name} must be a positive integer")

    @property
    def learner_id(self) -> str:
        parts = [self.measure.value, self.mode]
        if self.mode != "local" and self.global_label_rule != "majority":
            parts.append(self.global_label_rule)
        if self.max_nodes is not None:
            parts.append(f"n{self.max_nodes}")
        if self.min_branch_instances is not None:
            parts.append(f"b{self.min_branch_instances}")
        if self.stop_on_no_decay:
            parts.append("nodecay")
        return "-".join(parts)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["measure"] = self.measure.value
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "LearnerConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known - {"id"}
        if unknown:
            raise SpecError(f"unknown learner config keys: {sorted(unknown)}")
        return cls(**{k: v for k, v in doc.items() if k in known})


@dataclass(frozen=True)
class TraceStep:
    step: int
    leaf_id: int
    feature: int
    threshold: float
    labels: tuple[int, int]
    distance_before: float
    distance_after: float
    size: int
    train_accuracy: float
    policy: str

    @property
    def criterion(self) -> SplitCriterion:
        return SplitCriterion(self.feature, self.threshold)


@dataclass
class TrainTrace:
    root_label: int
    initial_distance: float
    initial_train_accuracy: float
    steps: list[TraceStep] = field(default_factory=list)
    stop_reason: str = ""

    def to_dict(self) -> dict:
        return {
            "root_label": self.root_label,
            "initial_distance": self.initial_distance,
            "initial_train_accuracy": self.initial_train_accuracy,
            "stop_reason": self.stop_reason,
            "steps": [dict(asdict(s), labels=list(s.labels)) for s in self.steps],
        }


def replay(trace: TrainTrace) -> Iterator[Node]:
    """Trees after 0, 1, ... steps, rebuilt from the trace by exchanges."""
    t: Node = Leaf(trace.root_label)
    yield t
    for s in trace.steps:
        t = exchange(t, s.leaf_id, Branch(s.criterion, Leaf(s.labels[0]), Leaf(s.labels[1])))
        yield t


# -- standalone scoring (clustering-level, used for API calls and checks) ----

def _split_membership(d, rows, c: SplitCriterion):
    return np.where(d.features[rows, c.feature] <= c.threshold, 0, 1)


def local_split_score(measure, d: LabeledDataset, leaf_rows, c: SplitCriterion) -> float:
    m = parse_measure(measure)
    rows = np.unique(np.asarray(leaf_rows, dtype=np.int64))
    side = _split_membership(d, rows, c)
    if side.min() == side.max():
        raise ValueError(f"criterion {c} is not valid on these instances")
    if m is Measure.MTS:
        return float(MinimalTreeOracle(d).delta_mts(rows, c))
    truth = dataset_clustering(d, rows)
    if m.index_sensitive:
        i0 = majority_label(d, rows[side == 0])
        i1 = majority_label(d, rows[side == 1])
        pred = Clustering(rows, np.where(side == 0, i0, i1), d.k)
        return evaluate(m, truth, pred)
    return evaluate(m, truth, Clustering(rows, side, 2))


def global_split_score(measure, d: LabeledDataset, universe, t: Node, leaf_id: int,
                       c: SplitCriterion, i0: int, i1: int) -> float:
    t2 = exchange(t, leaf_id, Branch(c, Leaf(i0), Leaf(i1)))
    return evaluate(measure, dataset_clustering(d, universe), induced_clustering(t2, d, universe))


# -- pruning -----------------------------------------------------------------

@dataclass(frozen=True)
class StepProposal:
    leaf_instances: int
    score: float
    reference: float


def apply_pruning_guards(cfg: LearnerConfig, t: Node, proposal: StepProposal) -> str:
    """``"allow"`` or ``"stop"`` for the best step found in this iteration.

    ``reference`` is the current global distance (global, glocal) or the
    distance of the unsplit leaf (local).
    """
    if cfg.max_nodes is not None and size(t) + 2 > cfg.max_nodes:
        return "stop"
    if cfg.min_branch_instances is not None and proposal.leaf_instances < cfg.min_branch_instances:
        return "stop"
    if cfg.stop_on_no_decay and not proposal.score < proposal.reference - TIE_TOLERANCE:
        return "stop"
    return "allow"


# -- the shared growing loop -------------------------------------------------

class _LeafState:
    __slots__ = ("rows", "label", "counts", "cands", "local_scores", "mts")

    def __init__(self, rows, label, counts):
        self.rows = rows
        self.label = label
        self.counts = counts
        self.cands: Optional[CandidateSet] = None
        self.local_scores: Optional[np.ndarray] = None
        self.mts: Optional[int] = None

    @property
    def impure(self) -> bool:
        return int(np.count_nonzero(self.counts)) > 1


def _first_within(scores: np.ndarray, best: float) -> int:
    return int(np.argmax(scores <= best + TIE_TOLERANCE))


class _Grower:
    def __init__(self, d: LabeledDataset, universe, cfg: LearnerConfig):
        u = d.all_rows() if universe is None else np.unique(np.asarray(universe, dtype=np.int64))
        if len(u) == 0:
            raise DataError("cannot train on an empty instance set")
        self.d, self.u, self.cfg = d, u, cfg
        self.m = cfg.measure
        self.k = d.k
        self.oracle = MinimalTreeOracle(d, cfg.oracle_budget) if self.m is Measure.MTS else None
        if self.oracle is not None:
            self.oracle._check(tuple(u.tolist()))
        counts = np.bincount(d.labels[u], minlength=self.k)
        root = int(np.argmax(counts))
        self.conf = np.zeros((self.k, self.k), dtype=np.int64)
        self.conf[:, root] = counts
        self.tree: Node = Leaf(root)
        self.leaves = [self._new_leaf(u, root)]
        self.trace = TrainTrace(root, self.distance(), self.train_accuracy())

    def _new_leaf(self, rows, label) -> _LeafState:
        leaf = _LeafState(rows, label, np.bincount(self.d.labels[rows], minlength=self.k))
        if leaf.impure:
            leaf.cands = candidate_set(self.d, rows)
        if self.oracle is not None:
            leaf.mts = self.oracle.mts(rows)
        return leaf

    def _splittable(self, leaf: _LeafState) -> bool:
        if not leaf.impure or leaf.cands is None or len(leaf.cands) == 0:
            return False
        mb = self.cfg.min_branch_instances
        return mb is None or len(leaf.rows) >= mb

    # distances
    def distance(self) -> float:
        if self.oracle is not None:
            return float(sum(leaf.mts for leaf in self.leaves))
        return float(distance_counts(self.m, self.conf))

    def train_accuracy(self) -> float:
        return float(np.trace(self.conf) / len(self.u))

    def _leaf_reference(self, leaf: _LeafState) -> float:
        """Local distance of the leaf left unsplit."""
        if self.oracle is not None:
            return float(leaf.mts)
        if self.m.index_sensitive:
            table = np.zeros((self.k, self.k))
            table[:, leaf.label] = leaf.counts
        else:
            table = np.stack([leaf.counts, np.zeros(self.k)], axis=-1)
        return float(distance_counts(self.m, table))

    def _local_scores(self, leaf: _LeafState) -> np.ndarray:
        if leaf.local_scores is not None:
            return leaf.local_scores
        cs = leaf.cands
        left = cs.left_counts.astype(float)
        right = cs.right_counts.astype(float)
        if self.oracle is not None:
            scores = np.empty(len(cs))
            for c in range(len(cs)):
                lrows, rrows = cs.sides(c)
                scores[c] = self.oracle.mts(lrows) + self.oracle.mts(rrows)
        elif self.m.index_sensitive:
            ar = np.arange(len(cs))
            table = np.zeros((len(cs), self.k, self.k))
            table[ar, :, majority_of_counts(left, leaf.label)] += left
            table[ar, :, majority_of_counts(right, leaf.label)] += right
            scores = distance_counts(self.m, table)
        else:
            scores = distance_counts(self.m, np.stack([left, right], axis=-1))
        leaf.local_scores = np.asarray(scores, dtype=float)
        return leaf.local_scores

    # step selection: (score, leaf position, candidate index, i0, i1)
    def best_local(self):
        best = None
        per_leaf = []
        for pos, leaf in enumerate(self.leaves):
            if self._splittable(leaf):
                sc = self._local_scores(leaf)
                lo = float(sc.min())
                per_leaf.append((pos, sc, lo))
                if best is None or lo < best:
                    best = lo
        if best is None:
            return None
        for pos, sc, lo in per_leaf:
            if lo <= best + TIE_TOLERANCE:
                leaf = self.leaves[pos]
                c = _first_within(sc, best)
                i0 = int(majority_of_counts(leaf.cands.left_counts[c], leaf.label))
                i1 = int(majority_of_counts(leaf.cands.right_counts[c], leaf.label))
                return float(sc[c]), pos, c, i0, i1

    def best_global(self):
        blocks = [(pos, leaf) for pos, leaf in enumerate(self.leaves) if self._splittable(leaf)]
        if not blocks:
            return None
        k = self.k
        left = np.concatenate([lf.cands.left_counts for _, lf in blocks]).astype(float)
        right = np.concatenate([lf.cands.right_counts for _, lf in blocks]).astype(float)
        owner = np.concatenate([np.full(len(lf.cands), i) for i, (_, lf) in enumerate(blocks)])
        local_idx = np.concatenate([np.arange(len(lf.cands)) for _, lf in blocks])
        labels = np.array([lf.label for _, lf in blocks])[owner]
        totals = left + right
        n = len(left)
        ar = np.arange(n)
        base = np.broadcast_to(self.conf.astype(float), (n, k, k)).copy()
        base[ar, :, labels] -= totals
        if self.cfg.mode != "local" and self.cfg.global_label_rule == "majority":
            i0 = majority_of_counts(left, labels)
            i1 = majority_of_counts(right, labels)
            table = base
            table[ar, :, i0] += left
            table[ar, :, i1] += right
            scores = distance_counts(self.m, table)
            c = _first_within(scores, float(scores.min()))
            pick_i0, pick_i1 = int(i0[c]), int(i1[c])
        else:
            eye = np.eye(k)
            add_l = np.einsum("cr,is->cirs", left, eye)
            add_r = np.einsum("cr,is->cirs", right, eye)
            table = base[:, None, None] + add_l[:, :, None] + add_r[:, None, :]
            scores = distance_counts(self.m, table).reshape(n, k * k)
            flat = scores.reshape(-1)
            idx = _first_within(flat, float(flat.min()))
            c, rest = divmod(idx, k * k)
            pick_i0, pick_i1 = divmod(rest, k)
            scores = scores[:, rest]
        return (float(scores[c]), blocks[owner[c]][0], int(local_idx[c]),
                int(pick_i0), int(pick_i1))

    def apply(self, pos, c, i0, i1, policy, before):
        leaf = self.leaves[pos]
        cs = leaf.cands
        crit = cs.criterion(c)
        lrows, rrows = cs.sides(c)
        leaf_id = leaf_ids(self.tree)[pos]
        self.tree = exchange(self.tree, leaf_id, Branch(crit, Leaf(i0), Leaf(i1)))
        self.conf[:, leaf.label] -= leaf.counts
        self.conf[:, i0] += cs.left_counts[c]
        self.conf[:, i1] += cs.right_counts[c]
        self.leaves[pos:pos + 1] = [self._new_leaf(lrows, i0), self._new_leaf(rrows, i1)]
        if self.cfg.record_trace:
            self.trace.steps.append(TraceStep(
                step=len(self.trace.steps), leaf_id=leaf_id, feature=crit.feature,
                threshold=crit.threshold, labels=(i0, i1), distance_before=before,
                distance_after=self.distance(), size=2 * len(self.leaves) - 1,
                train_accuracy=self.train_accuracy(), policy=policy))

    def _stop_reason(self) -> str:
        impure = [leaf for leaf in self.leaves if leaf.impure]
        if not impure:
            # exhaustive global labelling can leave pure leaves with the wrong class
            return "consistent" if np.trace(self.conf) == len(self.u) else "pure-mislabeled"
        if all(leaf.cands is None or len(leaf.cands) == 0 for leaf in impure):
            return "no-valid-split"
        return "min-branch"

    def run(self):
        cfg = self.cfg
        while True:
            if not any(self._splittable(leaf) for leaf in self.leaves):
                self.trace.stop_reason = self._stop_reason()
                break
            current = self.distance()
            if cfg.mode == "local":
                best = self.best_local()
                policy = "local"
                reference = self._leaf_reference(self.leaves[best[1]])
            elif cfg.mode == "global":
                best = self.best_global()
                policy = "global"
                reference = current
            else:
                best = self.best_global()
                reference = current
                policy = "global"
                if not best[0] < current - TIE_TOLERANCE and not cfg.stop_on_no_decay:
                    best = self.best_local()
                    policy = "local"
            proposal = StepProposal(len(self.leaves[best[1]].rows), best[0], reference)
            if apply_pruning_guards(cfg, self.tree, proposal) == "stop":
                too_big = cfg.max_nodes is not None and 2 * len(self.leaves) + 1 > cfg.max_nodes
                self.trace.stop_reason = "max-nodes" if too_big else "no-decay"
                break
            _, pos, c, i0, i1 = best
            self.apply(pos, c, i0, i1, policy, current)
        return self.tree, self.trace


def fit(d: LabeledDataset, universe=None, cfg: LearnerConfig | None = None):
    """Train according to ``cfg.mode``; returns ``(tree, trace)``."""
    cfg = cfg or LearnerConfig()
    return _Grower(d, universe, cfg).run()


def _fit_mode(mode, d, universe, cfg):
    if cfg.mode != mode:
        raise SpecError(f"config mode is {cfg.mode!r}, expected {mode!r}")
    return fit(d, universe, cfg)


def id3_local(d: LabeledDataset, universe=None, cfg: LearnerConfig | None = None):
    return _fit_mode("local", d, universe, cfg or LearnerConfig(mode="local"))


def id3_global(d: LabeledDataset, universe=None, cfg: LearnerConfig | None = None):
    return _fit_mode("global", d, universe, cfg or LearnerConfig(mode="global"))


def id3_glocal(d: LabeledDataset, universe=None, cfg: LearnerConfig | None = None):
    return _fit_mode("glocal", d, universe, cfg or LearnerConfig(mode="glocal"))
