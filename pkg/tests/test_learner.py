import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from treedist.clustering import LabeledDataset
from treedist.errors import SpecError
from treedist.learner import (LearnerConfig, StepProposal, TrainTrace, apply_pruning_guards, fit,
                              global_split_score, id3_global, id3_glocal, id3_local,
                              local_split_score, replay)
from treedist.measures import TABLE_MEASURES, Measure
from treedist.splits import candidate_splits, majority_label
from treedist.tree import (Branch, Leaf, SplitCriterion, exchange, instances_at_leaf, leaf_ids,
                           predict_many, size)

ALL_MEASURES = [m.value for m in TABLE_MEASURES]
TWO_POINTS = LabeledDataset([[0.0], [1.0]], [0, 1], 2)
ONE_LABEL = LabeledDataset([[0.0], [1.0], [2.0]], [1, 1, 1], 2)


@st.composite
def small_datasets(draw, max_n=12, max_m=2, max_k=3):
    n = draw(st.integers(2, max_n))
    m = draw(st.integers(1, max_m))
    k = draw(st.integers(2, max_k))
    X = draw(st.lists(st.lists(st.integers(0, 4), min_size=m, max_size=m),
                      min_size=n, max_size=n))
    y = draw(st.lists(st.integers(0, k - 1), min_size=n, max_size=n))
    return LabeledDataset(np.array(X, dtype=float), y, k)


def accuracy_of(t, d):
    return float(np.mean(predict_many(t, d.features) == d.labels))


# -- scoring ------------------------------------------------------------------

def test_pure_split_scores_zero_for_gini():
    d = LabeledDataset([[0.0], [1.0], [2.0], [3.0]], [0, 0, 1, 1], 2)
    assert local_split_score("gini", d, [0, 1, 2, 3], SplitCriterion(0, 1.5)) == 0.0


def test_information_gain_prefers_isolating_threshold(line):
    rows = line.all_rows()
    at3 = local_split_score("gain", line, rows, SplitCriterion(0, 3.0))
    at1 = local_split_score("gain", line, rows, SplitCriterion(0, 1.0))
    # conditional entropies 0.4636 and 0.5572 bits, both against H(y) = 0.5917
    assert at3 < at1
    assert at1 - at3 == pytest.approx(0.557162075699 - 0.463587499691, abs=1e-9)


def test_local_score_rejects_trivial_split(line):
    with pytest.raises(ValueError):
        local_split_score("gini", line, line.all_rows(), SplitCriterion(0, 10.0))


@pytest.mark.parametrize("measure", ["accuracy", "jaccard", "gini"])
def test_global_score_of_consistent_stump_is_zero(measure):
    d = LabeledDataset([[0.0], [1.0], [2.0], [3.0]], [0, 0, 1, 1], 2)
    score = global_split_score(measure, d, None, Leaf(0), 0, SplitCriterion(0, 1.5), 0, 1)
    assert score == pytest.approx(0.0, abs=1e-12)


# -- first steps --------------------------------------------------------------

@pytest.mark.parametrize(
    "measure, efficient",
    [("gain", True), ("gain-ratio", True), ("nvi", True), ("gini", True), ("mts", True),
     ("jaccard", False), ("accuracy", False)],
)
def test_first_local_threshold_on_line(line, measure, efficient):
    _, trace = id3_local(line, None, LearnerConfig(measure=measure))
    assert (trace.steps[0].threshold in (3.0, 4.0)) is efficient


@pytest.mark.parametrize("fitter, mode", [(id3_local, "local"), (id3_global, "global"),
                                          (id3_glocal, "glocal")])
def test_single_label_dataset_gives_leaf(fitter, mode):
    t, trace = fitter(ONE_LABEL, None, LearnerConfig(mode=mode))
    assert t == Leaf(1)
    assert trace.steps == []
    assert trace.stop_reason == "consistent"


@pytest.mark.parametrize("measure", ALL_MEASURES + ["mts"])
def test_two_points_one_split(measure):
    t, trace = id3_local(TWO_POINTS, None, LearnerConfig(measure=measure))
    assert size(t) == 3
    assert trace.steps[-1].train_accuracy == 1.0


@pytest.mark.parametrize("measure", ALL_MEASURES)
def test_label_rules_agree_on_first_step(measure):
    steps = []
    for rule in ("exhaustive", "majority"):
        cfg = LearnerConfig(measure=measure, mode="global", global_label_rule=rule)
        steps.append(id3_global(TWO_POINTS, None, cfg)[1].steps[0])
    assert steps[0] == steps[1]


def test_glocal_falls_back_to_local_when_global_cannot_improve(line):
    _, local = fit(line, None, LearnerConfig(measure="jaccard", mode="local"))
    _, glocal = fit(line, None, LearnerConfig(measure="jaccard", mode="glocal"))
    _, glob = fit(line, None, LearnerConfig(measure="jaccard", mode="global"))
    assert glob.steps[0].distance_after == glob.steps[0].distance_before
    assert glocal.steps[0].policy == "local"
    assert glocal.steps[0].criterion == local.steps[0].criterion


def test_glocal_matches_global_when_every_step_decays():
    d = LabeledDataset([[0.0], [1.0], [2.0], [3.0], [4.0], [5.0]], [0, 0, 1, 1, 2, 2], 3)
    tg, glob = fit(d, None, LearnerConfig(measure="accuracy", mode="global"))
    assert all(s.distance_after < s.distance_before for s in glob.steps)
    tl, glocal = fit(d, None, LearnerConfig(measure="accuracy", mode="glocal"))
    assert tl == tg
    assert [s.policy for s in glocal.steps] == ["global"] * len(glob.steps)


def test_mode_specific_entry_points_check_config():
    with pytest.raises(SpecError):
        id3_local(TWO_POINTS, None, LearnerConfig(mode="global"))


# -- config -------------------------------------------------------------------

@pytest.mark.parametrize(
    "kwargs",
    [{"mode": "sideways"}, {"measure": "mts", "mode": "global"}, {"max_nodes": 0},
     {"min_branch_instances": -3}, {"global_label_rule": "random"}, {"measure": "entropy"}],
)
def test_invalid_config(kwargs):
    with pytest.raises(SpecError):
        LearnerConfig(**kwargs)


def test_config_round_trip_and_id():
    cfg = LearnerConfig(measure="gini", mode="global", global_label_rule="exhaustive",
                        max_nodes=11, min_branch_instances=30, stop_on_no_decay=True)
    assert cfg.learner_id == "gini-global-exhaustive-n11-b30-nodecay"
    assert LearnerConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(SpecError):
        LearnerConfig.from_dict({"colour": "red"})


# -- pruning ------------------------------------------------------------------

def test_max_nodes_three_allows_one_split(iris):
    t, trace = fit(iris, None, LearnerConfig(max_nodes=3))
    assert size(t) == 3 and len(trace.steps) == 1
    assert trace.stop_reason == "max-nodes"


def test_min_branch_on_small_universe(iris):
    t, trace = fit(iris, np.arange(0, 150, 5)[:29], LearnerConfig(min_branch_instances=30))
    assert isinstance(t, Leaf)
    assert trace.steps == []


def test_min_branch_never_splits_small_leaves(iris):
    t, trace = fit(iris, None, LearnerConfig(min_branch_instances=30, mode="global"))
    for before, step in zip(replay(trace), trace.steps):
        assert len(instances_at_leaf(before, iris, None, step.leaf_id)) >= 30


def test_no_decay_on_consistent_root():
    _, trace = fit(ONE_LABEL, None, LearnerConfig(stop_on_no_decay=True, mode="global"))
    assert trace.steps == []


def test_no_decay_stops_jaccard_global_on_line(line):
    t, trace = fit(line, None, LearnerConfig(measure="jaccard", mode="global",
                                             stop_on_no_decay=True))
    assert trace.steps == [] and trace.stop_reason == "no-decay"


@pytest.mark.parametrize(
    "cfg, tree_size, proposal, verdict",
    [
        (LearnerConfig(max_nodes=3), 1, StepProposal(10, 0.1, 0.5), "allow"),
        (LearnerConfig(max_nodes=3), 3, StepProposal(10, 0.1, 0.5), "stop"),
        (LearnerConfig(min_branch_instances=5), 1, StepProposal(4, 0.1, 0.5), "stop"),
        (LearnerConfig(stop_on_no_decay=True), 1, StepProposal(10, 0.5, 0.5), "stop"),
        (LearnerConfig(stop_on_no_decay=True), 1, StepProposal(10, 0.4, 0.5), "allow"),
    ],
)
def test_apply_pruning_guards(cfg, tree_size, proposal, verdict):
    t = Leaf(0)
    while size(t) < tree_size:
        t = exchange(t, leaf_ids(t)[0], Branch(SplitCriterion(0, 0.0), Leaf(0), Leaf(1)))
    assert apply_pruning_guards(cfg, t, proposal) == verdict


# -- traces -------------------------------------------------------------------

@pytest.mark.parametrize("mode", ["local", "global", "glocal"])
def test_trace_shape(iris, mode):
    t, trace = fit(iris, None, LearnerConfig(mode=mode, measure="nvi"))
    assert [s.step for s in trace.steps] == list(range(len(trace.steps)))
    assert [s.size for s in trace.steps] == [3 + 2 * i for i in range(len(trace.steps))]
    assert isinstance(trace, TrainTrace)
    assert list(replay(trace))[-1] == t
    assert trace.to_dict()["steps"][0]["labels"] == list(trace.steps[0].labels)


def test_training_is_deterministic(iris):
    a = fit(iris, None, LearnerConfig(mode="global", measure="gain"))
    b = fit(iris, None, LearnerConfig(mode="global", measure="gain"))
    assert a[0] == b[0] and a[1].to_dict() == b[1].to_dict()


# -- consistency and reference checks -------------------------------------------

@settings(max_examples=60, deadline=None)
@given(small_datasets(), st.sampled_from(ALL_MEASURES), st.sampled_from(["local", "global",
                                                                         "glocal"]))
def test_unpruned_learners_are_consistent(d, measure, mode):
    if d.has_contradictions():
        return
    t, trace = fit(d, None, LearnerConfig(measure=measure, mode=mode))
    assert accuracy_of(t, d) == 1.0
    assert trace.stop_reason == "consistent"


def _slow_best_local(measure, d, t):
    best = None
    for lid in leaf_ids(t):
        rows = instances_at_leaf(t, d, None, lid)
        if len(np.unique(d.labels[rows])) <= 1:
            continue
        for c in candidate_splits(d, rows):
            s = local_split_score(measure, d, rows, c)
            if best is None or s < best[0] - 1e-12:
                best = (s, lid, c)
    return best


def _slow_best_global(measure, d, t):
    best = None
    for lid in leaf_ids(t):
        rows = instances_at_leaf(t, d, None, lid)
        if len(np.unique(d.labels[rows])) <= 1:
            continue
        for c in candidate_splits(d, rows):
            left = rows[d.features[rows, c.feature] <= c.threshold]
            right = rows[d.features[rows, c.feature] > c.threshold]
            i0, i1 = majority_label(d, left), majority_label(d, right)
            s = global_split_score(measure, d, None, t, lid, c, i0, i1)
            if best is None or s < best[0] - 1e-12:
                best = (s, lid, c)
    return best


@settings(max_examples=40, deadline=None)
@given(small_datasets(max_n=9), st.sampled_from(ALL_MEASURES))
def test_local_steps_match_slow_reference(d, measure):
    t, trace = fit(d, None, LearnerConfig(measure=measure, mode="local"))
    for before, step in zip(replay(trace), trace.steps):
        score, lid, c = _slow_best_local(measure, d, before)
        assert (step.leaf_id, step.criterion) == (lid, c)


@settings(max_examples=40, deadline=None)
@given(small_datasets(max_n=9), st.sampled_from(ALL_MEASURES))
def test_global_steps_match_slow_reference(d, measure):
    t, trace = fit(d, None, LearnerConfig(measure=measure, mode="global"))
    for before, step in zip(replay(trace), trace.steps):
        score, lid, c = _slow_best_global(measure, d, before)
        assert step.distance_after == pytest.approx(score, abs=1e-9)
        assert (step.leaf_id, step.criterion) == (lid, c)


def test_mts_learner_on_line_is_minimal(line):
    t, _ = fit(line, None, LearnerConfig(measure=Measure.MTS))
    assert size(t) == 5
