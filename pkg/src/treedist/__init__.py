"""Decision-tree induction driven by clustering distance measures."""

from .clustering import (Clustering, ContingencyTable, LabeledDataset, clustering_from_labels,
                         contingency, dataset_clustering, meet)
from .errors import BudgetError, DataError, SpecError, TreedistError
from .learner import LearnerConfig, TrainTrace, fit, id3_global, id3_glocal, id3_local
from .measures import Measure, evaluate
from .oracle import MinimalTreeOracle, minimal_tree, mts
from .tree import Branch, Leaf, SplitCriterion, predict, size

__all__ = [
    "Branch", "BudgetError", "Clustering", "ContingencyTable", "DataError", "LabeledDataset",
    "Leaf", "LearnerConfig", "Measure", "MinimalTreeOracle", "SpecError", "SplitCriterion",
    "TrainTrace", "TreedistError", "clustering_from_labels", "contingency", "dataset_clustering",
    "evaluate", "fit", "id3_global", "id3_glocal", "id3_local", "meet", "minimal_tree", "mts",
    "predict", "size",
]

__version__ = "0.1.0"
