"""Graph auto-encoder purification against structural attacks on GNNs."""

from .attack import AttackConfig, budget, prbcd_lite, random_flip_attack
from .classifier import ClassifierTrainConfig, GcnParams
from .datasets import planted_partition
from .estimators import GCNNodeClassifier, GPRGAEPurifier
from .graph import GraphFormatError, LabeledGraph, SparseAdjacency, load_graph, normalize
from .metrics import ap, auc
from .model import EdgeScores, GprGaeParams
from .perturb import PerturbationBudget, PerturbationRecord, make_validation_sets, sample_perturbed
from .purify import PurificationTrace, PurifyConfig, estimate_lipschitz, purify, purify_step
from .train import TrainConfig, train_purifier

__version__ = "0.1.0"

__all__ = [
    "AttackConfig", "ClassifierTrainConfig", "EdgeScores", "GCNNodeClassifier", "GPRGAEPurifier",
    "GcnParams", "GprGaeParams", "GraphFormatError", "LabeledGraph", "PerturbationBudget",
    "PerturbationRecord", "PurificationTrace", "PurifyConfig", "SparseAdjacency", "TrainConfig",
    "ap", "auc", "budget", "estimate_lipschitz", "load_graph", "make_validation_sets",
    "normalize", "planted_partition", "prbcd_lite", "purify", "purify_step",
    "random_flip_attack", "sample_perturbed", "train_purifier",
]
