"""Shapley-value scoring of weak-supervision labeling functions.

The package values each labeling function (LF) by its exact Shapley value in
a fixed proxy pipeline: majority voting aggregates weak labels into soft
class probabilities, and an exact K-nearest-neighbor model predicts held-out
instances from those probabilities.  The Shapley values of this game are
computable in closed form, which brings the cost down from exponential to
quadratic in the number of LFs and makes the per-weak-label decomposition
cheap enough for interactive debugging, pruning, and revision.
"""

__version__ = "0.1.0"

from .data import (
    ABSTAIN,
    LabeledSet,
    LFSummary,
    ProxyConfig,
    SplitBundle,
    TaskSpec,
    WeakLabelMatrix,
    lf_summary,
    load_bundle,
    save_bundle,
)
from .tables import SVTables, build_tables, psi, sv_plus_direct
from .proxy import NeighborIndex, build_index, coalition_utility, hard_accuracy, mv_predict, soft_accuracy
from .engine import ContributionMatrix, WeShapResult, explain, weshap_dataset, weshap_instance
from .oracle import ProxyGame, exact_shapley_permutations, exact_shapley_subsets

__all__ = [
    "ABSTAIN",
    "ContributionMatrix",
    "LFSummary",
    "LabeledSet",
    "NeighborIndex",
    "ProxyConfig",
    "ProxyGame",
    "SVTables",
    "SplitBundle",
    "TaskSpec",
    "WeShapResult",
    "WeakLabelMatrix",
    "build_index",
    "build_tables",
    "coalition_utility",
    "exact_shapley_permutations",
    "exact_shapley_subsets",
    "explain",
    "hard_accuracy",
    "lf_summary",
    "load_bundle",
    "mv_predict",
    "psi",
    "save_bundle",
    "soft_accuracy",
    "sv_plus_direct",
    "weshap_dataset",
    "weshap_instance",
]
