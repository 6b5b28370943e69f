from nicdiag.diagnosis.base import Ranker
from nicdiag.diagnosis.forest import DecisionTree, ForestModel, load_forest, predict_states, save_forest, train_forest
from nicdiag.diagnosis.result import DiagnosisResult, RankedCause, format_result, result_table, write_result_csv
from nicdiag.diagnosis.states import (
    FAILURE_NAMES,
    FAILURE_TYPES,
    LOCALIZATION,
    N_STATES,
    StateLabel,
    StateProbabilityMatrix,
)
from nicdiag.diagnosis.walker import (
    CulpritMassRanker,
    RandomWalkRanker,
    TransitionMatrix,
    WalkConfig,
    build_transition_matrix,
    culprit_mass,
    random_walk,
    stationary_distribution,
    transition_rows,
    walk_visits,
)

__all__ = [
    "CulpritMassRanker",
    "DecisionTree",
    "DiagnosisResult",
    "FAILURE_NAMES",
    "FAILURE_TYPES",
    "ForestModel",
    "LOCALIZATION",
    "N_STATES",
    "RandomWalkRanker",
    "RankedCause",
    "Ranker",
    "StateLabel",
    "StateProbabilityMatrix",
    "TransitionMatrix",
    "WalkConfig",
    "build_transition_matrix",
    "culprit_mass",
    "format_result",
    "load_forest",
    "predict_states",
    "random_walk",
    "result_table",
    "save_forest",
    "stationary_distribution",
    "train_forest",
    "transition_rows",
    "walk_visits",
]
