"""Exact solving and verification for finite zero-sum games with imperfect monitoring."""

from . import core, lp, reduction, scenarios, solver, strategy
from .core import (
    ActionSet,
    EpmReport,
    FiniteHistory,
    MonitoringStructure,
    ObservationTree,
    PerfectRecallReport,
    StagePartition,
    TruncatedGame,
    atom_of,
    build_monitoring,
    build_observation_tree,
    check_epm,
    check_perfect_recall,
    mask_from_histories,
    observation_stage,
)
from .errors import ConditioningError, ModelingError, SizeCapError
from .reduction import (
    Announcement,
    AuxGame,
    AuxHistory,
    AuxValueReport,
    SandwichReport,
    StateProjection,
    StateSchedule,
    aux_best_response,
    aux_payoff,
    aux_value,
    build_aux_game,
    build_schedule,
    compare_values,
    lift_player2,
    nature_transition,
    project_player1,
)
from .scenarios import (
    LeaveStayOutcome,
    ScenarioFixture,
    TailPolicy,
    classify_outcome,
    exact_payoff_with_tails,
    scenario_suite,
)
from .solver import (
    NormalForm,
    SequenceFormProgram,
    ValueReport,
    best_response,
    brute_force_value,
    fictitious_play,
    normal_form,
    sequence_form_value,
)
from .strategy import (
    BehavioralStrategy,
    CoupledBatch,
    CoupledPlayPair,
    PlayDistribution,
    SimplexGrid,
    build_simplex_grid,
    coupled_sample,
    coupled_sample_batch,
    grids_for,
    payoff,
    play_distribution,
    snap_strategy,
    strategy_distance,
)

__all__ = [
    "core", "lp", "reduction", "scenarios", "solver", "strategy",
    "ActionSet", "EpmReport", "FiniteHistory", "MonitoringStructure",
    "ObservationTree", "PerfectRecallReport", "StagePartition", "TruncatedGame",
    "atom_of", "build_monitoring", "build_observation_tree", "check_epm",
    "check_perfect_recall", "mask_from_histories", "observation_stage",
    "ConditioningError", "ModelingError", "SizeCapError",
    "Announcement", "AuxGame", "AuxHistory", "AuxValueReport", "SandwichReport",
    "StateProjection", "StateSchedule", "aux_best_response", "aux_payoff",
    "aux_value", "build_aux_game", "build_schedule", "compare_values",
    "lift_player2", "nature_transition", "project_player1",
    "LeaveStayOutcome", "ScenarioFixture", "TailPolicy", "classify_outcome",
    "exact_payoff_with_tails", "scenario_suite",
    "NormalForm", "SequenceFormProgram", "ValueReport", "best_response",
    "brute_force_value", "fictitious_play", "normal_form", "sequence_form_value",
    "BehavioralStrategy", "CoupledBatch", "CoupledPlayPair", "PlayDistribution",
    "SimplexGrid", "build_simplex_grid", "coupled_sample", "coupled_sample_batch",
    "grids_for", "payoff", "play_distribution", "snap_strategy", "strategy_distance",
]
