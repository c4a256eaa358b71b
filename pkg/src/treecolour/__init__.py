"""Coupled broadcast colourings on complete d-ary trees.

Samplers for the broadcast process, a naive and an improved coupling of two
broadcasts with different root colours, exact enumeration oracles, absorbed
walk arithmetic, and Monte Carlo estimators with exact-value annotations.
"""
from .broadcast import ColourList, Colouring, Palette, sample_broadcast, sample_list
from .classify import (
    DisagreementPair,
    ListFlags,
    classify_list,
    expected_bad,
    is_bad,
    is_fail,
    is_good,
    is_rescuable,
    is_special,
    p_bad_exact,
    p_free_exact,
)
from .coupling import (
    Association,
    CoupledBlock,
    DisagreementRecord,
    PartialState,
    block_tables,
    couple_block,
    couple_tree_improved,
    maximal_child_coupling,
    naive_couple_tree,
    phase1,
    phase2,
    phase3,
)
from .estimators import (
    BoundAnnotation,
    BoundParams,
    EstimateReport,
    GofResult,
    estimate_branching,
    estimate_event_A,
    estimate_level_disagreements,
    estimate_list_statistics,
    estimate_tv_upper,
    gof_both_marginals,
    gof_marginal_test,
    run_trials,
    trial_rng,
)
from .oracle import (
    DEFAULT_BUDGET,
    EmptySupportError,
    EnumerationBudgetError,
    ExactMeasure,
    ListConstraints,
    conditional_list_measure,
    enumerate_measure,
    leaf_projection,
    relabel_measure,
    tv_distance_leaves,
)
from .tree_model import TreeShape, children, leaves, level_of, level_size, parent, vertex_count
from .walks import (
    SMatrix,
    WalkDistribution,
    absorbed_walk_dp,
    conditional_positive_mean,
    first_passage_prob,
    s_matrix_run,
)

__version__ = "0.1.0"
