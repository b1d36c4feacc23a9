"""Synthetic cell time-lapse toolkit.

Statistics estimation from annotated microscopy videos, a stochastic 2D
cell-motion simulator, conditioning-image rendering for controllable
generative models, segmentation pseudo-ground-truth correction, and
graph-based tracking evaluation.
"""

from .core import (
    Cell,
    ConvergenceError,
    DatasetStatistics,
    ImageFormatError,
    PopulationState,
    RandomSource,
    SimulationConfig,
    TimeLapseTrajectory,
    TrackFileError,
    TrackRecord,
    ValidationError,
    derive_child_seed,
    mitosis_clock_table,
    validate_lineage,
)
from .motion import (
    DivisionEvent,
    RepulsionParams,
    init_population,
    maybe_split,
    resolve_overlaps,
    simulate,
    step_positions,
)
from .pipeline import (
    MixingPlan,
    TrainingPlan,
    attach_and_correct,
    estimate_stats_from_dir,
    generate_dataset,
    plan_mixing,
    plan_training,
)
from .pseudo_gt import correct_segmentation
from .render import (
    AnnotatedVideo,
    TrainingPair,
    augment_pair,
    build_training_pairs,
    mitosis_color,
    render_movement_map,
    render_position_map,
)
from .stats import (
    DisplacementSample,
    compute_displacements,
    estimate_area_stats,
    estimate_initial_count,
    estimate_split_probability,
    fit_gamma,
)
from .tra import (
    AogmReport,
    AogmWeights,
    TrackingGraph,
    aogm_empty,
    build_tracking_graph,
    count_aogm,
    error_breakdown,
    match_markers,
    tra_score,
)

__version__ = "0.1.0"
