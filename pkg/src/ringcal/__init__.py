"""Ring-array sensor self-calibration from pairwise time-of-flight distances."""

from .baselines import BaselineTag, mds_map, run_baseline, svd_reconstruct
from .completion import CompletionOptions, CompletionResult, optspace_complete
from .delay import DelaySearchConfig, DelaySearchResult, estimate_delay
from .embedding import PositionEstimate, classical_mds, position_distance, procrustes_align
from .errors import (
    AllCandidatesFailed,
    ConfigError,
    DimensionMismatch,
    DisconnectedGraph,
    InvalidParameter,
    NegativeSpectrumWarning,
    RankDeficientWarning,
    UnreliableRowsWarning,
)
from .geometry import SensorLayout, generate_ring_layout, pairwise_distance_matrix, squared_distance_matrix
from .harness import ExperimentConfig, ExperimentRecord, run_sweep, run_trial
from .observation import MaskPair, ObservationSet, synthesize_observation
from .pipeline import localize

__version__ = "0.1.0"
