"""Topology-aware transformer layer scoring and pruning."""

from .betti import betti, euler_characteristic
from .complexes import (
    SimplicialComplex,
    ZigzagSchedule,
    clique_complex,
    interleave,
    intersect_complexes,
    replay,
    schedule_zigzag,
)
from .geometry import NeighborGraph, knn_graph
from .pipeline import (
    RunConfig,
    TraceResult,
    aggregate_scores,
    plan_from_results,
    score_trace,
    score_traces,
)
from .scoring import (
    EffectiveInterval,
    EpiRaster,
    LayerScores,
    PruningPlan,
    activity,
    aggregate_consistency,
    build_epi,
    consistency_matrix,
    cosine_baseline,
    plan_overlap,
    project_intervals,
    prune_plan,
)
from .trace_io import LayerTrace, SynthSpec, TraceError, read_trace, synth_trace, write_trace
from .zigzag import PersistenceInterval, zigzag_persistence

__version__ = "0.1.0"
