"""End-to-end scoring: trace -> graphs -> complexes -> zigzag -> scores.

Splits scoring from planning so sparsity/threshold sweeps re-threshold
cheaply without recomputing homology.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import scoring
from .complexes import clique_complex, interleave, schedule_zigzag
from .geometry import knn_graph
from .scoring import (
    DEFAULT_ALPHA,
    DEFAULT_GRID_RES,
    DEFAULT_K,
    DEFAULT_MAX_P,
    DEFAULT_SIGMA_SCALE,
    EpiRaster,
    LayerScores,
    PruningPlan,
    activity,
    aggregate_consistency,
    build_epi,
    consistency_matrix,
    project_intervals,
    prune_plan,
)
from .trace_io import LayerTrace
from .zigzag import zigzag_persistence

THREADS_ENV = "TOPOPRUNE_THREADS"


@dataclass
class RunConfig:
    """Validated pipeline parameters; defaults are the shipped defaults."""

    k: int = DEFAULT_K
    alpha: float = DEFAULT_ALPHA
    sigma_scale: float = DEFAULT_SIGMA_SCALE
    grid_res: int = DEFAULT_GRID_RES
    max_p: int = DEFAULT_MAX_P
    combine: str = "max"
    protect_endpoints: bool = True

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.sigma_scale <= 0:
            raise ValueError(f"sigma_scale must be > 0, got {self.sigma_scale}")
        if self.grid_res < 1:
            raise ValueError(f"grid_res must be >= 1, got {self.grid_res}")
        if self.max_p not in (0, 1):
            raise ValueError(f"max_p must be 0 or 1, got {self.max_p}")
        if self.combine not in ("max", "mean"):
            raise ValueError(f"combine must be 'max' or 'mean', got {self.combine!r}")

    def as_dict(self) -> dict:
        return {
            "k": self.k,
            "alpha": self.alpha,
            "sigma_scale": self.sigma_scale,
            "grid_res": self.grid_res,
            "max_p": self.max_p,
            "combine": self.combine,
            "protect_endpoints": self.protect_endpoints,
        }


@dataclass
class TraceResult:
    """Scores plus intermediate artifacts for one trace."""

    scores: LayerScores
    intervals: dict
    effective: list
    rasters: dict[int, EpiRaster]
    k_effective: int
    timings: dict[str, float] = field(default_factory=dict)


def score_trace(trace: LayerTrace, config: RunConfig) -> TraceResult:
    """Run the full topology pipeline on a single trace."""
    L = trace.layer_count
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    graphs = [knn_graph(trace.layer(ell), config.k) for ell in range(1, L + 1)]
    timings["knn_graph"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    complex_dim = config.max_p + 1
    layer_complexes = [clique_complex(g, max_dim=complex_dim) for g in graphs]
    spaces = interleave(layer_complexes)
    schedule = schedule_zigzag(spaces)
    timings["complexes"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    intervals = zigzag_persistence(schedule, max_p=config.max_p)
    timings["zigzag"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    flat = [iv for p in sorted(intervals) for iv in intervals[p]]
    effective = project_intervals(flat, L)
    rasters = {
        p: build_epi(effective, L, p, resolution=config.grid_res,
                     sigma_scale=config.sigma_scale)
        for p in range(config.max_p + 1)
    }
    act, z, fallback = activity(rasters)
    s_matrix, s_defined, s_bar = {}, {}, {}
    for p, raster in rasters.items():
        S, defined = consistency_matrix(raster, L)
        s_matrix[p] = S
        s_defined[p] = defined
        s_bar[p] = aggregate_consistency(S, defined, config.alpha)
    timings["scoring"] = time.perf_counter() - t0

    scores = LayerScores(
        layer_count=L,
        activity=act,
        z=z,
        activity_fallback=fallback,
        s_matrix=s_matrix,
        s_defined=s_defined,
        s_bar=s_bar,
        alpha=config.alpha,
    )
    return TraceResult(scores=scores, intervals=intervals, effective=effective,
                       rasters=rasters, k_effective=graphs[0].k, timings=timings)


def _worker_count(n_tasks: int) -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        workers = int(env)
    else:
        workers = os.cpu_count() or 1
    return max(1, min(workers, n_tasks))


def score_traces(traces: list[LayerTrace], config: RunConfig) -> list[TraceResult]:
    """Score each trace; order of results matches the input order.

    Errors name the offending trace by position in the input list.
    """
    if not traces:
        raise ValueError("need at least one trace")
    layer_counts = {t.layer_count for t in traces}
    if len(layer_counts) != 1:
        raise ValueError(f"traces disagree on layer count: {sorted(layer_counts)}")

    def one(indexed):
        i, trace = indexed
        try:
            return score_trace(trace, config)
        except (ValueError, RuntimeError) as exc:
            raise type(exc)(f"trace {i}: {exc}") from exc

    workers = _worker_count(len(traces))
    if workers == 1:
        return [one(item) for item in enumerate(traces)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, enumerate(traces)))


def aggregate_scores(results: list[TraceResult]) -> dict[int, np.ndarray]:
    """Average the per-sample aggregated consistency vectors dimension-wise."""
    dims = sorted(results[0].scores.s_bar)
    return {
        p: np.mean([r.scores.s_bar[p] for r in results], axis=0)
        for p in dims
    }


def plan_from_results(results: list[TraceResult], config: RunConfig, mode: str,
                      epsilon: float | None = None,
                      target_sparsity: float | None = None) -> PruningPlan:
    s_bar = aggregate_scores(results)
    params = config.as_dict()
    params["samples"] = len(results)
    return prune_plan(
        s_bar, mode=mode, epsilon=epsilon, target_sparsity=target_sparsity,
        protect_endpoints=config.protect_endpoints, combine=config.combine,
        params=params)
