"""Interval projection, persistence-image rasters, and layer scores.

Pipeline tail: project filtration-space intervals onto model-layer
coordinates, rasterize them into a Gaussian-kernel image per homology
dimension, then derive per-layer activity, inter-layer consistency, and
the pruning plan.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .zigzag import PersistenceInterval

DEFAULT_K = 15
DEFAULT_ALPHA = 1.0
DEFAULT_SIGMA_SCALE = 0.1
DEFAULT_GRID_RES = 8
DEFAULT_MAX_P = 1

SIGMA_FLOOR = 1e-6


@dataclass(frozen=True, order=True)
class EffectiveInterval:
    """Interval in model-layer coordinates, intersection spaces projected out."""

    p: int
    birth_layer: int
    death_layer: int

    @property
    def tau(self) -> int:
        return self.death_layer - self.birth_layer


def project_intervals(intervals, layer_count: int) -> list[EffectiveInterval]:
    """Map space-index intervals [b, d] to layer-index intervals.

    Layer spaces (odd index 2l-1) map to l. Intersection spaces (even
    index 2l) round outward: births down to l, deaths up to l+1, the
    unique choice that never shortens a lifespan.
    """
    n_spaces = 2 * layer_count - 1
    out = []
    for iv in intervals:
        if not (1 <= iv.birth <= iv.death <= n_spaces):
            raise ValueError(
                f"interval [{iv.birth}, {iv.death}] outside spaces 1..{n_spaces}")
        b = (iv.birth + 1) // 2 if iv.birth % 2 else iv.birth // 2
        d = (iv.death + 1) // 2 if iv.death % 2 else iv.death // 2 + 1
        out.append(EffectiveInterval(p=iv.p, birth_layer=b, death_layer=d))
    return sorted(out)


@dataclass
class EpiRaster:
    """Gaussian-kernel image of one dimension's effective intervals.

    Cells are float32 (matches the 32-bit trace precision; empty regions
    underflow to exact zero). Cell centers sit on the lattice of integer
    layer/persistence coordinates so integer-located features sample
    exactly; the grid pads >= 4 sigma beyond all feature centers on both
    axes, which is what makes the Gaussian mass identity hold.
    """

    p: int
    cells: np.ndarray          # shape (n_u, n_v), float32
    u_centers: np.ndarray
    v_centers: np.ndarray
    sigma: float
    resolution: int
    layer_count: int
    empty: bool                # no intervals for this dimension
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def cell_size(self) -> float:
        return 1.0 / self.resolution

    def value_at(self, u: float, v: float) -> float:
        """Raster value at the cell whose center is nearest (u, v); 0 outside."""
        iu = int(round((u - self.u_centers[0]) * self.resolution))
        iv = int(round((v - self.v_centers[0]) * self.resolution))
        if 0 <= iu < self.u_centers.size and 0 <= iv < self.v_centers.size:
            return float(self.cells[iu, iv])
        return 0.0

    def layer_column(self, ell: int) -> np.ndarray:
        iu = int(round((ell - self.u_centers[0]) * self.resolution))
        if 0 <= iu < self.u_centers.size:
            return self.cells[iu]
        return np.zeros_like(self.v_centers, dtype=np.float32)

    def total_mass(self) -> float:
        return float(self.cells.sum(dtype=np.float64))


def _lattice(lo: float, hi: float, res: int) -> np.ndarray:
    """Cell centers on the integer-anchored lattice covering [lo, hi]."""
    start = math.floor(lo * res)
    stop = math.ceil(hi * res)
    return np.arange(start, stop + 1, dtype=np.float64) / res


def build_epi(effective, layer_count: int, p: int,
              resolution: int = DEFAULT_GRID_RES,
              sigma_scale: float = DEFAULT_SIGMA_SCALE) -> EpiRaster:
    """Rasterize one dimension's intervals into a weighted Gaussian image.

    EPI(u, v) = sum_j w(tau_j) exp(-((u - b_j)^2 + (v - tau_j)^2) / (2 sigma^2))
    with sigma = sigma_scale * (max death layer - min birth layer) over this
    dimension's intervals (floored at 1e-6) and w(tau) = tau / tau_max, the
    linear ramp that vanishes on zero-persistence features (w = 1 when all
    tau are 0). An empty interval set yields a zero raster with a flag.
    """
    if resolution < 1:
        raise ValueError(f"resolution must be >= 1, got {resolution}")
    if sigma_scale <= 0:
        raise ValueError(f"sigma_scale must be > 0, got {sigma_scale}")
    ivals = [iv for iv in effective if iv.p == p]
    if not ivals:
        sigma = SIGMA_FLOOR
        pad = 4.0 * sigma
        u_centers = _lattice(1.0 - pad, layer_count + pad, resolution)
        v_centers = _lattice(0.0 - pad, 0.0 + pad, resolution)
        cells = np.zeros((u_centers.size, v_centers.size), dtype=np.float32)
        return EpiRaster(p=p, cells=cells, u_centers=u_centers, v_centers=v_centers,
                         sigma=sigma, resolution=resolution, layer_count=layer_count,
                         empty=True)

    births = np.array([iv.birth_layer for iv in ivals], dtype=np.float64)
    taus = np.array([iv.tau for iv in ivals], dtype=np.float64)
    sigma = max(sigma_scale * (max(iv.death_layer for iv in ivals) - births.min()),
                SIGMA_FLOOR)
    tau_max = taus.max()
    weights = taus / tau_max if tau_max > 0 else np.ones_like(taus)

    pad = 4.0 * sigma
    u_centers = _lattice(min(1.0, births.min()) - pad,
                         max(float(layer_count), births.max()) + pad, resolution)
    v_centers = _lattice(min(0.0, taus.min()) - pad, taus.max() + pad, resolution)
    du = u_centers[:, None] - births[None, :]
    dv = v_centers[:, None] - taus[None, :]
    inv = 1.0 / (2.0 * sigma * sigma)
    # accumulate in float64, store float32
    cells = np.einsum(
        "uj,vj->uv",
        np.exp(-du * du * inv) * weights[None, :],
        np.exp(-dv * dv * inv),
    ).astype(np.float32)
    return EpiRaster(p=p, cells=cells, u_centers=u_centers, v_centers=v_centers,
                     sigma=sigma, resolution=resolution, layer_count=layer_count,
                     empty=False, weights=weights)


def analytic_mass(raster: EpiRaster) -> float:
    """Closed-form integral the raster mass approximates: sum_j w_j 2 pi sigma^2."""
    return float(raster.weights.sum() * 2.0 * math.pi * raster.sigma ** 2)


def activity(rasters: dict[int, EpiRaster]) -> tuple[np.ndarray, float, bool]:
    """Per-layer activity A and normalizer Z.

    A(l) = (1/Z) sum_p sum_v EPI_p(u_l, v) dv, Z chosen so sum_l A(l) = 1.
    All-zero rasters yield the uniform fallback with a flag.
    """
    layer_count = _common_layer_count(rasters)
    col_sums = np.zeros(layer_count, dtype=np.float64)
    for raster in rasters.values():
        dv = raster.cell_size
        for ell in range(1, layer_count + 1):
            col_sums[ell - 1] += raster.layer_column(ell).sum(dtype=np.float64) * dv
    z = float(col_sums.sum())
    if z == 0.0:
        return np.full(layer_count, 1.0 / layer_count), 0.0, True
    return col_sums / z, z, False


def _common_layer_count(rasters: dict[int, EpiRaster]) -> int:
    counts = {r.layer_count for r in rasters.values()}
    if len(counts) != 1:
        raise ValueError(f"rasters disagree on layer count: {sorted(counts)}")
    return counts.pop()


def consistency_matrix(raster: EpiRaster, layer_count: int) -> tuple[np.ndarray, np.ndarray]:
    """Row-stochastic persistence-to-layer matrix S_p.

    S_p(l, l') reads the raster at u = l, v = l' - l for l' >= l (a feature
    born at l reaching layer l'), 0 for l' < l, normalized per row. Rows
    with zero denominator are flagged undefined, not thrown.
    """
    raw = np.zeros((layer_count, layer_count), dtype=np.float64)
    for ell in range(1, layer_count + 1):
        for ell2 in range(ell, layer_count + 1):
            raw[ell - 1, ell2 - 1] = raster.value_at(float(ell), float(ell2 - ell))
    sums = raw.sum(axis=1)
    defined = sums > 0.0
    S = np.zeros_like(raw)
    S[defined] = raw[defined] / sums[defined, None]
    return S, defined


def aggregate_consistency(S: np.ndarray, defined: np.ndarray, alpha: float) -> np.ndarray:
    """Distance-weighted row aggregate S-bar.

    S-bar(l) = sum_{l' != l} |l - l'|^alpha S(l, l') / sum_{l' != l} |l - l'|^alpha.
    The l' = l term is excluded (its weight would be 0^alpha); alpha = 0 is
    the plain mean over l' != l. Undefined rows aggregate to 0.
    """
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    L = S.shape[0]
    out = np.zeros(L, dtype=np.float64)
    idx = np.arange(1, L + 1, dtype=np.float64)
    for ell in range(1, L + 1):
        if not defined[ell - 1]:
            continue
        w = np.abs(ell - idx) ** alpha
        w[ell - 1] = 0.0
        denom = w.sum()
        if denom == 0.0:
            continue
        out[ell - 1] = float(w @ S[ell - 1]) / denom
    return out


@dataclass
class LayerScores:
    """Activity, consistency, and their aggregates for one trace."""

    layer_count: int
    activity: np.ndarray
    z: float
    activity_fallback: bool
    s_matrix: dict[int, np.ndarray]
    s_defined: dict[int, np.ndarray]
    s_bar: dict[int, np.ndarray]      # per homology dimension
    alpha: float

    def combined(self, combine: str = "max") -> np.ndarray:
        stacked = np.stack([self.s_bar[p] for p in sorted(self.s_bar)])
        if combine == "max":
            return stacked.max(axis=0)
        if combine == "mean":
            return stacked.mean(axis=0)
        raise ValueError(f"unknown combine mode {combine!r}")


@dataclass
class PruningPlan:
    """Pruned layer set plus every parameter needed to reproduce it."""

    layer_count: int
    pruned: tuple
    mode: str                       # "threshold" or "sparsity"
    epsilon: float | None
    target_sparsity: float | None
    combined_scores: np.ndarray
    s_bar_max: float
    protected: tuple
    params: dict = field(default_factory=dict)
    per_layer_dominant: np.ndarray | None = None  # raw per-layer max_p reading (debug)

    @property
    def sparsity(self) -> float:
        return len(self.pruned) / self.layer_count


def prune_plan(s_bar: dict[int, np.ndarray], mode: str,
               epsilon: float | None = None,
               target_sparsity: float | None = None,
               protect_endpoints: bool = True,
               combine: str = "max",
               params: dict | None = None) -> PruningPlan:
    """Select layers to prune from aggregated consistency scores.

    Combined score is the per-layer max over homology dimensions. In
    threshold mode P = {l : score >= epsilon * max_l score}; in sparsity
    mode P is the floor(target * L) highest-scoring layers, ties broken
    toward deeper layers. The first and last layers are never pruned
    (selection backfills in sparsity mode) unless protection is disabled.
    """
    dims = sorted(s_bar)
    if not dims:
        raise ValueError("need at least one homology dimension of scores")
    stacked = np.stack([np.asarray(s_bar[p], dtype=np.float64) for p in dims])
    combined = stacked.max(axis=0) if combine == "max" else stacked.mean(axis=0)
    L = combined.size
    protected = (1, L) if protect_endpoints else ()
    s_max = float(combined.max())

    if mode == "threshold":
        if epsilon is None or not (0.0 < epsilon <= 1.0):
            raise ValueError(f"threshold mode needs 0 < epsilon <= 1, got {epsilon}")
        chosen = [ell for ell in range(1, L + 1)
                  if combined[ell - 1] >= epsilon * s_max and ell not in protected]
    elif mode == "sparsity":
        if target_sparsity is None or not (0.0 <= target_sparsity < 1.0):
            raise ValueError(
                f"sparsity mode needs 0 <= target_sparsity < 1, got {target_sparsity}")
        m = int(math.floor(target_sparsity * L))
        if m > L - len(protected):
            raise ValueError(
                f"target sparsity {target_sparsity} needs {m} layers but only "
                f"{L - len(protected)} are prunable")
        # score descending, deeper layer first on ties, then take the top m
        order = sorted((ell for ell in range(1, L + 1) if ell not in protected),
                       key=lambda ell: (-combined[ell - 1], -ell))
        chosen = sorted(order[:m])
    else:
        raise ValueError(f"unknown mode {mode!r}")

    return PruningPlan(
        layer_count=L,
        pruned=tuple(sorted(chosen)),
        mode=mode,
        epsilon=epsilon,
        target_sparsity=target_sparsity,
        combined_scores=combined,
        s_bar_max=s_max,
        protected=tuple(protected),
        params=dict(params or {}),
        per_layer_dominant=combined.copy(),
    )


def plan_overlap(a: PruningPlan, b: PruningPlan, mode: str = "jaccard") -> float:
    """Agreement between two pruned sets.

    Jaccard |A & B| / |A | B| by default (1.0 when both empty);
    mode "reference" divides by |A| instead.
    """
    if a.layer_count != b.layer_count:
        raise ValueError(
            f"plans disagree on layer count: {a.layer_count} vs {b.layer_count}")
    sa, sb = set(a.pruned), set(b.pruned)
    if mode == "jaccard":
        union = sa | sb
        return 1.0 if not union else len(sa & sb) / len(union)
    if mode == "reference":
        return 1.0 if not sa else len(sa & sb) / len(sa)
    raise ValueError(f"unknown overlap mode {mode!r}")


def cosine_baseline(trace) -> tuple[np.ndarray, np.ndarray]:
    """Mean adjacent-layer cosine similarity per token.

    The local-similarity paradigm this pipeline replaces, kept as a
    comparison hook. Accepts a LayerTrace or an (L, N, d) array. Returns
    (scores, defined) with scores[ell-1] the mean over tokens of
    cos(h_ell, h_{ell+1}) for ell in 1..L-1; higher means more redundant.
    Zero-norm tokens are skipped; a transition with every token skipped
    is flagged undefined.
    """
    arr = np.asarray(getattr(trace, "coords", trace), dtype=np.float64)
    L = arr.shape[0]
    if L < 2:
        raise ValueError("need at least 2 layers")
    scores = np.zeros(L - 1)
    defined = np.zeros(L - 1, dtype=bool)
    for ell in range(L - 1):
        a, b = arr[ell], arr[ell + 1]
        na = np.linalg.norm(a, axis=1)
        nb = np.linalg.norm(b, axis=1)
        ok = (na > 0) & (nb > 0)
        if not ok.any():
            continue
        cos = np.einsum("ij,ij->i", a[ok], b[ok]) / (na[ok] * nb[ok])
        scores[ell] = float(cos.mean())
        defined[ell] = True
    return scores, defined
