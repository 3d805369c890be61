"""Exact k-nearest-neighbor graphs over per-layer point clouds.

Brute-force O(N^2 d) Euclidean distances; the downstream complex and
homology stages are the O(Nk) part, so graph construction is allowed to
dominate at desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NeighborGraph:
    vertex_count: int
    k: int
    edges: frozenset  # unordered pairs (i, j) with i < j

    def degree(self, v: int) -> int:
        return sum(1 for e in self.edges if v in e)

    def adjacency(self) -> list[set[int]]:
        adj = [set() for _ in range(self.vertex_count)]
        for i, j in self.edges:
            adj[i].add(j)
            adj[j].add(i)
        return adj


def knn_graph(points: np.ndarray, k: int) -> NeighborGraph:
    """Symmetric-union exact kNN graph.

    Edge {v, u} is present iff u is among v's k nearest others or vice
    versa. Effective k is min(k, N-1). Distance ties break toward the
    lower vertex index, making the construction deterministic.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError(f"points must be (N, d), got shape {pts.shape}")
    n = pts.shape[0]
    if n < 2:
        raise ValueError(f"need at least 2 points, got {n}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not np.isfinite(pts).all():
        raise ValueError("points contain non-finite values")
    k_eff = min(k, n - 1)

    diff = pts[:, None, :] - pts[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(d2, np.inf)
    # stable sort: equal distances keep ascending index order
    order = np.argsort(d2, axis=1, kind="stable")[:, :k_eff]

    edges = set()
    for v in range(n):
        for u in order[v]:
            u = int(u)
            edges.add((v, u) if v < u else (u, v))
    return NeighborGraph(vertex_count=n, k=k_eff, edges=frozenset(edges))
