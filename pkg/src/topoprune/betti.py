"""Betti numbers by direct boundary-matrix rank reduction over GF(2).

Deliberately independent of the incremental zigzag engine: this module
builds each boundary matrix from scratch and row-reduces it, and serves
as the verification oracle for the engine's pointwise interval counts.
"""

from __future__ import annotations

from itertools import combinations

from .complexes import SimplicialComplex


def _gf2_rank(columns: list[int]) -> int:
    """Rank of a GF(2) matrix given as column bitsets."""
    pivots: dict[int, int] = {}
    rank = 0
    for col in columns:
        while col:
            top = col.bit_length() - 1
            other = pivots.get(top)
            if other is None:
                pivots[top] = col
                rank += 1
                break
            col ^= other
    return rank


def _boundary_columns(complex_: SimplicialComplex, dim: int) -> list[int]:
    """Columns of the boundary map C_dim -> C_{dim-1} as row bitsets."""
    if dim <= 0:
        return []
    faces = sorted(complex_.simplices(dim - 1))
    row_of = {f: i for i, f in enumerate(faces)}
    cols = []
    for s in sorted(complex_.simplices(dim)):
        col = 0
        for face in combinations(s, dim):
            col |= 1 << row_of[face]
        cols.append(col)
    return cols


def betti(complex_: SimplicialComplex, p: int) -> int:
    """Rank of p-th simplicial homology over the two-element field.

    beta_p = dim C_p - rank d_p - rank d_{p+1}.
    """
    if p < 0:
        raise ValueError(f"p must be >= 0, got {p}")
    n_p = len(complex_.simplices(p))
    if n_p == 0:
        return 0
    rank_down = _gf2_rank(_boundary_columns(complex_, p))
    rank_up = _gf2_rank(_boundary_columns(complex_, p + 1))
    return n_p - rank_down - rank_up


def euler_characteristic(complex_: SimplicialComplex) -> int:
    """Alternating simplex-count sum; cross-checks betti via V - E + T."""
    return sum((-1) ** d * len(s) for d, s in complex_.by_dim.items())
