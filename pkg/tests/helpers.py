"""Shared test utilities: random complexes and valid event reshuffles."""

from __future__ import annotations

import random

import numpy as np

from topoprune.complexes import ADD, SimplicialComplex, ZigzagSchedule, clique_complex
from topoprune.geometry import NeighborGraph


def random_clique_complex(rng, n: int, edge_prob: float) -> SimplicialComplex:
    edges = set()
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < edge_prob:
                edges.add((i, j))
    graph = NeighborGraph(vertex_count=n, k=1, edges=frozenset(edges))
    return clique_complex(graph, max_dim=2)


def _faces(s):
    if len(s) <= 1:
        return []
    return [s[:i] + s[i + 1:] for i in range(len(s))]


def shuffle_schedule(schedule: ZigzagSchedule, seed: int) -> ZigzagSchedule:
    """Random valid reordering within each add/remove run.

    Adds still insert faces before cofaces and removes delete cofaces
    before faces, so the reordered schedule realizes the same spaces.
    """
    r = random.Random(seed)
    events = list(schedule.events)
    segments = []
    prev = 0
    for mark_index, _ in schedule.space_marks:
        if mark_index > prev:
            segments.append((prev, mark_index))
            prev = mark_index
    new_events = []
    for lo, hi in segments:
        seg = events[lo:hi]
        op = seg[0][0]
        simplices = [s for _, s in seg]
        in_run = set(simplices)
        placed = set()
        order = []
        pool = list(simplices)
        while pool:
            if op == ADD:
                ready = [s for s in pool
                         if all(f not in in_run or f in placed for f in _faces(s))]
            else:
                ready = [s for s in pool
                         if all(not (set(s) < set(c)) or c in placed
                                for c in in_run if len(c) == len(s) + 1)]
            pick = r.choice(ready)
            order.append(pick)
            placed.add(pick)
            pool.remove(pick)
        new_events.extend((op, s) for s in order)
    return ZigzagSchedule(events=new_events, space_marks=schedule.space_marks)
