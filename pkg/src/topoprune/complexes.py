"""Clique complexes, intersection complexes, and the zigzag event schedule.

The filtration alternates per-layer complexes with intersection complexes
of adjacent layers. Because each intersection is a subcomplex of both
neighbors, every arrow is realized as a run of single-simplex removals or
additions, giving the homology engine simplex-event granularity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

from .geometry import NeighborGraph

Simplex = tuple  # strictly increasing vertex ids, dim = len - 1

ADD = "add"
REMOVE = "remove"


class ScheduleError(ValueError):
    """Inputs that cannot form a valid zigzag schedule."""


@dataclass
class SimplicialComplex:
    """Face-closed simplex set of dimension <= 2, grouped by dimension."""

    by_dim: dict[int, set] = field(default_factory=dict)

    @property
    def max_dim(self) -> int:
        dims = [d for d, s in self.by_dim.items() if s]
        return max(dims) if dims else -1

    def simplices(self, dim: int) -> set:
        return self.by_dim.get(dim, set())

    def __contains__(self, simplex: Simplex) -> bool:
        return simplex in self.by_dim.get(len(simplex) - 1, ())

    def __len__(self) -> int:
        return sum(len(s) for s in self.by_dim.values())

    def all_simplices(self):
        for dim in sorted(self.by_dim):
            yield from self.by_dim[dim]

    def add(self, simplex: Simplex) -> None:
        self.by_dim.setdefault(len(simplex) - 1, set()).add(simplex)

    def remove(self, simplex: Simplex) -> None:
        self.by_dim[len(simplex) - 1].discard(simplex)

    def copy(self) -> "SimplicialComplex":
        return SimplicialComplex({d: set(s) for d, s in self.by_dim.items()})

    def counts(self) -> tuple:
        md = self.max_dim
        return tuple(len(self.simplices(d)) for d in range(md + 1))

    def is_face_closed(self) -> bool:
        for dim, simps in self.by_dim.items():
            if dim == 0:
                continue
            for s in simps:
                for face in combinations(s, dim):
                    if face not in self:
                        return False
        return True

    def is_subcomplex_of(self, other: "SimplicialComplex") -> bool:
        return all(s <= other.by_dim.get(d, set())
                   for d, s in self.by_dim.items())

    def __eq__(self, other):
        if not isinstance(other, SimplicialComplex):
            return NotImplemented
        dims = set(self.by_dim) | set(other.by_dim)
        return all(self.by_dim.get(d, set()) == other.by_dim.get(d, set())
                   for d in dims)


def clique_complex(graph: NeighborGraph, max_dim: int = 2) -> SimplicialComplex:
    """Clique expansion of a neighbor graph up to dimension max_dim.

    Vertices 0..N-1 always included; triangles are the 3-cliques of the
    graph when max_dim is 2. Face-closed by construction.
    """
    if max_dim not in (0, 1, 2):
        raise ValueError(f"max_dim must be 0, 1 or 2, got {max_dim}")
    by_dim: dict[int, set] = {0: {(v,) for v in range(graph.vertex_count)}}
    if max_dim >= 1:
        by_dim[1] = set(graph.edges)
    if max_dim >= 2:
        adj = graph.adjacency()
        triangles = set()
        for i, j in graph.edges:
            for c in adj[i] & adj[j]:
                if c > j:
                    triangles.add((i, j, c))
        by_dim[2] = triangles
    return SimplicialComplex(by_dim)


def intersect_complexes(a: SimplicialComplex, b: SimplicialComplex) -> SimplicialComplex:
    """Simplex-wise intersection; face-closed since both inputs are."""
    dims = set(a.by_dim) | set(b.by_dim)
    return SimplicialComplex({
        d: a.by_dim.get(d, set()) & b.by_dim.get(d, set()) for d in dims
    })


@dataclass
class ZigzagSchedule:
    """Ordered add/remove events plus marks locating each filtration space.

    space_marks[i] = (event_index, label): after applying the first
    event_index events, the complex equals the i-th space of the
    filtration. Labels are ("layer", ell) or ("intersection", ell, ell+1),
    both 1-based.
    """

    events: list
    space_marks: list

    @property
    def space_count(self) -> int:
        return len(self.space_marks)

    def layer_count(self) -> int:
        return (len(self.space_marks) + 1) // 2


def _sorted_simplices(simplices, reverse: bool):
    return sorted(simplices, key=lambda s: (len(s), s), reverse=reverse)


def interleave(layer_complexes: list[SimplicialComplex]) -> list[SimplicialComplex]:
    """Layer complexes -> the alternating layer/intersection space sequence."""
    if len(layer_complexes) < 2:
        raise ScheduleError("need at least 2 layer complexes")
    spaces = [layer_complexes[0]]
    for a, b in zip(layer_complexes, layer_complexes[1:]):
        spaces.append(intersect_complexes(a, b))
        spaces.append(b)
    return spaces


def schedule_zigzag(spaces: list[SimplicialComplex]) -> ZigzagSchedule:
    """Linearize the alternating space sequence into simplex events.

    spaces must be K_1, K_{1,2}, K_2, ..., K_last with each intersection a
    subcomplex of both neighbors. Add runs insert faces before cofaces
    (ascending (dim, tuple)); remove runs delete cofaces before faces
    (descending), so every intermediate state is a valid complex.
    """
    if len(spaces) < 1 or len(spaces) % 2 == 0:
        raise ScheduleError(f"space sequence must have odd length >= 1, got {len(spaces)}")
    for i in range(1, len(spaces), 2):
        inter = spaces[i]
        if not inter.is_subcomplex_of(spaces[i - 1]):
            raise ScheduleError(f"space {i + 1} is not a subcomplex of its left neighbor")
        if not inter.is_subcomplex_of(spaces[i + 1]):
            raise ScheduleError(f"space {i + 1} is not a subcomplex of its right neighbor")

    events = []
    marks = []
    first = spaces[0]
    events.extend((ADD, s) for s in _sorted_simplices(first.all_simplices(), reverse=False))
    marks.append((len(events), ("layer", 1)))
    for i in range(1, len(spaces), 2):
        layer_ix = (i + 1) // 2  # 1-based left layer
        left, inter, right = spaces[i - 1], spaces[i], spaces[i + 1]
        removed = [s for s in left.all_simplices() if s not in inter]
        events.extend((REMOVE, s) for s in _sorted_simplices(removed, reverse=True))
        marks.append((len(events), ("intersection", layer_ix, layer_ix + 1)))
        added = [s for s in right.all_simplices() if s not in inter]
        events.extend((ADD, s) for s in _sorted_simplices(added, reverse=False))
        marks.append((len(events), ("layer", layer_ix + 1)))
    return ZigzagSchedule(events=events, space_marks=marks)


def replay(schedule: ZigzagSchedule) -> list[SimplicialComplex]:
    """Apply events in order, snapshotting at each space mark.

    Validates that adds never precede their faces and removes never
    precede their cofaces.
    """
    current = SimplicialComplex()
    snapshots = []
    mark_iter = iter(schedule.space_marks)
    mark = next(mark_iter, None)
    for idx, (op, simplex) in enumerate(schedule.events):
        while mark is not None and mark[0] == idx:
            snapshots.append(current.copy())
            mark = next(mark_iter, None)
        dim = len(simplex) - 1
        if op == ADD:
            if simplex in current:
                raise ScheduleError(f"add of already-present simplex {simplex}")
            if dim > 0:
                for face in combinations(simplex, dim):
                    if face not in current:
                        raise ScheduleError(f"add of {simplex} before its face {face}")
            current.add(simplex)
        elif op == REMOVE:
            if simplex not in current:
                raise ScheduleError(f"remove of absent simplex {simplex}")
            for up in current.simplices(dim + 1):
                if set(simplex) <= set(up):
                    raise ScheduleError(f"remove of {simplex} before its coface {up}")
            current.remove(simplex)
        else:
            raise ScheduleError(f"unknown op {op!r}")
    n_events = len(schedule.events)
    while mark is not None:
        if mark[0] != n_events:
            raise ScheduleError(f"mark at index {mark[0]} beyond event list of {n_events}")
        snapshots.append(current.copy())
        mark = next(mark_iter, None)
    return snapshots
