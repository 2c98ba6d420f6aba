"""Skeleton-to-graph conversion and edge-disjoint branch decomposition.

Vertices are skeleton voxels (ids follow the skeleton's scan order); edges
connect 26-neighbor voxel pairs. A branch is a maximal path whose interior
vertices have degree 2; every edge belongs to exactly one branch. Branch
length sums physical edge lengths, branch radius averages per-edge radii
where an edge's radius is the mean of its endpoint radii.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .skeleton import Skeleton


@dataclass(frozen=True)
class VesselGraph:
    voxels: np.ndarray  # (N, 3) int64 voxel indices
    positions: np.ndarray  # (N, 3) float64 mm
    radii: np.ndarray  # (N,) float64 mm
    edges: np.ndarray  # (E, 2) int64, each row (v, w) with v < w, lexicographic
    adjacency: tuple  # per-vertex tuple of neighbor ids, ascending
    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]

    @property
    def n_vertices(self) -> int:
        return len(self.voxels)

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def neighbors(self, v: int) -> tuple:
        return self.adjacency[v]


@dataclass(frozen=True)
class Branch:
    """A maximal degree-2 chain; ``path`` lists its vertices in walk order."""

    id: int
    path: tuple  # vertex ids, length >= 2; path[0] / path[-1] are endpoints
    length: float  # mm
    radius: float  # mm
    endpoints: tuple  # (path[0], path[-1]); equal for an isolated cycle

    @property
    def edge_set(self) -> frozenset:
        return frozenset(
            (min(a, b), max(a, b)) for a, b in zip(self.path[:-1], self.path[1:])
        )


# one offset per 26-neighborhood direction pair; scanning these from every
# voxel enumerates each undirected neighbor pair exactly once
_FORWARD_OFFSETS = [
    (dx, dy, dz)
    for dz in (0, 1)
    for dy in (-1, 0, 1)
    for dx in (-1, 0, 1)
    if (dz, dy, dx) > (0, 0, 0)
]


def build_graph(s: Skeleton) -> VesselGraph:
    """One vertex per skeleton voxel; edges between all 26-neighbor pairs."""
    voxels = s.voxels
    n = len(voxels)
    index = {(int(x), int(y), int(z)): i for i, (x, y, z) in enumerate(voxels)}
    edges = []
    for i, (x, y, z) in enumerate(voxels):
        for dx, dy, dz in _FORWARD_OFFSETS:
            j = index.get((int(x) + dx, int(y) + dy, int(z) + dz))
            if j is not None:
                edges.append((i, j) if i < j else (j, i))
    edges_arr = (
        np.array(edges, dtype=np.int64) if edges else np.zeros((0, 2), dtype=np.int64)
    )
    if len(edges_arr):
        edges_arr = edges_arr[np.lexsort((edges_arr[:, 1], edges_arr[:, 0]))]
    adj: list[list[int]] = [[] for _ in range(n)]
    for v, w in edges:
        adj[v].append(w)
        adj[w].append(v)
    adjacency = tuple(tuple(sorted(a)) for a in adj)
    positions = voxels.astype(np.float64) * np.asarray(s.spacing)
    return VesselGraph(
        voxels, positions, s.radii.copy(), edges_arr, adjacency, s.dims, s.spacing
    )


def _edge_length(g: VesselGraph, a: int, b: int) -> float:
    d = g.positions[a] - g.positions[b]
    return float(np.sqrt((d * d).sum()))


def _make_branch(g: VesselGraph, bid: int, path: list[int]) -> Branch:
    length = 0.0
    rad = 0.0
    m = len(path) - 1
    for a, b in zip(path[:-1], path[1:]):
        length += _edge_length(g, a, b)
        rad += 0.5 * (g.radii[a] + g.radii[b])
    return Branch(bid, tuple(path), length, rad / m, (path[0], path[-1]))


def decompose_branches(g: VesselGraph) -> list[Branch]:
    """Partition the edge set into branches.

    Walks start at every vertex of degree != 2 (ascending id, neighbors in
    ascending order) and follow degree-2 chains to the next degree != 2
    vertex. Leftover edges belong to isolated cycles; each becomes one
    branch with coinciding endpoints, started at its smallest vertex id.
    """
    visited: set[tuple[int, int]] = set()

    def key(a, b):
        return (a, b) if a < b else (b, a)

    branches: list[Branch] = []

    def walk(start: int, first: int) -> list[int]:
        path = [start, first]
        visited.add(key(start, first))
        prev, cur = start, first
        while len(g.adjacency[cur]) == 2 and cur != start:
            a, b = g.adjacency[cur]
            nxt = b if a == prev else a
            path.append(nxt)
            visited.add(key(cur, nxt))
            prev, cur = cur, nxt
        return path

    for v in range(g.n_vertices):
        if len(g.adjacency[v]) == 2:
            continue
        for w in g.adjacency[v]:
            if key(v, w) in visited:
                continue
            branches.append(_make_branch(g, len(branches), walk(v, w)))

    # isolated cycles: every remaining vertex with an unvisited edge has
    # degree 2; start each cycle at its smallest vertex id
    for v in range(g.n_vertices):
        if len(g.adjacency[v]) != 2:
            continue
        for w in g.adjacency[v]:
            if key(v, w) in visited:
                continue
            branches.append(_make_branch(g, len(branches), walk(v, w)))

    return branches


def edge_branch_map(branches: list[Branch]) -> dict[tuple[int, int], int]:
    """Map each undirected edge (min, max) to the id of its unique branch."""
    out: dict[tuple[int, int], int] = {}
    for b in branches:
        for e in b.edge_set:
            out[e] = b.id
    return out


def export_edge_list(g: VesselGraph) -> str:
    """Plain-text graph dump: vertex block then edge block."""
    lines = ["# vertices: id x y z radius_mm"]
    for i in range(g.n_vertices):
        x, y, z = (int(c) for c in g.voxels[i])
        lines.append(f"{i} {x} {y} {z} {g.radii[i]!r}")
    lines.append("# edges: v w")
    for v, w in g.edges:
        lines.append(f"{int(v)} {int(w)}")
    return "\n".join(lines) + "\n"
