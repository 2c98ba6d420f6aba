"""Vascular entry identification, recursive tree pruning, reconstruction.

Entry identification: the vessel mask is eroded until empty while recording
26-connected components per iteration. Components are linked across
iterations by voxel overlap into lineages, one per iteration-0 component;
when a component splits, its lineage continues through the largest child
(ties: smallest first-voxel scan position). A lineage's persistence is the
last iteration at which it is still non-empty. The centroids of the two most
persistent lineages, taken at their last surviving iteration, are projected
onto the skeleton and snapped to the nearest degree-1 vertices.

Tree pruning walks the graph depth-first from a degree-1 seed. State per
walk position: the bifurcation level plus the length and radius of the
branch the walk arrived on. Pass through a single unvisited continuation
unchanged. At a multi-way junction, a child branch shorter or thinner than
``r_max`` times the current branch is traversed as noise with unchanged
state; any other child is entered with the level incremented and the state
reset to that child's length/radius. A walk position with level equal to
``bif_max``, or with no unvisited neighbor, stops. The traversal uses an
explicit stack (graphs can contain chains far deeper than the interpreter's
recursion limit) and visits neighbors in ascending vertex id, so the visited
archive is deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    InsufficientPersistentComponentsError,
    InvariantError,
    NoDegreeOneVertexError,
    RootDegreeError,
)
from .graph import Branch, VesselGraph, edge_branch_map
from .morphology import connected_components, dilate_by_radii, erode
from .volume import BinaryMask


@dataclass(frozen=True)
class PruneParams:
    bif_max: int = 2
    r_max: float = 0.2

    def __post_init__(self):
        if self.bif_max < 0:
            raise ValueError(f"bif_max must be >= 0, got {self.bif_max}")
        if not (0.0 <= self.r_max < 1.0):
            raise ValueError(f"r_max must be in [0, 1), got {self.r_max}")


@dataclass(frozen=True)
class EntryPoints:
    v_p: int  # more persistent entry first
    v_h: int
    persistence: tuple[int, int]


@dataclass(frozen=True)
class PrunedTree:
    seed: int
    visited: frozenset  # vertex ids
    branch_tags: dict  # branch id -> ("trunk" | "noise", level)

    def retained_vertices(self, branches: list[Branch], drop_noise: bool = False) -> set:
        """Visited vertices, optionally excluding noise-only vertices.

        With ``drop_noise`` a visited vertex survives if it lies on at least
        one trunk-tagged branch (junctions shared with the trunk stay) or is
        the seed.
        """
        if not drop_noise:
            return set(self.visited)
        keep = {self.seed}
        for bid, (tag, _level) in self.branch_tags.items():
            if tag != "trunk":
                continue
            keep.update(branches[bid].path)
        return keep & set(self.visited)


def find_entries(vessel_mask: BinaryMask, g: VesselGraph) -> EntryPoints:
    """Locate the two tree entry vertices; see the module docstring."""
    degree1 = [v for v in range(g.n_vertices) if g.degree(v) == 1]
    if not degree1:
        raise NoDegreeOneVertexError("graph has no degree-1 vertex")

    labelings = []
    mask = vessel_mask
    while mask.count > 0:
        labelings.append(connected_components(mask, connectivity=26))
        mask = erode(mask)
    if not labelings or labelings[0].count < 2:
        n = labelings[0].count if labelings else 0
        raise InsufficientPersistentComponentsError(
            f"need 2 persistent components, iteration 0 has {n}"
        )

    # parent links: each component at iteration k lies inside exactly one
    # component at k-1 (erosion shrinks), identified via its first voxel
    children: list[dict[int, list[int]]] = [dict()]
    firsts_per_iter = []
    for k, lab in enumerate(labelings):
        flat = lab.labels.data.ravel(order="F")
        ids, first = np.unique(flat, return_index=True)
        firsts = np.zeros(lab.count + 1, dtype=np.int64)
        for i, f in zip(ids, first):
            if i != 0:
                firsts[i] = f
        firsts_per_iter.append(firsts)
        if k == 0:
            continue
        prevflat = labelings[k - 1].labels.data.ravel(order="F")
        kids: dict[int, list[int]] = {}
        for c in range(1, lab.count + 1):
            kids.setdefault(int(prevflat[firsts[c]]), []).append(c)
        children.append(kids)

    lineages = []  # (persistence, root id, last component id)
    for root in range(1, labelings[0].count + 1):
        cur = root
        last_iter = 0
        for k in range(1, len(labelings)):
            kids = children[k].get(cur, [])
            if not kids:
                break
            if len(kids) == 1:
                cur = kids[0]
            else:
                sizes = labelings[k].sizes
                firsts = firsts_per_iter[k]
                cur = min(kids, key=lambda c: (-sizes[c - 1], firsts[c]))
            last_iter = k
        lineages.append((last_iter, root, cur))

    lineages.sort(key=lambda t: (-t[0], t[1]))
    selected = lineages[:2]

    def project(last_iter: int, comp: int, exclude: int | None) -> int:
        centroid = labelings[last_iter].centroids[comp - 1]
        d2 = ((g.positions - centroid) ** 2).sum(axis=1)
        vertex = int(np.argmin(d2))  # argmin takes the smallest id on ties
        pos = g.positions[vertex]
        d2deg1 = [(float(((g.positions[v] - pos) ** 2).sum()), v) for v in degree1]
        d2deg1.sort()
        for _, v in d2deg1:
            if v != exclude:
                return v
        raise NoDegreeOneVertexError("all degree-1 vertices exhausted")

    v_p = project(selected[0][0], selected[0][2], None)
    v_h = project(selected[1][0], selected[1][2], v_p)
    return EntryPoints(v_p, v_h, (selected[0][0], selected[1][0]))


class _Frame:
    __slots__ = ("v", "bif", "blen", "brad", "branch", "entered", "children", "idx")

    def __init__(self, v, bif, blen, brad, branch):
        self.v = v
        self.bif = bif
        self.blen = blen
        self.brad = brad
        self.branch = branch
        self.entered = False
        self.children = None
        self.idx = 0


def prune(
    g: VesselGraph,
    branches: list[Branch],
    root: int,
    params: PruneParams = PruneParams(),
    edge_map: dict | None = None,
) -> PrunedTree:
    """Depth-first pruning walk from a degree-1 root."""
    if g.degree(root) != 1:
        raise RootDegreeError(f"root {root} has degree {g.degree(root)}, need 1")
    if edge_map is None:
        edge_map = edge_branch_map(branches)

    def branch_of(a, b):
        return edge_map[(a, b) if a < b else (b, a)]

    w0 = g.neighbors(root)[0]
    b0 = branch_of(root, w0)
    tags: dict[int, tuple[str, int]] = {b0: ("trunk", 0)}
    visited: set[int] = set()
    stack = [_Frame(root, 0, branches[b0].length, branches[b0].radius, b0)]

    while stack:
        f = stack[-1]
        if not f.entered:
            f.entered = True
            visited.add(f.v)
            if f.bif == params.bif_max:
                stack.pop()
                continue
            unvis = [w for w in g.neighbors(f.v) if w not in visited]
            if not unvis:
                stack.pop()
                continue
            if len(unvis) == 1:
                w = unvis[0]
                b = branch_of(f.v, w)
                if b != f.branch:
                    tags.setdefault(b, ("trunk", f.bif))
                stack.pop()  # tail position: the walk continues unchanged
                stack.append(_Frame(w, f.bif, f.blen, f.brad, b))
                continue
            f.children = unvis
        pushed = False
        while f.idx < len(f.children or ()):
            w = f.children[f.idx]
            f.idx += 1
            if w in visited:
                continue  # reached through a sibling's subtree meanwhile
            b = branch_of(f.v, w)
            bb = branches[b]
            if bb.length < params.r_max * f.blen or bb.radius < params.r_max * f.brad:
                tags.setdefault(b, ("noise", f.bif))
                stack.append(_Frame(w, f.bif, f.blen, f.brad, b))
            else:
                tags.setdefault(b, ("trunk", f.bif + 1))
                stack.append(_Frame(w, f.bif + 1, bb.length, bb.radius, b))
            pushed = True
            break
        if not pushed:
            stack.pop()

    return PrunedTree(root, frozenset(visited), tags)


@dataclass(frozen=True)
class PruneBothResult:
    tree_p: PrunedTree
    tree_h: PrunedTree
    retained: frozenset  # union of retained vertex ids

    def branch_report(self, branches: list[Branch]) -> list[dict]:
        rows = []
        for b in branches:
            tag, level = None, None
            for tree in (self.tree_p, self.tree_h):
                if b.id in tree.branch_tags:
                    tag, level = tree.branch_tags[b.id]
                    break
            rows.append(
                {
                    "id": b.id,
                    "tag": tag if tag is not None else "pruned",
                    "level": level,
                    "len_mm": b.length,
                    "rad_mm": b.radius,
                }
            )
        return rows


def prune_both(
    g: VesselGraph,
    branches: list[Branch],
    entries: EntryPoints,
    params: PruneParams = PruneParams(),
    drop_noise: bool = False,
) -> PruneBothResult:
    """Run both seeded walks with independent visited archives; union them."""
    edge_map = edge_branch_map(branches)
    tree_p = prune(g, branches, entries.v_p, params, edge_map)
    tree_h = prune(g, branches, entries.v_h, params, edge_map)
    retained = tree_p.retained_vertices(branches, drop_noise) | tree_h.retained_vertices(
        branches, drop_noise
    )
    return PruneBothResult(tree_p, tree_h, frozenset(retained))


def reconstruct(
    retained_voxels: np.ndarray,
    retained_radii: np.ndarray,
    original: BinaryMask,
    dilation: str = "radius",
) -> BinaryMask:
    """Inflate retained skeleton voxels by their local size, clip to the mask.

    ``dilation`` selects the inflation amount: "radius" uses the distance
    value itself (reconstructs the tube), "diameter" uses twice that.
    """
    if dilation not in ("radius", "diameter"):
        raise ValueError(f"dilation must be 'radius' or 'diameter', got {dilation}")
    if len(retained_voxels) == 0:
        return BinaryMask(original.grid.with_data(np.zeros(original.dims, dtype=bool)))
    data = original.grid.data
    if not data[retained_voxels[:, 0], retained_voxels[:, 1], retained_voxels[:, 2]].all():
        raise InvariantError("retained voxels must lie inside the original mask")
    factor = 1.0 if dilation == "radius" else 2.0
    points = [
        ((int(v[0]), int(v[1]), int(v[2])), factor * float(r))
        for v, r in zip(retained_voxels, retained_radii)
    ]
    ball = dilate_by_radii(points, original.grid)
    return BinaryMask(original.grid.with_data(ball.grid.data & data))
