"""Convex hull of retained vessels and the central-zone geometry on top of it.

The hull is computed with qhull on lexicographically sorted input points, so
the result depends only on the point set. Faces are triangles wound
counterclockwise when viewed from outside; each carries a unit outward
normal n and offset d with the interior satisfying n.x <= d.

Containment tests (voxelization, the zero branch of the lesion distance) use
n.x <= d + eps with eps = 1e-9 times the hull bounding-box diagonal, so that
points that are vertices of the hull itself never fall outside through
floating rounding.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull as _QHull
from scipy.spatial import QhullError

from .errors import DegenerateHullError, EmptyHczError, EmptyLesionError, InvariantError
from .morphology import erode
from .volume import BinaryMask, VoxelGrid, voxel_volume


@dataclass(frozen=True)
class ConvexHull:
    vertices: np.ndarray  # (V, 3) float64 mm, subset of the input points
    faces: np.ndarray  # (F, 3) int64 indices into vertices, CCW outward
    normals: np.ndarray  # (F, 3) unit outward
    offsets: np.ndarray  # (F,) interior: normals @ x <= offsets
    enclosed_volume: float  # mm^3, analytic

    @property
    def bbox_diagonal(self) -> float:
        span = self.vertices.max(axis=0) - self.vertices.min(axis=0)
        return float(np.sqrt((span * span).sum()))

    @property
    def containment_tol(self) -> float:
        return 1e-9 * max(self.bbox_diagonal, 1.0)

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Inclusive containment test for an (N, 3) array of points."""
        pts = np.atleast_2d(points)
        resid = pts @ self.normals.T - self.offsets
        return (resid <= self.containment_tol).all(axis=1)


@dataclass(frozen=True)
class Hcz:
    """Central zone: hull, its voxelization, voxel volume and diameter."""

    hull: ConvexHull
    mask: BinaryMask
    volume: float  # mm^3 of the voxelized hull
    diameter: float  # mm, max pairwise hull-vertex distance


def convex_hull(points: np.ndarray) -> ConvexHull:
    """Hull of >= 4 non-coplanar 3-d points (mm)."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"points must be (N, 3), got {pts.shape}")
    pts = np.unique(pts, axis=0)  # also sorts lexicographically
    if len(pts) < 4:
        raise DegenerateHullError(f"need >= 4 distinct points, got {len(pts)}")

    centered = pts - pts.mean(axis=0)
    span = pts.max(axis=0) - pts.min(axis=0)
    diag = float(np.sqrt((span * span).sum()))
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    residual = float(np.abs(centered @ vt[2]).max())
    if residual <= 1e-9 * max(diag, 1.0):
        raise DegenerateHullError(f"points are coplanar (plane residual {residual:g})")

    try:
        qh = _QHull(pts)
    except QhullError as e:
        raise DegenerateHullError(f"qhull rejected the input: {e}") from e

    vert_ids = np.sort(np.asarray(qh.vertices, dtype=np.int64))
    remap = {int(v): i for i, v in enumerate(vert_ids)}
    vertices = pts[vert_ids]
    faces = np.array(
        [[remap[int(v)] for v in simplex] for simplex in qh.simplices], dtype=np.int64
    )
    normals = qh.equations[:, :3].copy()
    offsets = -qh.equations[:, 3].copy()

    # enforce counterclockwise winding as seen from outside
    a = vertices[faces[:, 0]]
    b = vertices[faces[:, 1]]
    c = vertices[faces[:, 2]]
    flip = np.einsum("ij,ij->i", np.cross(b - a, c - a), normals) < 0
    faces[flip] = faces[flip][:, [0, 2, 1]]

    n_edges = len({tuple(sorted(e)) for f in faces for e in ((f[0], f[1]), (f[1], f[2]), (f[0], f[2]))})
    if len(vertices) - n_edges + len(faces) != 2:
        raise InvariantError("hull is not a closed surface (Euler check failed)")

    hull = ConvexHull(vertices, faces, normals, offsets, float(qh.volume))
    resid = pts @ normals.T - offsets
    if resid.max() > 1e-6 * max(diag, 1.0):
        raise InvariantError(f"hull half-spaces exclude an input point by {resid.max():g}")
    return hull


def voxelize_hull(h: ConvexHull, template: VoxelGrid) -> BinaryMask:
    """Mask of voxels whose center satisfies every half-space (inclusive)."""
    spacing = np.asarray(template.spacing)
    dims = template.dims
    lo = np.maximum(np.floor(h.vertices.min(axis=0) / spacing).astype(int), 0)
    hi = np.minimum(np.ceil(h.vertices.max(axis=0) / spacing).astype(int), np.array(dims) - 1)
    out = np.zeros(dims, dtype=bool)
    if (lo > hi).any():
        return BinaryMask(VoxelGrid(out, template.spacing))
    ix = np.arange(lo[0], hi[0] + 1)
    iy = np.arange(lo[1], hi[1] + 1)
    iz = np.arange(lo[2], hi[2] + 1)
    tol = h.containment_tol
    # slab by z to bound the (voxels x faces) intermediate
    gx, gy = np.meshgrid(ix * spacing[0], iy * spacing[1], indexing="ij")
    plane = np.stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)], axis=1)
    for z in iz:
        pts = plane.copy()
        pts[:, 2] = z * spacing[2]
        inside = ((pts @ h.normals.T - h.offsets) <= tol).all(axis=1)
        out[lo[0] : hi[0] + 1, lo[1] : hi[1] + 1, z] = inside.reshape(len(ix), len(iy))
    return BinaryMask(VoxelGrid(out, template.spacing))


def hull_diameter(h: ConvexHull) -> float:
    """Maximum pairwise distance over hull vertices."""
    v = h.vertices
    d2 = ((v[:, None, :] - v[None, :, :]) ** 2).sum(axis=2)
    return float(np.sqrt(d2.max()))


def _point_segment_dist_sq(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        d = pts - a
        return (d * d).sum(axis=1)
    t = np.clip((pts - a) @ ab / denom, 0.0, 1.0)
    d = pts - (a + t[:, None] * ab)
    return (d * d).sum(axis=1)


def _point_triangle_dist_sq(pts: np.ndarray, a, b, c) -> np.ndarray:
    """Exact squared distance from each point to triangle (a, b, c).

    The closest point is either the orthogonal projection (when it lands
    inside the triangle) or lies on one of the edges.
    """
    e0 = b - a
    e1 = c - a
    n = np.cross(e0, e1)
    nn = float(n @ n)
    edge = np.minimum(
        _point_segment_dist_sq(pts, a, b),
        np.minimum(_point_segment_dist_sq(pts, b, c), _point_segment_dist_sq(pts, c, a)),
    )
    if nn == 0.0:
        return edge  # degenerate triangle: edges cover it
    ap = pts - a
    # barycentric coordinates of the in-plane projection
    d00 = float(e0 @ e0)
    d01 = float(e0 @ e1)
    d11 = float(e1 @ e1)
    d20 = ap @ e0
    d21 = ap @ e1
    denom = d00 * d11 - d01 * d01
    s = (d11 * d20 - d01 * d21) / denom
    t = (d00 * d21 - d01 * d20) / denom
    inside = (s >= 0.0) & (t >= 0.0) & (s + t <= 1.0)
    dist_plane = (ap @ n) ** 2 / nn
    return np.where(inside, dist_plane, edge)


def distance_to_surface(h: ConvexHull, points: np.ndarray) -> np.ndarray:
    """Exact distance from each point to the hull boundary surface."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    best = np.full(len(pts), np.inf)
    for f in h.faces:
        a, b, c = h.vertices[f[0]], h.vertices[f[1]], h.vertices[f[2]]
        best = np.minimum(best, _point_triangle_dist_sq(pts, a, b, c))
    return np.sqrt(best)


def distance_to_hcz(lesion: BinaryMask, hcz: Hcz) -> float:
    """Minimal distance from lesion voxel centers to the polytope (0 inside)."""
    idx = np.argwhere(lesion.grid.data)
    if len(idx) == 0:
        raise EmptyLesionError("lesion mask is empty")
    if hcz.mask.count == 0:
        raise EmptyHczError("voxelized central zone is empty")
    centers = idx * np.asarray(lesion.grid.spacing)
    inside = hcz.hull.contains(centers)
    if inside.any():
        return 0.0
    return float(distance_to_surface(hcz.hull, centers).min())


def build_hcz(vessel_mask: BinaryMask, clip_to: BinaryMask | None = None) -> Hcz:
    """Central zone from a reconstructed vessel mask.

    The hull input is the set of surface-voxel centers (identical hull to
    using all voxels: interior centers are convex combinations of boundary
    centers along their own grid line). ``clip_to`` optionally intersects the
    voxelized zone with another mask.
    """
    surface = vessel_mask.grid.data & ~erode(vessel_mask).grid.data
    idx = np.argwhere(surface)
    if len(idx) < 4:
        raise DegenerateHullError(f"vessel mask has {len(idx)} surface voxels, need >= 4")
    points = idx * np.asarray(vessel_mask.grid.spacing)
    hull = convex_hull(points)
    mask = voxelize_hull(hull, vessel_mask.grid)
    if clip_to is not None:
        mask = BinaryMask(mask.grid.with_data(mask.grid.data & clip_to.grid.data))
    volume = mask.count * voxel_volume(vessel_mask.grid)
    return Hcz(hull, mask, volume, hull_diameter(hull))


def hull_to_obj(h: ConvexHull) -> str:
    """Wavefront OBJ text: triangle faces, counterclockwise outward."""
    lines = []
    for v in h.vertices:
        lines.append(f"v {v[0]!r} {v[1]!r} {v[2]!r}")
    for f in h.faces:
        lines.append(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}")
    return "\n".join(lines) + "\n"
