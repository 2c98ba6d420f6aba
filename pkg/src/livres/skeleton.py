"""3-d medial-axis thinning and radius attachment.

Border-peeling thinning: each cycle visits the six border directions in the
frozen order (U, D, N, S, E, W) = (+z, -z, +y, -y, +x, -x). For one
direction, every foreground voxel that is borderline in that direction, is
not a line endpoint (endpoints keep their exactly-one-neighbor tips, which
later become the degree-1 entry candidates) and is a simple point gets
collected in x-fastest scan order, then deleted sequentially with the
simple/endpoint tests re-evaluated on the mutated image. Cycles repeat until
a full cycle deletes nothing. The result is a deterministic function of the
direction and scan orders.

A voxel is simple when its deletion preserves both the 26-connectivity of
the object and the 6-connectivity of the background inside the 3x3x3
neighborhood; the two local component counts are evaluated by BFS over
precomputed adjacency tables (Bertrand-Malandain characterization).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .morphology import DistanceMap
from .volume import BinaryMask

# (dx, dy, dz) per direction, order frozen: U, D, N, S, E, W
_DIRECTIONS = ((0, 0, 1), (0, 0, -1), (0, 1, 0), (0, -1, 0), (1, 0, 0), (-1, 0, 0))


def _build_tables():
    offs = np.array(
        [
            (dx, dy, dz)
            for dz in (-1, 0, 1)
            for dy in (-1, 0, 1)
            for dx in (-1, 0, 1)
            if (dx, dy, dz) != (0, 0, 0)
        ],
        dtype=np.int64,
    )
    n = len(offs)  # 26
    adj26 = [
        [j for j in range(n) if j != i and np.abs(offs[i] - offs[j]).max() == 1]
        for i in range(n)
    ]
    n18 = np.array([i for i in range(n) if np.abs(offs[i]).sum() <= 2], dtype=np.int64)
    pos18 = {int(k): i for i, k in enumerate(n18)}
    adj18 = [
        [
            pos18[j]
            for j in n18
            if j != i and np.abs(offs[i] - offs[j]).sum() == 1 and j in pos18
        ]
        for i in n18
    ]
    is_face = np.array([np.abs(offs[i]).sum() == 1 for i in n18], dtype=np.uint8)

    def to_csr(lists):
        ptr = np.zeros(len(lists) + 1, dtype=np.int64)
        for i, l in enumerate(lists):
            ptr[i + 1] = ptr[i] + len(l)
        idx = np.array([j for l in lists for j in l], dtype=np.int64)
        return ptr, idx

    a26p, a26i = to_csr(adj26)
    a18p, a18i = to_csr(adj18)
    return offs, a26p, a26i, n18, a18p, a18i, is_face


_OFFS, _A26P, _A26I, _N18, _A18P, _A18I, _ISFACE = _build_tables()


@njit(cache=True)
def _neighbor_count(img, x, y, z, offs):
    n = 0
    for k in range(26):
        if img[x + offs[k, 0], y + offs[k, 1], z + offs[k, 2]] != 0:
            n += 1
    return n


@njit(cache=True)
def _is_simple(img, x, y, z, offs, a26p, a26i, n18, a18p, a18i, is_face):
    nb = np.empty(26, np.uint8)
    total = 0
    for k in range(26):
        v = img[x + offs[k, 0], y + offs[k, 1], z + offs[k, 2]]
        nb[k] = v
        total += v
    if total == 0:
        return False  # isolated voxel: deletion would remove a component

    # object voxels among the 26 neighbors must form one 26-component
    seen = np.zeros(26, np.uint8)
    stack = np.empty(26, np.int64)
    comps = 0
    for k in range(26):
        if nb[k] != 0 and seen[k] == 0:
            comps += 1
            if comps > 1:
                return False
            seen[k] = 1
            stack[0] = k
            top = 1
            while top > 0:
                top -= 1
                cur = stack[top]
                for e in range(a26p[cur], a26p[cur + 1]):
                    j = a26i[e]
                    if nb[j] != 0 and seen[j] == 0:
                        seen[j] = 1
                        stack[top] = j
                        top += 1

    # background voxels in the 18-neighborhood: exactly one 6-component
    # may touch a face neighbor of the center
    seenb = np.zeros(18, np.uint8)
    compsb = 0
    for i in range(18):
        if nb[n18[i]] == 0 and seenb[i] == 0:
            touches = False
            seenb[i] = 1
            stack[0] = i
            top = 1
            while top > 0:
                top -= 1
                cur = stack[top]
                if is_face[cur] != 0:
                    touches = True
                for e in range(a18p[cur], a18p[cur + 1]):
                    j = a18i[e]
                    if nb[n18[j]] == 0 and seenb[j] == 0:
                        seenb[j] = 1
                        stack[top] = j
                        top += 1
            if touches:
                compsb += 1
                if compsb > 1:
                    return False
    return compsb == 1


@njit(cache=True)
def _thin_sweep(img, dx, dy, dz, cand, offs, a26p, a26i, n18, a18p, a18i, is_face):
    nxp, nyp, nzp = img.shape
    n_cand = 0
    for z in range(1, nzp - 1):
        for y in range(1, nyp - 1):
            for x in range(1, nxp - 1):
                if img[x, y, z] == 0:
                    continue
                if img[x + dx, y + dy, z + dz] != 0:
                    continue
                nc = _neighbor_count(img, x, y, z, offs)
                if nc == 1:
                    continue
                if not _is_simple(img, x, y, z, offs, a26p, a26i, n18, a18p, a18i, is_face):
                    continue
                cand[n_cand] = (z * nyp + y) * nxp + x
                n_cand += 1
    deleted = 0
    for i in range(n_cand):
        c = cand[i]
        x = c % nxp
        y = (c // nxp) % nyp
        z = c // (nxp * nyp)
        # re-test on the mutated image: earlier deletions this pass may have
        # turned this voxel into an endpoint or a non-simple point
        if _neighbor_count(img, x, y, z, offs) == 1:
            continue
        if not _is_simple(img, x, y, z, offs, a26p, a26i, n18, a18p, a18i, is_face):
            continue
        img[x, y, z] = 0
        deleted += 1
    return deleted


@dataclass(frozen=True)
class Skeleton:
    """Thinning result: voxel list in x-fastest scan order plus radii (mm).

    ``radii`` is all zeros until :func:`attach_radii` fills it from a
    distance map of the source mask.
    """

    voxels: np.ndarray  # (K, 3) int64
    radii: np.ndarray  # (K,) float64
    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]

    def __len__(self):
        return len(self.voxels)

    def as_mask(self) -> BinaryMask:
        from .volume import VoxelGrid

        data = np.zeros(self.dims, dtype=bool)
        if len(self.voxels):
            data[self.voxels[:, 0], self.voxels[:, 1], self.voxels[:, 2]] = True
        return BinaryMask(VoxelGrid(data, self.spacing))


def skeletonize(m: BinaryMask) -> Skeleton:
    """Thin a mask to its medial axis; see the module docstring."""
    dims = m.dims
    img = np.zeros((dims[0] + 2, dims[1] + 2, dims[2] + 2), dtype=np.uint8)
    img[1:-1, 1:-1, 1:-1] = m.grid.data
    cand = np.empty(img.size, dtype=np.int64)
    while True:
        deleted = 0
        for dx, dy, dz in _DIRECTIONS:
            deleted += _thin_sweep(
                img, dx, dy, dz, cand, _OFFS, _A26P, _A26I, _N18, _A18P, _A18I, _ISFACE
            )
        if deleted == 0:
            break
    core = img[1:-1, 1:-1, 1:-1] != 0
    flat = np.flatnonzero(core.ravel(order="F"))
    xs, ys, zs = np.unravel_index(flat, dims, order="F")
    voxels = np.column_stack((xs, ys, zs)).astype(np.int64)
    return Skeleton(voxels, np.zeros(len(voxels)), dims, m.spacing)


def attach_radii(s: Skeleton, d: DistanceMap) -> Skeleton:
    """Copy the distance value at each skeleton voxel into ``radii``."""
    if d.grid.dims != s.dims:
        raise ValueError(f"distance map dims {d.grid.dims} != skeleton dims {s.dims}")
    if len(s.voxels) == 0:
        return Skeleton(s.voxels, np.zeros(0), s.dims, s.spacing)
    radii = d.values[s.voxels[:, 0], s.voxels[:, 1], s.voxels[:, 2]].astype(np.float64)
    return Skeleton(s.voxels, radii, s.dims, s.spacing)
