"""Deterministic synthetic phantoms: vascular trees with known geometry.

Two binary tube trees enter a liver ellipsoid at antipodal x-side points and
branch toward their own half of the grid, so the trees stay disjoint. All
randomness comes from a counter-based Philox generator keyed by
(seed, stream), which is documented to produce identical streams on every
platform, so phantoms and the datasets built from them are bit-reproducible.

Datasets plant a recoverable rule: a case is complex when a lesion touches
the analytic central region (hull of the first two branch generations) or
when the total lesion volume exceeds a size threshold. The central-zone
biomarker carries the proximity part of that signal, the lesion volume the
size part.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InputError
from .hull import ConvexHull, convex_hull, distance_to_surface
from .volume import LESION, LIVER, VESSEL, LabelVolume, VoxelGrid


class PhantomBoundsError(InputError):
    pass


@dataclass(frozen=True)
class PhantomSpec:
    seed: int = 0
    dims: tuple = (48, 48, 48)
    spacing: tuple = (1.0, 1.0, 1.0)
    depth: int = 3  # junction generations; branch generations run 0..depth
    branch_len: tuple = (9.0, 13.0)  # mm, generation-0 range
    len_taper: float = 0.8  # per-generation length scale
    root_radius: float = 3.0  # mm
    taper: float = 0.72  # per-generation radius scale, < 1
    spur_prob: float = 0.0
    spur_len_factor: float = 0.12
    lesions: tuple = ()  # ((cx, cy, cz) mm, radius mm)
    liver_semiaxes: tuple = (18.0, 18.0, 18.0)

    def __post_init__(self):
        if not (0.0 < self.taper < 1.0):
            raise InputError(f"taper must be in (0,1), got {self.taper}")
        if self.depth < 0:
            raise InputError("depth must be >= 0")
        ext = self.extent
        c = self.center
        for ax in range(3):
            if self.liver_semiaxes[ax] > min(c[ax], ext[ax] - c[ax]):
                raise PhantomBoundsError(
                    f"liver semiaxis {self.liver_semiaxes[ax]} exceeds grid room on axis {ax}"
                )

    @property
    def extent(self) -> np.ndarray:
        return (np.asarray(self.dims) - 1) * np.asarray(self.spacing)

    @property
    def center(self) -> np.ndarray:
        return self.extent / 2.0


@dataclass(frozen=True)
class TruthBranch:
    tree: int
    generation: int
    start: tuple
    end: tuple
    radius: float
    length: float
    is_spur: bool = False


@dataclass(frozen=True)
class PhantomTruth:
    branches: tuple
    entries: tuple  # two (x, y, z) mm tube tips
    central_points: np.ndarray  # analytic central-region point cloud
    lesion_status: tuple  # per lesion: "overlaps" | "outside" | "boundary"

    def central_hull(self) -> ConvexHull:
        return convex_hull(self.central_points)


def rng_for(seed: int, stream: int = 0) -> np.random.Generator:
    """Philox generator keyed by (seed, stream); identical on all platforms."""
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, stream & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _frame(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Two unit vectors orthogonal to u."""
    a = np.array([1.0, 0.0, 0.0]) if abs(u[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = _unit(np.cross(u, a))
    return e1, np.cross(u, e1)


def _tilted(u: np.ndarray, tilt: float, azimuth: float) -> np.ndarray:
    e1, e2 = _frame(u)
    return _unit(
        math.cos(tilt) * u + math.sin(tilt) * (math.cos(azimuth) * e1 + math.sin(azimuth) * e2)
    )


@dataclass
class _Segment:
    tree: int
    generation: int
    start: np.ndarray
    end: np.ndarray
    radius: float
    is_spur: bool = False


def _grow_tree(
    spec: PhantomSpec, rng: np.random.Generator, tree: int, entry: np.ndarray, direction: np.ndarray
) -> list[_Segment]:
    """Binary tube tree confined to its own x half-space."""
    ext = spec.extent
    cx = spec.center[0]
    gap = 1.5 * max(spec.spacing)
    segments: list[_Segment] = []

    def allowed(p: np.ndarray, radius: float) -> bool:
        margin = radius + max(spec.spacing)
        if (p < margin).any() or (p > ext - margin).any():
            return False
        if tree == 0:
            return p[0] + radius + gap <= cx
        return p[0] - radius - gap >= cx

    # aim point for cramped growth: middle of this tree's own half-space
    x_limit = cx - gap if tree == 0 else cx + gap
    half_mid = spec.center.copy()
    half_mid[0] = 0.5 * (entry[0] + x_limit)

    def grow(gen: int, start: np.ndarray, u: np.ndarray):
        radius = spec.root_radius * spec.taper**gen
        lo, hi = spec.branch_len
        scale = spec.len_taper**gen
        length = float(rng.uniform(lo * scale, hi * scale))
        if gen == 0:
            # keep the first junction well inside the half-space so the
            # children have room to fan out
            length = min(length, 0.6 * abs(x_limit - start[0]))
        d = u
        end = start + length * d
        for attempt in range(60):
            if allowed(end, radius):
                break
            if attempt < 40:
                tilt = float(rng.uniform(0.25, 2.2))
                azim = float(rng.uniform(0.0, 2.0 * math.pi))
                d = _tilted(u, tilt, azim)
            else:
                tilt = float(rng.uniform(0.0, 0.8))
                azim = float(rng.uniform(0.0, 2.0 * math.pi))
                d = _tilted(_unit(half_mid - start), tilt, azim)
                length *= 0.85
            end = start + length * d
        else:
            d = _unit(half_mid - start)
            end = start + length * d
            while length > 1.0 and not allowed(end, radius):
                length *= 0.7
                end = start + length * d
        segments.append(_Segment(tree, gen, start.copy(), end.copy(), radius))

        if gen >= spec.depth:
            return
        if spec.spur_prob > 0.0 and float(rng.random()) < spec.spur_prob:
            tilt = float(rng.uniform(1.2, 1.5))
            azim = float(rng.uniform(0.0, 2.0 * math.pi))
            sd = _tilted(d, tilt, azim)
            slen = spec.spur_len_factor * length
            send = end + slen * sd
            if allowed(send, radius * spec.spur_len_factor * 4):
                segments.append(
                    _Segment(tree, gen + 1, end.copy(), send, radius * spec.taper, True)
                )
        az0 = float(rng.uniform(0.0, 2.0 * math.pi))
        for child in range(2):
            tilt = float(rng.uniform(0.45, 0.8))
            azim = az0 + child * math.pi + float(rng.uniform(-0.4, 0.4))
            grow(gen + 1, end, _tilted(d, tilt, azim))

    grow(0, entry, _unit(direction))
    return segments


def _stamp_capsules(data: np.ndarray, spec: PhantomSpec, segments: list[_Segment], label: int):
    spacing = np.asarray(spec.spacing)
    for seg in segments:
        lo3 = np.minimum(seg.start, seg.end) - seg.radius
        hi3 = np.maximum(seg.start, seg.end) + seg.radius
        lo = np.maximum(np.floor(lo3 / spacing).astype(int), 0)
        hi = np.minimum(np.ceil(hi3 / spacing).astype(int), np.asarray(spec.dims) - 1)
        if (lo > hi).any():
            continue
        ax = [np.arange(lo[i], hi[i] + 1) * spacing[i] for i in range(3)]
        gx, gy, gz = np.meshgrid(*ax, indexing="ij")
        pts = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
        ab = seg.end - seg.start
        denom = float(ab @ ab)
        t = np.clip((pts - seg.start) @ ab / denom, 0.0, 1.0) if denom > 0 else 0.0
        d2 = ((pts - (seg.start + np.atleast_1d(t)[:, None] * ab)) ** 2).sum(axis=1)
        inside = (d2 <= seg.radius**2).reshape(gx.shape)
        block = data[lo[0] : hi[0] + 1, lo[1] : hi[1] + 1, lo[2] : hi[2] + 1]
        block[inside] = label


def _stamp_ellipsoid(data: np.ndarray, spec: PhantomSpec, label: int):
    spacing = np.asarray(spec.spacing)
    ax = [np.arange(spec.dims[i]) * spacing[i] for i in range(3)]
    gx, gy, gz = np.meshgrid(*ax, indexing="ij")
    c = spec.center
    s = np.asarray(spec.liver_semiaxes)
    q = ((gx - c[0]) / s[0]) ** 2 + ((gy - c[1]) / s[1]) ** 2 + ((gz - c[2]) / s[2]) ** 2
    data[q <= 1.0] = label


def _stamp_sphere(data: np.ndarray, spec: PhantomSpec, center, radius: float, label: int):
    spacing = np.asarray(spec.spacing)
    c = np.asarray(center, dtype=float)
    lo = np.maximum(np.floor((c - radius) / spacing).astype(int), 0)
    hi = np.minimum(np.ceil((c + radius) / spacing).astype(int), np.asarray(spec.dims) - 1)
    if (lo > hi).any():
        return
    ax = [np.arange(lo[i], hi[i] + 1) * spacing[i] for i in range(3)]
    gx, gy, gz = np.meshgrid(*ax, indexing="ij")
    d2 = (gx - c[0]) ** 2 + (gy - c[1]) ** 2 + (gz - c[2]) ** 2
    block = data[lo[0] : hi[0] + 1, lo[1] : hi[1] + 1, lo[2] : hi[2] + 1]
    block[d2 <= radius**2] = label


def _central_points(segments: list[_Segment], entries) -> np.ndarray:
    pts = [np.asarray(e, dtype=float) for e in entries]
    for seg in segments:
        if seg.is_spur or seg.generation > 1:
            continue
        pts.append(seg.start)
        pts.append(seg.end)
    return np.array(pts)


def _sphere_hull_distance(hull: ConvexHull, center: np.ndarray) -> float:
    if bool(hull.contains(center[None, :])[0]):
        return 0.0
    return float(distance_to_surface(hull, center[None, :])[0])


def generate_tree(spec: PhantomSpec) -> tuple[LabelVolume, PhantomTruth]:
    """Voxelize the phantom described by ``spec``; bit-identical per seed."""
    rng = rng_for(spec.seed, 0)
    c = spec.center
    a = spec.liver_semiaxes[0]
    entry0 = np.array([c[0] - a, c[1], c[2]])
    entry1 = np.array([c[0] + a, c[1], c[2]])
    segments = _grow_tree(spec, rng, 0, entry0, np.array([1.0, 0.0, 0.0]))
    segments += _grow_tree(spec, rng, 1, entry1, np.array([-1.0, 0.0, 0.0]))

    data = np.zeros(spec.dims, dtype=np.uint8)
    _stamp_ellipsoid(data, spec, LIVER)
    for center, radius in spec.lesions:
        _stamp_sphere(data, spec, center, radius, LESION)
    _stamp_capsules(data, spec, segments, VESSEL)

    central = _central_points(segments, (entry0, entry1))
    status = []
    if spec.lesions:
        hull = convex_hull(central)
        margin = 0.5 * float(np.linalg.norm(spec.spacing))
        for center, radius in spec.lesions:
            d = _sphere_hull_distance(hull, np.asarray(center, dtype=float))
            if d <= radius - margin:
                status.append("overlaps")
            elif d >= radius + margin:
                status.append("outside")
            else:
                status.append("boundary")

    truth = PhantomTruth(
        branches=tuple(
            TruthBranch(
                s.tree,
                s.generation,
                tuple(s.start),
                tuple(s.end),
                s.radius,
                float(np.linalg.norm(s.end - s.start)),
                s.is_spur,
            )
            for s in segments
        ),
        entries=(tuple(entry0), tuple(entry1)),
        central_points=central,
        lesion_status=tuple(status),
    )
    return LabelVolume(VoxelGrid(data, spec.spacing)), truth


# --- labeled datasets ------------------------------------------------------

#: total analytic lesion volume (mm^3) above which a case counts as complex;
#: lesion radii are drawn bimodally so case volumes fall well clear of this
SIZE_THRESHOLD = 480.0


@dataclass(frozen=True)
class PhantomCase:
    case_id: str
    volume: LabelVolume
    truth: PhantomTruth
    label: int
    placement: str  # "inside" | "near" | "far"


#: clearance (mm) between a disjoint lesion sphere and the analytic hull,
#: chosen above the tube-radius bulge of the reconstructed vessels so that a
#: planted "not touching" lesion stays outside the pipeline's zone too
_CLEARANCE = 4.0

#: dataset-generation tree: depth 2 keeps every branch inside the default
#: pruning horizon, and the steep taper makes the root tube clearly the
#: thickest structure so erosion persistence finds the entries reliably
DATASET_SPEC = PhantomSpec(depth=2, branch_len=(9.0, 12.5), root_radius=3.2, taper=0.62)


def _tube_penetration(p: np.ndarray, branches) -> float:
    """How deep (mm) the point sits inside the deepest vessel tube."""
    best = -np.inf
    for b in branches:
        a, e = np.asarray(b.start), np.asarray(b.end)
        ab = e - a
        denom = float(ab @ ab)
        t = float(np.clip((p - a) @ ab / denom, 0.0, 1.0)) if denom > 0 else 0.0
        d = float(np.linalg.norm(p - (a + t * ab)))
        best = max(best, b.radius - d)
    return best


def _place_lesion(
    rng: np.random.Generator,
    spec: PhantomSpec,
    hull: ConvexHull,
    placement: str,
    radius: float,
    branches=(),
) -> tuple[np.ndarray, float]:
    """Choose a lesion (center, radius) inside the liver ellipsoid.

    "inside" draws convex combinations of hull vertices until the center
    lands in the analytic region without the sphere drowning inside a
    vessel tube (the vessel label overwrites lesions, so a swallowed lesion
    would vanish from the volume). "near"/"far" sample a peripheral shell,
    keep candidates clearing the hull by the fixed margin, and take the
    closest or farthest one; the radius shrinks when the liver is too
    cramped to clear the margin at all.
    """
    c = spec.center
    verts = hull.vertices
    if placement == "inside":
        for _ in range(800):
            w = rng.dirichlet(np.ones(4))
            ids = rng.integers(0, len(verts), size=4)
            p = (w[:, None] * verts[ids]).sum(axis=0)
            mix = float(rng.uniform(0.2, 0.8))
            p = mix * p + (1 - mix) * verts.mean(axis=0)
            if ((p - c) ** 2 / np.asarray(spec.liver_semiaxes) ** 2).sum() > 0.95**2:
                continue
            if branches and _tube_penetration(p, branches) > radius - 1.5:
                continue
            if bool(hull.contains(p[None, :])[0]):
                return p, radius
        raise PhantomBoundsError(f"could not place an inside lesion (radius {radius})")

    for _ in range(6):
        s = np.maximum(np.asarray(spec.liver_semiaxes) - (radius + 1.0), 1.0)
        candidates = []
        for _ in range(300):
            u = rng.standard_normal(3)
            norm = float(np.linalg.norm(u))
            if norm < 1e-9:
                continue
            p = c + (u / norm) * float(rng.uniform(0.25, 0.95)) * s
            if ((p - c) ** 2 / np.asarray(spec.liver_semiaxes) ** 2).sum() > 0.95**2:
                continue
            d = _sphere_hull_distance(hull, p)
            if d >= radius + _CLEARANCE:
                candidates.append((d, tuple(p)))
        if candidates:
            candidates.sort()
            d, p = candidates[0] if placement == "near" else candidates[-1]
            return np.asarray(p), radius
        radius *= 0.85
    raise PhantomBoundsError(f"could not place a {placement!r} lesion (radius {radius})")


def generate_dataset(
    n_cases: int,
    seed: int,
    mix: tuple = (0.4, 0.2, 0.4),
    spec: PhantomSpec | None = None,
    compute_features: bool = True,
):
    """n labeled phantom cases plus (optionally) pipeline-computed features.

    ``mix`` gives the (inside, near, far) lesion-placement fractions. Cases
    are generated independently from Philox streams keyed (seed, case index)
    and are therefore reproducible case by case. When ``compute_features``
    is set the full pipeline runs per case and the returned dataset is ready
    for the classifier.
    """
    if n_cases < 2:
        raise InputError("need at least 2 cases")
    base = spec if spec is not None else DATASET_SPEC
    fracs = np.asarray(mix, dtype=float)
    fracs = fracs / fracs.sum()
    counts = np.floor(fracs * n_cases).astype(int)
    while counts.sum() < n_cases:
        counts[int(np.argmax(fracs * n_cases - counts))] += 1
    placements = ["inside"] * counts[0] + ["near"] * counts[1] + ["far"] * counts[2]
    placements = [placements[i] for i in rng_for(seed, 2**32).permutation(n_cases)]

    cases = []
    for i in range(n_cases):
        rng = rng_for(seed, i + 1)
        case_spec = replace(
            base,
            seed=int(rng.integers(0, 2**62)),
            liver_semiaxes=tuple(
                float(x) for x in np.asarray(base.liver_semiaxes) * rng.uniform(0.92, 1.0)
            ),
        )
        _, truth0 = generate_tree(case_spec)
        hull = truth0.central_hull()

        lesions = []
        # bimodal sizes: the big mode clears the volume threshold on its own,
        # the normal mode plus extras stays clearly below it
        if float(rng.random()) < 0.2:
            main_r = float(rng.uniform(5.0, 5.7))
        else:
            main_r = float(rng.uniform(2.5, 4.2))
        lesions.append(
            _place_lesion(rng, case_spec, hull, placements[i], main_r, truth0.branches)
        )
        for _ in range(int(rng.integers(0, 3))):
            try:
                lesions.append(
                    _place_lesion(rng, case_spec, hull, "far", float(rng.uniform(1.2, 2.0)))
                )
            except PhantomBoundsError:
                pass

        case_spec = replace(
            case_spec, lesions=tuple((tuple(p), r) for p, r in lesions)
        )
        volume, truth = generate_tree(case_spec)
        total_volume = sum(4.0 / 3.0 * math.pi * r**3 for _, r in lesions)
        touches = any(
            _sphere_hull_distance(hull, np.asarray(p)) <= r for p, r in lesions
        )
        label = 1 if (touches or total_volume > SIZE_THRESHOLD) else 0
        cases.append(
            PhantomCase(f"case{i:04d}", volume, truth, label, placements[i])
        )

    dataset = None
    if compute_features:
        from .classifier import CaseRecord, Dataset
        from .pipeline import PipelineConfig, run_pipeline

        volumes = [(c.case_id, c.volume) for c in cases]
        results, failures = run_pipeline(volumes, PipelineConfig(quiet=True))
        if failures:
            raise InputError(f"pipeline failed on phantom cases: {failures}")
        by_id = {c.case_id: c for c in cases}
        records = []
        for r in results:
            v = r.biomarkers
            b = v.b_hcz if v.b_hcz is not None else 0.0
            records.append(
                CaseRecord(
                    r.case_id,
                    {"b_hcz": b, "n_les": float(v.n_les), "v_les": v.v_les, "v_liv": v.v_liv},
                    by_id[r.case_id].label,
                )
            )
        dataset = Dataset(tuple(records))
    return cases, dataset
