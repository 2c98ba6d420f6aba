"""End-to-end per-case processing: label volume in, biomarkers out.

Stage order per case: vessel mask extraction, distance transform,
skeletonization, graph construction, entry identification, the two seeded
pruning walks, morphological reconstruction, hull, voxelization, biomarkers.
Intermediate artifacts are returned so the CLI can dump them.
"""
from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field, replace

import numpy as np

from . import biomarkers as bm
from . import graph as graphmod
from . import hull as hullmod
from . import pruning, skeleton
from .errors import LivresError
from .morphology import edt
from .volume import LIVER_UNION, VESSEL, BinaryMask, LabelVolume, extract_mask, write_nrrd


@dataclass(frozen=True)
class PipelineConfig:
    params: pruning.PruneParams = field(default_factory=pruning.PruneParams)
    drop_noise_branches: bool = False
    clip_to_liver: bool = False
    dilation: str = "radius"  # or "diameter"
    min_lesion_voxels: int = 1
    lam: float = 1.0
    standardize: bool = True
    quiet: bool = False  # suppress intermediate artifact dumps


@dataclass(frozen=True)
class CaseResult:
    case_id: str
    biomarkers: bm.BiomarkerVector
    vessel_mask: BinaryMask
    skeleton_mask: BinaryMask
    retained_mask: BinaryMask
    reconstructed: BinaryMask
    hcz: hullmod.Hcz
    branch_report: list
    entries: pruning.EntryPoints


def run_case(volume: LabelVolume, config: PipelineConfig = PipelineConfig(), case_id: str = "case") -> CaseResult:
    vessel = extract_mask(volume, VESSEL)
    dist = edt(vessel)
    skel = skeleton.attach_radii(skeleton.skeletonize(vessel), dist)
    g = graphmod.build_graph(skel)
    branches = graphmod.decompose_branches(g)
    entries = pruning.find_entries(vessel, g)
    both = pruning.prune_both(
        g, branches, entries, config.params, drop_noise=config.drop_noise_branches
    )
    ids = np.array(sorted(both.retained), dtype=np.int64)
    retained_voxels = g.voxels[ids]
    retained_radii = g.radii[ids]
    reconstructed = pruning.reconstruct(retained_voxels, retained_radii, vessel, config.dilation)
    clip = extract_mask(volume, LIVER_UNION) if config.clip_to_liver else None
    hcz = hullmod.build_hcz(reconstructed, clip_to=clip)
    vector = bm.compute_biomarkers(volume, hcz, case_id, config.min_lesion_voxels)

    retained_mask = BinaryMask(
        vessel.grid.with_data(_mask_from_voxels(retained_voxels, vessel.dims))
    )
    return CaseResult(
        case_id,
        vector,
        vessel,
        skel.as_mask(),
        retained_mask,
        reconstructed,
        hcz,
        both.branch_report(branches),
        entries,
    )


def _mask_from_voxels(voxels: np.ndarray, dims) -> np.ndarray:
    data = np.zeros(dims, dtype=bool)
    if len(voxels):
        data[voxels[:, 0], voxels[:, 1], voxels[:, 2]] = True
    return data


def write_atomic(path: str, data: bytes) -> None:
    """Write via a temp file in the same directory plus rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj) -> bytes:
    return (json.dumps(obj, indent=2) + "\n").encode("ascii")


def write_case_artifacts(result: CaseResult, out_dir: str, quiet: bool = False) -> dict:
    """Write one case's artifact files; returns {name: path}."""
    case_dir = os.path.join(out_dir, result.case_id)
    written = {}

    def put(name, data):
        path = os.path.join(case_dir, name)
        write_atomic(path, data)
        written[name] = path

    put("biomarkers.json", dump_json(result.biomarkers.as_dict()))
    if not quiet:
        put("vessel_mask.nrrd", write_nrrd(result.vessel_mask))
        put("skeleton.nrrd", write_nrrd(result.skeleton_mask))
        put("retained.nrrd", write_nrrd(result.retained_mask))
        put("reconstructed.nrrd", write_nrrd(result.reconstructed))
        put("hcz_mask.nrrd", write_nrrd(result.hcz.mask))
        put("hcz.obj", hullmod.hull_to_obj(result.hcz.hull).encode("ascii"))
        put("branches.json", dump_json(result.branch_report))
        put(
            "entries.json",
            dump_json(
                {
                    "v_p": result.entries.v_p,
                    "v_h": result.entries.v_h,
                    "persistence": list(result.entries.persistence),
                }
            ),
        )
    return written


def worker_count(requested: int | None = None) -> int:
    """Resolve the worker count; the CORE_THREADS env var caps it."""
    cap = os.environ.get("CORE_THREADS")
    cap_n = max(1, int(cap)) if cap else None
    if requested is None:
        return cap_n or 1
    n = max(1, requested)
    return min(n, cap_n) if cap_n else n


def run_pipeline(
    volumes: list[tuple[str, LabelVolume]],
    config: PipelineConfig = PipelineConfig(),
    out_dir: str | None = None,
    threads: int | None = None,
) -> tuple[list[CaseResult], list[tuple[str, str]]]:
    """Process cases, optionally in parallel; results stay in input order.

    Returns (results, failures) where failures are (case_id, message) for
    cases that raised. Output files are identical regardless of the worker
    count because every artifact is written from an ordered result list.
    """
    n_workers = worker_count(threads)
    results: dict[str, CaseResult] = {}
    failures: list[tuple[str, str]] = []
    if n_workers <= 1 or len(volumes) <= 1:
        for case_id, vol in volumes:
            try:
                results[case_id] = run_case(vol, config, case_id)
            except LivresError as e:
                failures.append((case_id, str(e)))
    else:
        from concurrent.futures import ThreadPoolExecutor

        def job(item):
            case_id, vol = item
            return case_id, run_case(vol, config, case_id)

        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            futures = [(cid, pool.submit(job, (cid, vol))) for cid, vol in volumes]
            for cid, fut in futures:
                try:
                    results[cid] = fut.result()[1]
                except LivresError as e:
                    failures.append((cid, str(e)))
    ordered = [results[cid] for cid, _ in volumes if cid in results]
    if out_dir is not None:
        for r in ordered:
            write_case_artifacts(r, out_dir, config.quiet)
    return ordered, failures
