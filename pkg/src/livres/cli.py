"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 input error, 3 internal invariant
violation. The CORE_THREADS environment variable caps the worker count for
multi-case runs.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from . import classifier as clf
from . import graph as graphmod
from . import hull as hullmod
from . import phantom as phantommod
from . import pipeline as pl
from . import pruning, skeleton
from .errors import InputError, InvariantError, LivresError
from .morphology import edt
from .volume import VESSEL, extract_mask, read_nrrd, write_nrrd


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _add_prune_options(p):
    p.add_argument("--bif-max", type=int, default=2, help="maximum bifurcation level")
    p.add_argument("--r-max", type=float, default=0.2, help="noise reduction factor")
    p.add_argument(
        "--drop-noise-branches",
        action="store_true",
        help="exclude noise-tagged branches from the retained set",
    )
    p.add_argument(
        "--dilation",
        choices=("radius", "diameter"),
        default="radius",
        help="reconstruction inflation: local radius (default) or twice it",
    )


def _add_common_case_options(p):
    _add_prune_options(p)
    p.add_argument("--clip-to-liver", action="store_true", help="clip the zone to the organ mask")
    p.add_argument("--min-lesion-voxels", type=int, default=1)
    p.add_argument(
        "--relabel",
        default=None,
        help="comma-separated src:dst pairs remapping input label values, e.g. 5:1,6:2",
    )


def _parse_relabel(text):
    if not text:
        return None
    out = {}
    for pair in text.split(","):
        src, _, dst = pair.partition(":")
        out[int(src)] = int(dst)
    return out


def _config(args) -> pl.PipelineConfig:
    return pl.PipelineConfig(
        params=pruning.PruneParams(args.bif_max, args.r_max),
        drop_noise_branches=args.drop_noise_branches,
        clip_to_liver=getattr(args, "clip_to_liver", False),
        dilation=args.dilation,
        min_lesion_voxels=getattr(args, "min_lesion_voxels", 1),
        lam=getattr(args, "lam", 1.0),
        standardize=not getattr(args, "no_standardize", False),
        quiet=getattr(args, "quiet", False),
    )


def _read_volume(path, relabel=None):
    with open(path, "rb") as f:
        return read_nrrd(f.read(), kind="labels", relabel=relabel)


def _case_id(path):
    name = os.path.basename(path)
    return name[: -len(".nrrd")] if name.endswith(".nrrd") else name


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="livres", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pipeline", help="full per-case pipeline with artifact dumps")
    p.add_argument("inputs", nargs="+", help="label-volume NRRD files")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--quiet", action="store_true", help="suppress intermediate artifacts")
    p.add_argument("--threads", type=int, default=None)
    _add_common_case_options(p)

    p = sub.add_parser("prune", help="retained vessel mask plus branch report")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    _add_common_case_options(p)

    p = sub.add_parser("hcz", help="central-zone mask and OBJ mesh")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    _add_common_case_options(p)

    p = sub.add_parser("biomarkers", help="per-case biomarker JSON")
    p.add_argument("input")
    p.add_argument("--out", default=None, help="output JSON path (default: stdout)")
    _add_common_case_options(p)

    p = sub.add_parser("graph", help="vessel graph as a plain-text edge list")
    p.add_argument("input")
    p.add_argument("--out", default=None)
    p.add_argument("--relabel", default=None)

    p = sub.add_parser("export-mesh", help="hull OBJ of a binary mask's voxels")
    p.add_argument("input")
    p.add_argument("--out", required=True)

    p = sub.add_parser("fit", help="fit the classifier on a dataset CSV")
    p.add_argument("input")
    p.add_argument("--out", default=None)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--no-standardize", action="store_true")
    p.add_argument("--features", default=None, help="comma-separated feature subset")

    p = sub.add_parser("evaluate", help="leave-one-out metrics for a dataset CSV")
    p.add_argument("input")
    p.add_argument("--out", default=None)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--no-standardize", action="store_true")
    p.add_argument("--features", default=None)

    p = sub.add_parser("ablate", help="backward-elimination ablation grid")
    p.add_argument("input")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--path-json", default=None, help="also write the elimination path")
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--no-standardize", action="store_true")

    p = sub.add_parser("roc", help="ROC points CSV from leave-one-out probabilities")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--no-standardize", action="store_true")
    p.add_argument("--features", default=None)

    p = sub.add_parser("phantom", help="synthetic labeled phantom dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--n-cases", type=int, default=12)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dims", type=int, nargs=3, default=(48, 48, 48))
    p.add_argument("--spacing", type=float, nargs=3, default=(1.0, 1.0, 1.0))
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--spur-prob", type=float, default=0.0)
    p.add_argument(
        "--mix", type=float, nargs=3, default=(0.4, 0.2, 0.4), help="inside/near/far fractions"
    )
    p.add_argument("--no-features", action="store_true", help="skip the pipeline feature pass")
    p.add_argument("--quiet", action="store_true", help="skip truth JSON dumps")
    return parser


def _features_arg(args):
    if getattr(args, "features", None):
        return tuple(k.strip() for k in args.features.split(","))
    return None


def _emit(text: str, out_path):
    if out_path:
        pl.write_atomic(out_path, text.encode("ascii"))
    else:
        sys.stdout.write(text)


def _cmd_pipeline(args):
    relabel = _parse_relabel(args.relabel)
    volumes = [(_case_id(p), _read_volume(p, relabel)) for p in args.inputs]
    results, failures = pl.run_pipeline(volumes, _config(args), args.out, args.threads)
    rows = [r.biomarkers.as_dict() for r in results]
    pl.write_atomic(os.path.join(args.out, "biomarkers.json"), pl.dump_json(rows))
    for case_id, message in failures:
        print(f"{case_id}: FAILED: {message}", file=sys.stderr)
    for r in results:
        flags = ",".join(r.biomarkers.flags) or "-"
        print(f"{r.case_id}: b_hcz={r.biomarkers.b_hcz} flags={flags}")
    return 2 if failures else 0


def _cmd_prune(args):
    volume = _read_volume(args.input, _parse_relabel(args.relabel))
    result = pl.run_case(volume, _config(args), _case_id(args.input))
    os.makedirs(args.out, exist_ok=True)
    pl.write_atomic(os.path.join(args.out, "retained.nrrd"), write_nrrd(result.retained_mask))
    pl.write_atomic(os.path.join(args.out, "branches.json"), pl.dump_json(result.branch_report))
    print(f"retained {result.retained_mask.count} skeleton voxels")
    return 0


def _cmd_hcz(args):
    volume = _read_volume(args.input, _parse_relabel(args.relabel))
    result = pl.run_case(volume, _config(args), _case_id(args.input))
    os.makedirs(args.out, exist_ok=True)
    pl.write_atomic(os.path.join(args.out, "hcz_mask.nrrd"), write_nrrd(result.hcz.mask))
    pl.write_atomic(
        os.path.join(args.out, "hcz.obj"),
        hullmod.hull_to_obj(result.hcz.hull).encode("ascii"),
    )
    print(f"zone volume {result.hcz.volume!r} mm3, diameter {result.hcz.diameter!r} mm")
    return 0


def _cmd_biomarkers(args):
    volume = _read_volume(args.input, _parse_relabel(args.relabel))
    result = pl.run_case(volume, _config(args), _case_id(args.input))
    _emit(json.dumps(result.biomarkers.as_dict(), indent=2) + "\n", args.out)
    return 0


def _cmd_graph(args):
    volume = _read_volume(args.input, _parse_relabel(args.relabel))
    vessel = extract_mask(volume, VESSEL)
    skel = skeleton.attach_radii(skeleton.skeletonize(vessel), edt(vessel))
    g = graphmod.build_graph(skel)
    _emit(graphmod.export_edge_list(g), args.out)
    return 0


def _cmd_export_mesh(args):
    import numpy as np

    with open(args.input, "rb") as f:
        mask = read_nrrd(f.read(), kind="mask")
    idx = np.argwhere(mask.grid.data)
    points = idx * np.asarray(mask.grid.spacing)
    hull = hullmod.convex_hull(points)
    pl.write_atomic(args.out, hullmod.hull_to_obj(hull).encode("ascii"))
    print(f"wrote {len(hull.vertices)} vertices, {len(hull.faces)} faces")
    return 0


def _load_csv(path) -> clf.Dataset:
    with open(path, "r", encoding="ascii") as f:
        return clf.load_dataset_csv(f.read())


def _cmd_fit(args):
    d = _load_csv(args.input)
    model = clf.fit(
        d, lam=args.lam, subset=_features_arg(args), standardize=not args.no_standardize
    )
    out = {
        "feature_keys": list(model.feature_keys),
        "weights": [float(w) for w in model.weights],
        "intercept": model.intercept,
        "mean": [float(m) for m in model.mean],
        "std": [float(s) for s in model.std],
        "lambda": model.lam,
        "standardized": model.standardized,
        "iterations": model.n_iter,
        "converged": model.converged,
    }
    _emit(json.dumps(out, indent=2) + "\n", args.out)
    return 0


def _cmd_evaluate(args):
    d = _load_csv(args.input)
    report = clf.loo_evaluate(
        d, subset=_features_arg(args), lam=args.lam, standardize=not args.no_standardize
    )
    _emit(json.dumps(report.as_dict(), indent=2) + "\n", args.out)
    return 0


def _cmd_ablate(args):
    d = _load_csv(args.input)
    result = clf.ablate(d, lam=args.lam, standardize=not args.no_standardize)
    pl.write_atomic(args.out, clf.ablation_to_csv(result).encode("ascii"))
    if args.path_json:
        path = {
            "rule": result.rule,
            "elimination": [
                {"removed": removed, "remaining": list(rest)}
                for removed, rest in result.elimination
            ],
        }
        pl.write_atomic(args.path_json, pl.dump_json(path))
    best = max(result.grid, key=lambda row: (row[3] if row[3] is not None else -1.0, row[1]))
    print(f"best subset {','.join(best[0])}: accuracy={best[1]!r} f1={best[2]!r} auc={best[3]!r}")
    return 0


def _cmd_roc(args):
    d = _load_csv(args.input)
    report = clf.loo_evaluate(
        d, subset=_features_arg(args), lam=args.lam, standardize=not args.no_standardize
    )
    pl.write_atomic(args.out, clf.roc_to_csv(clf.roc_points(report)).encode("ascii"))
    return 0


def _cmd_phantom(args):
    spec = phantommod.PhantomSpec(
        dims=tuple(args.dims),
        spacing=tuple(args.spacing),
        depth=args.depth,
        spur_prob=args.spur_prob,
    )
    cases, dataset = phantommod.generate_dataset(
        args.n_cases,
        args.seed,
        mix=tuple(args.mix),
        spec=spec,
        compute_features=not args.no_features,
    )
    os.makedirs(args.out, exist_ok=True)
    for case in cases:
        pl.write_atomic(
            os.path.join(args.out, f"{case.case_id}.nrrd"), write_nrrd(case.volume)
        )
        if not args.quiet:
            truth = {
                "label": case.label,
                "placement": case.placement,
                "entries": [list(e) for e in case.truth.entries],
                "lesion_status": list(case.truth.lesion_status),
                "branches": [
                    {
                        "tree": b.tree,
                        "generation": b.generation,
                        "start": list(b.start),
                        "end": list(b.end),
                        "radius": b.radius,
                        "length": b.length,
                        "is_spur": b.is_spur,
                    }
                    for b in case.truth.branches
                ],
            }
            pl.write_atomic(
                os.path.join(args.out, f"{case.case_id}.truth.json"), pl.dump_json(truth)
            )
    if dataset is not None:
        pl.write_atomic(
            os.path.join(args.out, "dataset.csv"),
            clf.dataset_to_csv(dataset).encode("ascii"),
        )
    labels = [c.label for c in cases]
    print(f"generated {len(cases)} cases ({sum(labels)} complex / {len(labels) - sum(labels)} not)")
    return 0


_COMMANDS = {
    "pipeline": _cmd_pipeline,
    "prune": _cmd_prune,
    "hcz": _cmd_hcz,
    "biomarkers": _cmd_biomarkers,
    "graph": _cmd_graph,
    "export-mesh": _cmd_export_mesh,
    "fit": _cmd_fit,
    "evaluate": _cmd_evaluate,
    "ablate": _cmd_ablate,
    "roc": _cmd_roc,
    "phantom": _cmd_phantom,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except InvariantError as e:
        print(f"livres: internal invariant violation: {e}", file=sys.stderr)
        return 3
    except (InputError, FileNotFoundError, IsADirectoryError, PermissionError) as e:
        print(f"livres: input error: {e}", file=sys.stderr)
        return 2
    except LivresError as e:
        print(f"livres: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
