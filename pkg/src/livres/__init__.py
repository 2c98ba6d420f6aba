"""Liver-resection complexity analysis from 3-label voxel volumes.

Pipeline: vessel skeletonization with local radii, graph and branch
decomposition, erosion-persistence entry detection, recursive tree pruning,
morphological reconstruction, convex central zone, the four imaging
biomarkers, and a leave-one-out evaluated logistic classifier with
backward-elimination ablation.
"""

from .biomarkers import BiomarkerVector, compute_biomarkers
from .classifier import (
    FEATURE_KEYS,
    AblationResult,
    CaseRecord,
    Dataset,
    EvalReport,
    LogisticModel,
    ablate,
    auc_score,
    fit,
    load_dataset_csv,
    loo_evaluate,
    predict_proba,
)
from .graph import Branch, VesselGraph, build_graph, decompose_branches
from .hull import (
    ConvexHull,
    Hcz,
    build_hcz,
    convex_hull,
    distance_to_hcz,
    hull_diameter,
    voxelize_hull,
)
from .morphology import (
    ComponentLabeling,
    DistanceMap,
    connected_components,
    dilate_by_radii,
    edt,
    erode,
)
from .phantom import PhantomSpec, PhantomTruth, generate_dataset, generate_tree
from .pipeline import CaseResult, PipelineConfig, run_case, run_pipeline
from .pruning import (
    EntryPoints,
    PruneParams,
    PrunedTree,
    find_entries,
    prune,
    prune_both,
    reconstruct,
)
from .skeleton import Skeleton, attach_radii, skeletonize
from .volume import (
    BACKGROUND,
    LESION,
    LIVER,
    LIVER_UNION,
    VESSEL,
    BinaryMask,
    LabelVolume,
    VoxelGrid,
    extract_mask,
    read_nrrd,
    voxel_volume,
    write_nrrd,
)

__version__ = "0.1.0"
