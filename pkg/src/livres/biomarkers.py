"""The four imaging biomarkers extracted per case.

The central-zone score is the lesions' occupancy fraction of the zone when
the voxelized masks intersect, and otherwise the negative of the minimal
lesion-to-zone distance normalized by the zone diameter. Volumes are
physical (mm^3); counts use 26-connectivity.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hull import Hcz, distance_to_hcz
from .morphology import connected_components
from .volume import LESION, LabelVolume, BinaryMask, voxel_volume


@dataclass(frozen=True)
class BiomarkerVector:
    case_id: str
    v_liv: float  # mm^3, union of labels {1,2,3}
    n_les: int  # 26-connected lesion components
    v_les: float  # mm^3
    b_hcz: float | None  # None when flagged no-lesion or empty-hcz
    flags: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "v_liv_mm3": self.v_liv,
            "n_les": self.n_les,
            "v_les_mm3": self.v_les,
            "b_hcz": self.b_hcz,
            "b_hcz_percent": None if self.b_hcz is None else 100.0 * self.b_hcz,
            "flags": list(self.flags),
        }


def compute_biomarkers(
    v: LabelVolume,
    hcz: Hcz,
    case_id: str = "case",
    min_lesion_voxels: int = 1,
) -> BiomarkerVector:
    """All four biomarkers for one case.

    Lesion components smaller than ``min_lesion_voxels`` are ignored.
    A case without lesions is flagged "no-lesion" and a zone whose
    voxelization is empty is flagged "empty-hcz"; either leaves the
    central-zone score undefined while the other biomarkers are still
    reported.
    """
    vol = voxel_volume(v.grid)
    data = v.grid.data
    v_liv = vol * float(np.count_nonzero(data > 0))

    lesion_data = data == LESION
    lesion = BinaryMask(v.grid.with_data(lesion_data))
    labeling = connected_components(lesion, connectivity=26)
    if min_lesion_voxels > 1 and labeling.count:
        keep = np.flatnonzero(labeling.sizes >= min_lesion_voxels) + 1
        lesion_data = np.isin(labeling.labels.data, keep)
        lesion = BinaryMask(v.grid.with_data(lesion_data))
        n_les = len(keep)
    else:
        n_les = labeling.count
    v_les = vol * float(np.count_nonzero(lesion_data))

    flags: list[str] = []
    b_hcz: float | None = None
    if n_les == 0:
        flags.append("no-lesion")
    elif hcz.mask.count == 0:
        flags.append("empty-hcz")
    else:
        inter = int(np.count_nonzero(lesion_data & hcz.mask.grid.data))
        if inter > 0:
            b_hcz = inter / hcz.mask.count
        else:
            b_hcz = -distance_to_hcz(lesion, hcz) / hcz.diameter
    return BiomarkerVector(case_id, v_liv, n_les, v_les, b_hcz, tuple(flags))
