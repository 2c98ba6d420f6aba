"""Voxel-grid containers and NRRD file I/O.

Grids are stored as 3-d numpy arrays of shape ``(nx, ny, nz)``; the canonical
flat ordering (used on disk and wherever a scan order matters) is x-fastest,
i.e. Fortran ravel order. All physical quantities are millimetres.

Only a small NRRD subset is supported: ``NRRD0004`` magic, ``type: uint8``,
``dimension: 3``, diagonal ``space directions``, little endian, ``raw`` or
``gzip`` encoding. The writer always emits raw little-endian payloads with a
fixed header key order, so equal volumes serialize to identical bytes.
"""
from __future__ import annotations

import gzip
import re
from dataclasses import dataclass

import numpy as np

from .errors import (
    InvalidLabelError,
    MalformedHeaderError,
    SizeMismatchError,
    UnsupportedFeatureError,
)

BACKGROUND = 0
LIVER = 1
LESION = 2
VESSEL = 3

#: pseudo-label accepted by :func:`extract_mask`: union of labels {1,2,3}.
#: Lesions and vessels sit inside the organ, so this union is the liver mask
#: used for the liver-volume biomarker.
LIVER_UNION = -1

_VALID_LABELS = frozenset((BACKGROUND, LIVER, LESION, VESSEL))


@dataclass(frozen=True)
class VoxelGrid:
    """A 3-d voxel grid with anisotropic spacing.

    ``data`` has shape ``dims = (nx, ny, nz)``; ``spacing`` is mm per voxel
    per axis. Instances are immutable; the backing array is marked read-only.
    """

    data: np.ndarray
    spacing: tuple[float, float, float]

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 3:
            raise ValueError(f"grid data must be 3-d, got shape {data.shape}")
        if min(data.shape) < 1:
            raise ValueError(f"grid dims must be positive, got {data.shape}")
        spacing = tuple(float(s) for s in self.spacing)
        if len(spacing) != 3 or any(s <= 0 for s in spacing):
            raise ValueError(f"spacing components must be > 0, got {spacing}")
        data = data.copy() if not data.flags.owndata or data.base is not None else data
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "spacing", spacing)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    def with_data(self, data: np.ndarray) -> "VoxelGrid":
        return VoxelGrid(data, self.spacing)


@dataclass(frozen=True)
class LabelVolume:
    """Voxel grid of labels {0 background, 1 liver, 2 lesion, 3 vessel}.

    Lesion and vessel voxels are not guaranteed to lie inside liver voxels;
    the segmentation sources may disagree, so consumers must not assume
    nesting.
    """

    grid: VoxelGrid

    def __post_init__(self):
        vals = np.unique(self.grid.data)
        bad = [int(v) for v in vals if int(v) not in _VALID_LABELS]
        if bad:
            raise InvalidLabelError(f"labels outside {{0,1,2,3}}: {bad}")
        if self.grid.data.dtype != np.uint8:
            object.__setattr__(self, "grid", self.grid.with_data(self.grid.data.astype(np.uint8)))

    @property
    def dims(self):
        return self.grid.dims

    @property
    def spacing(self):
        return self.grid.spacing


@dataclass(frozen=True)
class BinaryMask:
    """Boolean voxel grid; same dims/spacing as the volume it came from."""

    grid: VoxelGrid

    def __post_init__(self):
        if self.grid.data.dtype != np.bool_:
            object.__setattr__(self, "grid", self.grid.with_data(self.grid.data.astype(bool)))

    @property
    def dims(self):
        return self.grid.dims

    @property
    def spacing(self):
        return self.grid.spacing

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.grid.data))


def voxel_volume(g: VoxelGrid) -> float:
    """Physical volume of one voxel in mm^3."""
    sx, sy, sz = g.spacing
    return sx * sy * sz


def extract_mask(v: LabelVolume, label: int) -> BinaryMask:
    """Binary mask of one label, or of the organ union for ``LIVER_UNION``."""
    if label == LIVER_UNION:
        data = v.grid.data > 0
    elif label in (LIVER, LESION, VESSEL):
        data = v.grid.data == label
    else:
        raise InvalidLabelError(f"label must be 1, 2, 3 or LIVER_UNION, got {label}")
    return BinaryMask(v.grid.with_data(data))


# --- NRRD ---------------------------------------------------------------

_MAGIC = "NRRD0004"
_UINT8_ALIASES = {"uint8", "uchar", "unsigned char", "uint8_t"}


def _fmt(x: float) -> str:
    """Shortest round-trip decimal for a float ('1.0' not '1.0000...')."""
    return repr(float(x))


def write_nrrd(v: LabelVolume | BinaryMask) -> bytes:
    """Serialize a volume to NRRD bytes.

    Header keys are emitted in a fixed order (type, dimension, sizes,
    space directions, endian, encoding) and the payload is raw little-endian
    uint8 in x-fastest order, so the output is byte-deterministic.
    """
    grid = v.grid
    nx, ny, nz = grid.dims
    sx, sy, sz = grid.spacing
    header = (
        f"{_MAGIC}\n"
        "type: uint8\n"
        "dimension: 3\n"
        f"sizes: {nx} {ny} {nz}\n"
        f"space directions: ({_fmt(sx)},0,0) (0,{_fmt(sy)},0) (0,0,{_fmt(sz)})\n"
        "endian: little\n"
        "encoding: raw\n"
        "\n"
    )
    payload = np.ascontiguousarray(grid.data).astype(np.uint8).tobytes(order="F")
    return header.encode("ascii") + payload


def _parse_directions(value: str) -> tuple[float, float, float]:
    vecs = re.findall(r"\(([^)]*)\)", value)
    if len(vecs) != 3:
        raise MalformedHeaderError(f"space directions needs 3 vectors, got {value!r}")
    diag = []
    for axis, vec in enumerate(vecs):
        try:
            comps = [float(c) for c in vec.split(",")]
        except ValueError as e:
            raise MalformedHeaderError(f"bad space direction vector {vec!r}") from e
        if len(comps) != 3:
            raise MalformedHeaderError(f"space direction vector {vec!r} is not 3-d")
        for j, c in enumerate(comps):
            if j != axis and c != 0.0:
                raise UnsupportedFeatureError(
                    f"non-diagonal space directions are not supported: {value!r}"
                )
        if comps[axis] <= 0:
            raise UnsupportedFeatureError(
                f"space direction for axis {axis} must be positive, got {comps[axis]}"
            )
        diag.append(comps[axis])
    return tuple(diag)


def read_nrrd(
    stream: bytes,
    kind: str = "labels",
    relabel: dict[int, int] | None = None,
) -> LabelVolume | BinaryMask:
    """Parse NRRD bytes into a LabelVolume (default) or BinaryMask.

    ``kind`` selects the returned container: "labels" validates values
    against {0,1,2,3}, "mask" against {0,1}. ``relabel`` optionally remaps
    raw values before validation (labels only). Unknown header fields are
    ignored.
    """
    if kind not in ("labels", "mask"):
        raise ValueError(f"kind must be 'labels' or 'mask', got {kind!r}")
    nl = stream.find(b"\n")
    if nl < 0 or stream[:nl].rstrip(b"\r") != _MAGIC.encode("ascii"):
        raise MalformedHeaderError("missing NRRD0004 magic")
    pos = nl + 1
    fields: dict[str, str] = {}
    while True:
        nl = stream.find(b"\n", pos)
        if nl < 0:
            raise MalformedHeaderError("header not terminated by blank line")
        line = stream[pos:nl].rstrip(b"\r")
        pos = nl + 1
        if line == b"":
            break
        if line.startswith(b"#"):
            continue
        try:
            text = line.decode("ascii")
        except UnicodeDecodeError as e:
            raise MalformedHeaderError(f"non-ascii header line {line!r}") from e
        if ":=" in text:
            continue  # key/value metadata, ignored
        if ":" not in text:
            raise MalformedHeaderError(f"not a field line: {text!r}")
        key, _, value = text.partition(":")
        fields[key.strip().lower()] = value.strip()

    for required in ("type", "dimension", "sizes", "space directions", "encoding"):
        if required not in fields:
            raise MalformedHeaderError(f"missing required header field {required!r}")

    if fields["type"].lower() not in _UINT8_ALIASES:
        raise UnsupportedFeatureError(f"unsupported type {fields['type']!r}")
    if fields["dimension"] != "3":
        raise UnsupportedFeatureError(f"unsupported dimension {fields['dimension']!r}")
    if "endian" in fields and fields["endian"].lower() != "little":
        raise UnsupportedFeatureError(f"unsupported endian {fields['endian']!r}")
    encoding = fields["encoding"].lower()
    if encoding not in ("raw", "gzip"):
        raise UnsupportedFeatureError(f"unsupported encoding {encoding!r}")

    try:
        sizes = tuple(int(s) for s in fields["sizes"].split())
    except ValueError as e:
        raise MalformedHeaderError(f"bad sizes {fields['sizes']!r}") from e
    if len(sizes) != 3 or any(s < 1 for s in sizes):
        raise MalformedHeaderError(f"sizes must be 3 positive integers, got {sizes}")
    spacing = _parse_directions(fields["space directions"])

    payload = stream[pos:]
    if encoding == "gzip":
        try:
            payload = gzip.decompress(payload)
        except (OSError, EOFError) as e:
            raise MalformedHeaderError(f"bad gzip payload: {e}") from e
    expected = sizes[0] * sizes[1] * sizes[2]
    if len(payload) != expected:
        raise SizeMismatchError(f"payload has {len(payload)} bytes, sizes imply {expected}")

    data = np.frombuffer(payload, dtype=np.uint8).reshape(sizes, order="F").copy()
    if relabel:
        out = data.copy()
        for src, dst in relabel.items():
            out[data == src] = dst
        data = out
    grid = VoxelGrid(data, spacing)
    if kind == "mask":
        vals = np.unique(data)
        if any(int(v) not in (0, 1) for v in vals):
            raise InvalidLabelError(f"mask file contains values other than 0/1: {list(vals)}")
        return BinaryMask(grid.with_data(data > 0))
    return LabelVolume(grid)
