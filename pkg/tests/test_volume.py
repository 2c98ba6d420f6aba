import gzip

import numpy as np
import pytest

from livres.errors import (
    InvalidLabelError,
    MalformedHeaderError,
    SizeMismatchError,
    UnsupportedFeatureError,
)
from livres.volume import (
    LIVER_UNION,
    BinaryMask,
    LabelVolume,
    VoxelGrid,
    extract_mask,
    read_nrrd,
    voxel_volume,
    write_nrrd,
)


def label_volume(data, spacing=(1.0, 1.0, 1.0)):
    return LabelVolume(VoxelGrid(np.asarray(data, dtype=np.uint8), spacing))


class TestVoxelGrid:
    def test_dims_and_length(self):
        g = VoxelGrid(np.zeros((4, 3, 2), dtype=np.uint8), (1, 1, 1))
        assert g.dims == (4, 3, 2)
        assert g.data.size == 24

    def test_rejects_nonpositive_spacing(self):
        with pytest.raises(ValueError):
            VoxelGrid(np.zeros((2, 2, 2), dtype=np.uint8), (1, 0, 1))

    def test_immutable(self):
        g = VoxelGrid(np.zeros((2, 2, 2), dtype=np.uint8), (1, 1, 1))
        with pytest.raises(ValueError):
            g.data[0, 0, 0] = 1

    def test_label_validation(self):
        with pytest.raises(InvalidLabelError):
            label_volume(np.full((2, 2, 2), 7))


class TestReadNrrd:
    def test_minimal_file(self):
        raw = (
            b"NRRD0004\n"
            b"type: uint8\n"
            b"dimension: 3\n"
            b"sizes: 2 2 2\n"
            b"space directions: (1.0,0,0) (0,1.0,0) (0,0,1.0)\n"
            b"endian: little\n"
            b"encoding: raw\n"
            b"\n" + bytes([1] * 8)
        )
        v = read_nrrd(raw)
        assert isinstance(v, LabelVolume)
        assert v.dims == (2, 2, 2)
        assert (v.grid.data == 1).all()  # all liver

    def test_payload_size_mismatch(self):
        raw = (
            b"NRRD0004\ntype: uint8\ndimension: 3\nsizes: 2 2 2\n"
            b"space directions: (1,0,0) (0,1,0) (0,0,1)\nencoding: raw\n\n" + bytes(7)
        )
        with pytest.raises(SizeMismatchError):
            read_nrrd(raw)

    def test_missing_field(self):
        raw = b"NRRD0004\ntype: uint8\ndimension: 3\nencoding: raw\n\n"
        with pytest.raises(MalformedHeaderError):
            read_nrrd(raw)

    def test_bad_magic(self):
        with pytest.raises(MalformedHeaderError):
            read_nrrd(b"NOTNRRD\n\n")

    def test_non_diagonal_directions(self):
        raw = (
            b"NRRD0004\ntype: uint8\ndimension: 3\nsizes: 1 1 1\n"
            b"space directions: (1,0.5,0) (0,1,0) (0,0,1)\nencoding: raw\n\n" + bytes(1)
        )
        with pytest.raises(UnsupportedFeatureError):
            read_nrrd(raw)

    def test_unsupported_type(self):
        raw = (
            b"NRRD0004\ntype: float\ndimension: 3\nsizes: 1 1 1\n"
            b"space directions: (1,0,0) (0,1,0) (0,0,1)\nencoding: raw\n\n" + bytes(4)
        )
        with pytest.raises(UnsupportedFeatureError):
            read_nrrd(raw)

    def test_gzip_payload(self):
        payload = gzip.compress(bytes([0, 1, 2, 3, 0, 1, 2, 3]))
        raw = (
            b"NRRD0004\ntype: uint8\ndimension: 3\nsizes: 2 2 2\n"
            b"space directions: (1,0,0) (0,1,0) (0,0,1)\nencoding: gzip\n\n" + payload
        )
        v = read_nrrd(raw)
        assert v.grid.data.ravel(order="F").tolist() == [0, 1, 2, 3, 0, 1, 2, 3]

    def test_unknown_fields_and_comments_ignored(self):
        raw = (
            b"NRRD0004\n"
            b"# a comment line\n"
            b"type: uint8\ndimension: 3\nsizes: 1 1 1\n"
            b"space directions: (2.0,0,0) (0,2.0,0) (0,0,2.0)\n"
            b"kinds: domain domain domain\n"
            b"someone:=wrote this\n"
            b"encoding: raw\n\n" + bytes(1)
        )
        v = read_nrrd(raw)
        assert v.grid.spacing == (2.0, 2.0, 2.0)

    def test_mask_kind(self):
        raw = write_nrrd(BinaryMask(VoxelGrid(np.ones((2, 2, 2), dtype=bool), (1, 1, 1))))
        m = read_nrrd(raw, kind="mask")
        assert isinstance(m, BinaryMask)
        assert m.count == 8

    def test_relabel(self):
        raw = (
            b"NRRD0004\ntype: uint8\ndimension: 3\nsizes: 1 1 1\n"
            b"space directions: (1,0,0) (0,1,0) (0,0,1)\nencoding: raw\n\n" + bytes([7])
        )
        with pytest.raises(InvalidLabelError):
            read_nrrd(raw)
        v = read_nrrd(raw, relabel={7: 3})
        assert v.grid.data[0, 0, 0] == 3


class TestWriteNrrd:
    def test_empty_volume_single_byte(self):
        v = label_volume(np.zeros((1, 1, 1)))
        data = write_nrrd(v)
        assert data.endswith(b"\n\n\x00")

    def test_deterministic(self):
        v = label_volume(np.arange(8).reshape(2, 2, 2) % 4, (0.5, 0.5, 3.0))
        assert write_nrrd(v) == write_nrrd(v)

    def test_sizes_line_and_payload_length(self):
        v = label_volume(np.zeros((3, 2, 1)))
        data = write_nrrd(v)
        header, _, payload = data.partition(b"\n\n")
        assert b"sizes: 3 2 1" in header
        assert len(payload) == 6

    def test_payload_is_x_fastest(self):
        arr = np.zeros((2, 2, 1), dtype=np.uint8)
        arr[1, 0, 0] = 3  # second element in x-fastest order
        data = write_nrrd(label_volume(arr))
        payload = data.split(b"\n\n", 1)[1]
        assert list(payload) == [0, 3, 0, 0]

    def test_round_trip_identity(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            dims = tuple(rng.integers(1, 6, 3))
            arr = rng.integers(0, 4, dims).astype(np.uint8)
            spacing = tuple(float(s) for s in rng.uniform(0.3, 3.0, 3))
            v = label_volume(arr, spacing)
            v2 = read_nrrd(write_nrrd(v))
            assert np.array_equal(v2.grid.data, v.grid.data)
            assert v2.grid.spacing == v.grid.spacing
            assert write_nrrd(v2) == write_nrrd(v)


class TestExtractMask:
    def test_all_background(self):
        v = label_volume(np.zeros((3, 3, 3)))
        assert extract_mask(v, 2).count == 0

    def test_single_vessel_voxel(self):
        arr = np.zeros((3, 3, 3))
        arr[1, 2, 0] = 3
        m = extract_mask(label_volume(arr), 3)
        assert m.count == 1 and m.grid.data[1, 2, 0]

    def test_matches_per_voxel_scan(self):
        rng = np.random.default_rng(11)
        arr = rng.integers(0, 4, (4, 4, 4)).astype(np.uint8)
        v = label_volume(arr)
        for label in (1, 2, 3):
            m = extract_mask(v, label)
            for idx in np.ndindex(4, 4, 4):
                assert m.grid.data[idx] == (arr[idx] == label)
        union = extract_mask(v, LIVER_UNION)
        for idx in np.ndindex(4, 4, 4):
            assert union.grid.data[idx] == (arr[idx] in (1, 2, 3))

    def test_invalid_label(self):
        with pytest.raises(InvalidLabelError):
            extract_mask(label_volume(np.zeros((2, 2, 2))), 0)


class TestVoxelVolume:
    @pytest.mark.parametrize(
        "spacing,expected",
        [((1, 1, 1), 1.0), ((1, 2, 2), 4.0), ((0.7, 0.7, 2.5), 1.225)],
    )
    def test_products(self, spacing, expected):
        g = VoxelGrid(np.zeros((1, 1, 1), dtype=np.uint8), spacing)
        assert voxel_volume(g) == pytest.approx(expected, rel=1e-12)
