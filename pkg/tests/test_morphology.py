import numpy as np
import pytest

import oracles
from conftest import mask
from livres.morphology import connected_components, dilate_by_radii, edt, erode
from livres.volume import VoxelGrid


class TestErode:
    def test_single_voxel_vanishes(self):
        data = np.zeros((3, 3, 3), dtype=bool)
        data[1, 1, 1] = True
        assert erode(mask(data)).count == 0

    def test_cube_peels_one_layer(self):
        data = np.zeros((7, 7, 7), dtype=bool)
        data[1:6, 1:6, 1:6] = True
        out = erode(mask(data))
        expected = np.zeros((7, 7, 7), dtype=bool)
        expected[2:5, 2:5, 2:5] = True
        assert np.array_equal(out.grid.data, expected)

    def test_matches_neighbor_scan_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            data = rng.random((6, 6, 6)) < 0.6
            out = erode(mask(data))
            assert np.array_equal(out.grid.data, oracles.erode_neighbor_scan(data))

    def test_subset_and_empty(self):
        rng = np.random.default_rng(3)
        data = rng.random((5, 5, 5)) < 0.7
        out = erode(mask(data))
        assert not (out.grid.data & ~data).any()
        assert erode(mask(np.zeros((4, 4, 4), dtype=bool))).count == 0

    def test_thin_axis_erodes_away(self):
        assert erode(mask(np.ones((1, 5, 5), dtype=bool))).count == 0


class TestEdt:
    def test_single_voxel(self):
        data = np.zeros((3, 3, 3), dtype=bool)
        data[1, 1, 1] = True
        d = edt(mask(data))
        assert d.values[1, 1, 1] == pytest.approx(1.0)
        assert d.values[0, 0, 0] == 0.0

    def test_row_of_five_center_is_three(self):
        # 7-long x-line with 5 foreground voxels; the grid is 1 voxel thick in
        # y/z so the nearest background of the center sits 3 steps along x
        data = np.zeros((7, 1, 1), dtype=bool)
        data[1:6, 0, 0] = True
        d = edt(mask(data))
        expected = oracles.edt_all_pairs(data, (1, 1, 1))
        assert expected[3, 0, 0] == 3.0
        assert np.allclose(d.values, expected)

    def test_anisotropic_background_along_z(self):
        data = np.ones((3, 3, 3), dtype=bool)
        data[1, 1, 2] = False  # only background: +z neighbor of the center
        d = edt(mask(data, (1, 1, 2)))
        assert d.values[1, 1, 1] == pytest.approx(2.0)

    def test_positive_exactly_on_foreground(self):
        rng = np.random.default_rng(4)
        data = rng.random((6, 6, 6)) < 0.5
        d = edt(mask(data))
        assert ((d.values > 0) == data).all()

    def test_lipschitz_per_axis(self):
        rng = np.random.default_rng(5)
        spacing = (0.8, 1.1, 2.0)
        data = rng.random((6, 6, 6)) < 0.5
        vals = edt(mask(data, spacing)).values
        for ax, s in enumerate(spacing):
            diff = np.abs(np.diff(vals, axis=ax))
            assert (diff <= s + 1e-9).all()

    def test_all_foreground_is_infinite(self):
        d = edt(mask(np.ones((2, 2, 2), dtype=bool)))
        assert np.isinf(d.values).all()

    def test_matches_brute_force_random(self):
        rng = np.random.default_rng(6)
        for _ in range(25):
            data = rng.random((5, 5, 5)) < rng.uniform(0.2, 0.8)
            spacing = tuple(rng.uniform(0.3, 3.0, 3))
            got = edt(mask(data, spacing)).values
            want = oracles.edt_all_pairs(data, spacing)
            assert np.allclose(got, want, rtol=1e-9, atol=0)


class TestConnectedComponents:
    def test_two_cubes(self):
        data = np.zeros((8, 4, 4), dtype=bool)
        data[0:2, 0:2, 0:2] = True
        data[5:7, 1:3, 1:3] = True
        lab = connected_components(mask(data), 26)
        assert lab.count == 2
        assert lab.sizes.tolist() == [8, 8]

    def test_corner_touch_connectivity(self):
        data = np.zeros((2, 2, 2), dtype=bool)
        data[0, 0, 0] = True
        data[1, 1, 1] = True
        assert connected_components(mask(data), 26).count == 1
        assert connected_components(mask(data), 6).count == 2

    def test_matches_union_find_oracle(self):
        rng = np.random.default_rng(7)
        for conn in (6, 26):
            for _ in range(10):
                data = rng.random((4, 4, 4)) < 0.5
                lab = connected_components(mask(data), conn)
                want = set(oracles.components_union_find(data, conn))
                got = oracles.labeling_partition(lab.labels.data)
                assert got == want

    def test_deterministic_scan_order_ids(self):
        data = np.zeros((5, 1, 1), dtype=bool)
        data[0] = data[2] = data[4] = True
        lab = connected_components(mask(data), 6)
        assert lab.labels.data[0, 0, 0] == 1
        assert lab.labels.data[2, 0, 0] == 2
        assert lab.labels.data[4, 0, 0] == 3

    def test_axis_permutation_invariance(self):
        rng = np.random.default_rng(8)
        data = rng.random((4, 5, 6)) < 0.4
        base = set(map(frozenset, (
            {tuple(v) for v in np.argwhere(connected_components(mask(data), 26).labels.data == i + 1)}
            for i in range(connected_components(mask(data), 26).count)
        )))
        for perm in ((1, 0, 2), (2, 1, 0), (1, 2, 0)):
            pdata = np.transpose(data, perm)
            lab = connected_components(mask(pdata), 26)
            inv = np.argsort(perm)
            back = set()
            for i in range(lab.count):
                comp = {tuple(np.array(v)[inv]) for v in np.argwhere(lab.labels.data == i + 1)}
                back.add(frozenset(comp))
            assert back == base

    def test_centroids_physical(self):
        data = np.zeros((4, 1, 1), dtype=bool)
        data[0:2] = True
        lab = connected_components(mask(data, (2.0, 1.0, 1.0)), 6)
        assert lab.centroids[0] == pytest.approx([1.0, 0.0, 0.0])


class TestDilateByRadii:
    def test_radius_zero_single_voxel(self):
        g = VoxelGrid(np.zeros((5, 5, 5), dtype=np.uint8), (1, 1, 1))
        out = dilate_by_radii([((2, 2, 2), 0.0)], g)
        assert out.count == 1 and out.grid.data[2, 2, 2]

    def test_radius_two_is_33_voxel_ball(self):
        g = VoxelGrid(np.zeros((9, 9, 9), dtype=np.uint8), (1, 1, 1))
        out = dilate_by_radii([((4, 4, 4), 2.0)], g)
        want = oracles.ball_voxels((4, 4, 4), 2.0, (9, 9, 9), (1, 1, 1))
        assert len(want) == 33
        assert {tuple(v) for v in np.argwhere(out.grid.data)} == want

    def test_far_apart_points_disjoint_union(self):
        g = VoxelGrid(np.zeros((20, 5, 5), dtype=np.uint8), (1, 1, 1))
        out = dilate_by_radii([((2, 2, 2), 1.0), ((16, 2, 2), 1.0)], g)
        a = dilate_by_radii([((2, 2, 2), 1.0)], g)
        b = dilate_by_radii([((16, 2, 2), 1.0)], g)
        assert not (a.grid.data & b.grid.data).any()
        assert np.array_equal(out.grid.data, a.grid.data | b.grid.data)

    def test_round_up_to_spacing_multiple(self):
        g = VoxelGrid(np.zeros((9, 9, 9), dtype=np.uint8), (1, 1, 1))
        # 1.2 rounds up to 2.0, same ball as radius 2
        out = dilate_by_radii([((4, 4, 4), 1.2)], g)
        assert out.count == 33

    def test_matches_oracle_anisotropic(self):
        rng = np.random.default_rng(9)
        for _ in range(8):
            spacing = tuple(rng.uniform(0.4, 2.0, 3))
            g = VoxelGrid(np.zeros((7, 7, 7), dtype=np.uint8), spacing)
            center = tuple(int(i) for i in rng.integers(1, 6, 3))
            r = float(rng.uniform(0, 3))
            out = dilate_by_radii([(center, r)], g)
            want = oracles.ball_voxels(center, r, (7, 7, 7), spacing)
            assert {tuple(v) for v in np.argwhere(out.grid.data)} == want

    def test_monotone_in_radius(self):
        g = VoxelGrid(np.zeros((9, 9, 9), dtype=np.uint8), (1, 0.7, 1.3))
        small = dilate_by_radii([((4, 4, 4), 1.5)], g)
        large = dilate_by_radii([((4, 4, 4), 2.5)], g)
        assert not (small.grid.data & ~large.grid.data).any()

    def test_out_of_bounds_point(self):
        g = VoxelGrid(np.zeros((3, 3, 3), dtype=np.uint8), (1, 1, 1))
        with pytest.raises(IndexError):
            dilate_by_radii([((3, 0, 0), 1.0)], g)
