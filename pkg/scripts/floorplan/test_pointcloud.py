#!/usr/bin/env python3
"""
Unit tests for pointcloud.py and domain.py: preprocessing, augmentation,
domain fitting, density images and the PLY / XYZ readers.
"""

import math
import sys
import tempfile
import unittest
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

import model
import pointcloud
from domain import FloorplanDomain
from fixtures import row_plan, single_wall_plan
from pointcloud import CloudParseError, PointCloud


# ── Helpers ──────────────────────────────────────────────────

def _make_cloud(n: int, seed: int = 0, lo=(0, 0, 0), hi=(1, 1, 1)) -> PointCloud:
    rng = np.random.default_rng(seed)
    return PointCloud(rng.uniform(lo, hi, size=(n, 3)))


def _domain_oracle(xs: list, ys: list, percent: float = 2.5, margin: float = 0.05, res: int = 256):
    """Scalar re-derivation of compute_domain: nearest-rank percentiles,
    margin expansion, isotropic scale, centred rectangle."""
    lows, highs = [], []
    for vals in (sorted(xs), sorted(ys)):
        n = len(vals)
        lo = vals[max(math.ceil(percent * n / 100) - 1, 0)]
        hi = vals[max(math.ceil((100 - percent) * n / 100) - 1, 0)]
        lows.append(lo - margin * (hi - lo))
        highs.append(hi + margin * (hi - lo))
    side = max(highs[0] - lows[0], highs[1] - lows[1])
    scale = side / res
    return ((lows[0] + highs[0]) / 2 - res / 2 * scale,
            (lows[1] + highs[1]) / 2 - res / 2 * scale,
            scale)


def _write(directory: str, name: str, content) -> Path:
    path = Path(directory) / name
    if isinstance(content, bytes):
        path.write_bytes(content)
    else:
        path.write_text(content, encoding='ascii')
    return path


PLY_HEADER = ("ply\nformat ascii 1.0\nelement vertex {n}\n"
              "property float x\nproperty float y\nproperty float z\nend_header\n")


# ── Preprocessing ────────────────────────────────────────────

class TestNormalize(unittest.TestCase):

    def test_single_point_goes_to_origin(self):
        out = pointcloud.normalize(PointCloud([[5, 5, 5]]))
        np.testing.assert_allclose(out.positions, [[0, 0, 0]])

    def test_two_points_are_centred(self):
        out = pointcloud.normalize(PointCloud([[0, 0, 0], [2, 0, 0]]))
        np.testing.assert_allclose(out.positions, [[-1, 0, 0], [1, 0, 0]])

    def test_translation_keeps_distances(self):
        cloud = _make_cloud(50, seed=3, lo=(-4, 2, 0), hi=(9, 7, 3))
        out = pointcloud.normalize(cloud)
        before = np.linalg.norm(cloud.positions[:, None] - cloud.positions[None], axis=2)
        after = np.linalg.norm(out.positions[:, None] - out.positions[None], axis=2)
        np.testing.assert_allclose(after, before, atol=1e-12)
        self.assertLess(np.abs(out.positions.mean(axis=0)).max(), 1e-9)

    def test_empty_cloud_rejected(self):
        with self.assertRaises(ValueError):
            pointcloud.normalize(pointcloud.empty_cloud())


class TestSubsample(unittest.TestCase):

    def test_small_cloud_unchanged(self):
        cloud = _make_cloud(10)
        self.assertIs(pointcloud.subsample(cloud, 50_000, seed=1), cloud)

    def test_deterministic_per_seed(self):
        cloud = _make_cloud(100)
        a = pointcloud.subsample(cloud, 10, seed=7)
        b = pointcloud.subsample(cloud, 10, seed=7)
        self.assertEqual(len(a), 10)
        np.testing.assert_array_equal(a.positions, b.positions)

    def test_default_subsample_size(self):
        out = pointcloud.subsample(_make_cloud(100_000), 50_000, seed=0)
        self.assertEqual(len(out), 50_000)
        self.assertEqual(len(np.unique(out.positions, axis=0)), 50_000)

    def test_zero_rejected(self):
        with self.assertRaises(ValueError):
            pointcloud.subsample(_make_cloud(5), 0, seed=0)


class TestAugment(unittest.TestCase):

    def setUp(self):
        self.plan = row_plan(["bedroom", "kitchen"], domain=FloorplanDomain(-2.0, -3.0, 0.05))
        corner = self.plan.corners[2]
        wx, wy = self.plan.domain.grid_to_world((corner.x, corner.y))
        self.cloud = PointCloud([[1.0, 0.0, 0.7], [wx, wy, 1.1]])

    def test_identity_setting(self):
        cloud, plan = pointcloud.augment(self.cloud, self.plan, seed=4,
                                         scale_range=(1.0, 1.0), rotations=(0,))
        np.testing.assert_allclose(cloud.positions, self.cloud.positions)
        self.assertEqual(plan, self.plan)

    def test_quarter_turn(self):
        cloud, plan = pointcloud.augment(self.cloud, self.plan, seed=4,
                                         scale_range=(1.0, 1.0), rotations=(90,))
        np.testing.assert_allclose(cloud.positions[0], [0.0, 1.0, 0.7], atol=1e-12)
        self.assertEqual(model.validate(plan), [])

    def test_grid_edge_stays_inside_window(self):
        plan = single_wall_plan((100, 255.5), (200, 255.5), domain=FloorplanDomain(0.0, 0.0, 0.05))
        self.assertEqual(model.validate(plan), [])
        for angle in (90, 180, 270):
            _, moved = pointcloud.augment(self.cloud, plan, seed=0, scale_range=(1.0, 1.0), rotations=(angle,))
            self.assertEqual(model.validate(moved), [], f"rotation {angle}")
        _, moved = pointcloud.augment(self.cloud, plan, seed=0, scale_range=(1.0, 1.0), rotations=(90,))
        self.assertEqual(sorted((c.x, c.y) for c in moved.corners), [(0, 100), (0, 200)])

    def test_cloud_and_plan_move_together(self):
        for seed in range(8):
            cloud, plan = pointcloud.augment(self.cloud, self.plan, seed=seed)
            grid = plan.domain.world_to_grid(cloud.positions[1, :2])
            corner = plan.corners[2]
            np.testing.assert_allclose(grid, [corner.x, corner.y], atol=1e-9)
            self.assertEqual(model.validate(plan), [])

    def test_world_distances_scale_by_factor(self):
        a, b = self.plan.corners[0], self.plan.corners[5]
        before = np.linalg.norm(self.plan.domain.grid_to_world((a.x, a.y))
                                - self.plan.domain.grid_to_world((b.x, b.y)))
        for seed in range(5):
            _, plan = pointcloud.augment(self.cloud, self.plan, seed=seed)
            s = plan.domain.scale / self.plan.domain.scale
            self.assertTrue(0.5 <= s <= 1.5)
            a2, b2 = plan.corners[0], plan.corners[5]
            after = np.linalg.norm(plan.domain.grid_to_world((a2.x, a2.y))
                                   - plan.domain.grid_to_world((b2.x, b2.y)))
            self.assertAlmostEqual(after, s * before, places=9)

    def test_plan_without_domain_rejected(self):
        with self.assertRaises(ValueError):
            pointcloud.augment(self.cloud, row_plan(["bedroom"]), seed=0)


# ── Domain & density ─────────────────────────────────────────

class TestComputeDomain(unittest.TestCase):

    def test_uniform_rectangle(self):
        cloud = _make_cloud(1000, seed=11, lo=(0, 0, 0), hi=(10, 5, 2))
        d = pointcloud.compute_domain(cloud)
        ox, oy, scale = _domain_oracle(cloud.positions[:, 0].tolist(), cloud.positions[:, 1].tolist())
        np.testing.assert_array_max_ulp(np.array([d.scale, d.origin_x, d.origin_y]),
                                        np.array([scale, ox, oy]), maxulp=1)
        # 95% of 10 m plus 5% on each side
        self.assertLess(abs(d.scale * 256 - 10.45), 0.3)
        ys = np.sort(cloud.positions[:, 1])
        centre = (ys[24] + ys[974]) / 2
        self.assertAlmostEqual(d.origin_y + 128 * d.scale, centre, places=9)

    def test_random_clouds_match_oracle(self):
        for seed in range(20):
            rng = np.random.default_rng(100 + seed)
            n = int(rng.integers(2, 400))
            cloud = PointCloud(rng.normal(0, rng.uniform(0.5, 20), size=(n, 3)))
            d = pointcloud.compute_domain(cloud)
            ox, oy, scale = _domain_oracle(cloud.positions[:, 0].tolist(), cloud.positions[:, 1].tolist())
            np.testing.assert_array_max_ulp(np.array([d.scale, d.origin_x, d.origin_y]),
                                            np.array([scale, ox, oy]), maxulp=1)

    def test_outlier_is_ignored(self):
        rng = np.random.default_rng(5)
        pts = rng.uniform(0, 1, size=(40, 3))
        pts[17, 0] = 1000.0
        d = pointcloud.compute_domain(PointCloud(pts))
        self.assertLess(d.scale * 256, 2.0)

    def test_square_extent_fills_image(self):
        cloud = PointCloud([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]])
        d = pointcloud.compute_domain(cloud)
        self.assertAlmostEqual(d.scale, 1.1 / 256)
        self.assertAlmostEqual(d.origin_x, -0.05)
        self.assertAlmostEqual(d.origin_y, -0.05)

    def test_degenerate_clouds(self):
        with self.assertRaises(ValueError):
            pointcloud.compute_domain(PointCloud([[1, 1, 0]]))
        with self.assertRaises(ValueError):
            pointcloud.compute_domain(PointCloud([[1, 1, 0], [1, 1, 5], [1, 1, 2]]))

    def test_uniform_cloud_scale(self):
        cloud = _make_cloud(500, seed=9, lo=(-3, 0, 0), hi=(4, 2, 3))
        bigger = PointCloud(cloud.positions * 2.0)
        d1, d2 = pointcloud.compute_domain(cloud), pointcloud.compute_domain(bigger)
        self.assertEqual(d2.scale, 2.0 * d1.scale)
        np.testing.assert_array_equal(pointcloud.density_image(cloud, d1),
                                      pointcloud.density_image(bigger, d2))


class TestDensityImage(unittest.TestCase):

    def setUp(self):
        self.domain = FloorplanDomain(0.0, 0.0, 0.1)

    def test_empty_cloud(self):
        img = pointcloud.density_image(pointcloud.empty_cloud(), self.domain)
        self.assertEqual(img.shape, (256, 256))
        self.assertEqual(img.sum(), 0)

    def test_pixel_centre(self):
        x, y = self.domain.grid_to_world((128, 128))
        img = pointcloud.density_image(PointCloud([[x, y, 0.3]]), self.domain)
        self.assertEqual(img[128, 128], 1)
        self.assertEqual(img.sum(), 1)

    def test_brute_force_binning(self):
        cloud = _make_cloud(2000, seed=2, lo=(-1, -1, 0), hi=(27, 27, 1))
        img = pointcloud.density_image(cloud, self.domain)
        oracle = np.zeros((256, 256))
        for x, y, _ in cloud.positions:
            col, row = math.floor(x / 0.1), math.floor(y / 0.1)
            if 0 <= col < 256 and 0 <= row < 256:
                oracle[row, col] += 1
        np.testing.assert_array_equal(img, oracle)

    def test_boundary_belongs_to_lower_cell(self):
        img = pointcloud.density_image(PointCloud([[0.0, 0.0, 0.0]]), self.domain)
        self.assertEqual(img[0, 0], 1)

    def test_permutation_invariant(self):
        cloud = _make_cloud(300, seed=8, lo=(0, 0, 0), hi=(25, 25, 1))
        shuffled = cloud.take(np.random.default_rng(1).permutation(len(cloud)))
        np.testing.assert_array_equal(pointcloud.density_image(cloud, self.domain),
                                      pointcloud.density_image(shuffled, self.domain))


# ── File IO ──────────────────────────────────────────────────

class TestReaders(unittest.TestCase):

    def test_ascii_round_trip_with_colors(self):
        cloud = PointCloud([[0.1, 0.2, 0.3], [-4.5, 1e-7, 2.0]], colors=[[255, 0, 10], [1, 2, 3]])
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "scan.ply"
            pointcloud.write_ply(path, cloud)
            back = pointcloud.read_cloud(path)
        np.testing.assert_array_equal(back.positions, cloud.positions)
        np.testing.assert_array_equal(back.colors, cloud.colors)

    def test_binary_little_endian(self):
        header = ("ply\nformat binary_little_endian 1.0\nelement vertex 2\n"
                  "property float x\nproperty float y\nproperty float z\nend_header\n").encode('ascii')
        body = np.array([[1, 2, 3], [4, 5, 6]], dtype='<f4').tobytes()
        with tempfile.TemporaryDirectory() as tmp:
            cloud = pointcloud.read_cloud(_write(tmp, "b.ply", header + body))
        np.testing.assert_array_equal(cloud.positions, [[1, 2, 3], [4, 5, 6]])
        self.assertIsNone(cloud.colors)

    def test_bad_value_names_line(self):
        text = PLY_HEADER.format(n=2) + "1 2 3\n1 2 abc\n"
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(CloudParseError) as ctx:
                pointcloud.read_cloud(_write(tmp, "bad.ply", text))
        self.assertEqual(ctx.exception.line, 9)
        self.assertIn(":9:", str(ctx.exception))

    def test_truncated_body(self):
        text = PLY_HEADER.format(n=3) + "1 2 3\n4 5 6\n"
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(CloudParseError) as ctx:
                pointcloud.read_cloud(_write(tmp, "short.ply", text))
        self.assertIn("unexpected end of file", str(ctx.exception))

    def test_missing_end_header(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(CloudParseError):
                pointcloud.read_ply(_write(tmp, "h.ply", "ply\nformat ascii 1.0\nelement vertex 1\n"))

    def test_empty_vertex_element(self):
        with tempfile.TemporaryDirectory() as tmp:
            cloud = pointcloud.read_cloud(_write(tmp, "e.ply", PLY_HEADER.format(n=0)))
        self.assertEqual(len(cloud), 0)

    def test_xyz_with_comments_and_colors(self):
        text = "# exported\n0 0 0 255 255 255\n\n1.5 2 3 10 20 30  # last\n"
        with tempfile.TemporaryDirectory() as tmp:
            cloud = pointcloud.read_cloud(_write(tmp, "s.xyz", text))
        np.testing.assert_array_equal(cloud.positions, [[0, 0, 0], [1.5, 2, 3]])
        np.testing.assert_array_equal(cloud.colors, [[255, 255, 255], [10, 20, 30]])

    def test_xyz_bad_line_number(self):
        text = "# header\n1 2 3\n4 5 x\n"
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(CloudParseError) as ctx:
                pointcloud.read_cloud(_write(tmp, "s.xyz", text))
        self.assertEqual(ctx.exception.line, 3)

    def test_xyz_ragged_rows(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(CloudParseError) as ctx:
                pointcloud.read_cloud(_write(tmp, "r.xyz", "1 2 3\n4 5 6 7\n"))
        self.assertEqual(ctx.exception.line, 2)


if __name__ == "__main__":
    unittest.main(verbosity=2)
