import numpy as np
import pytest
from scipy import stats

from posegap.assets import Mesh
from posegap.geometry import (EmptyMesh, Pose, control_points_3d,
                              default_intrinsics, project_point)
from posegap.render import (Checkerboard, MissingTexture, NothingVisible,
                            PointLight, RandomTexture, RealTexture,
                            RenderConfig, RenderError, UniformColor,
                            rasterize, sample_lights, sample_pose,
                            sample_surface, shade_lambert)


def facing_triangle(z, extent=1.0):
    """Single camera-facing triangle in the z=const plane."""
    v = np.array([[-extent, -extent, z], [0.0, extent, z], [extent, -extent, z]])
    f = np.array([[[0, 0, 0], [1, 1, 1], [2, 2, 2]]])
    n = np.tile([0.0, 0.0, -1.0], (3, 1))
    uv = np.array([[0, 0], [0.5, 1], [1, 0]], dtype=float)
    return Mesh(vertices=v, normals=n, uvs=uv, faces=f)


class TestRasterize:
    def test_unlit_uniform_gray_exact(self, cube_mesh, k128):
        pose = Pose(np.eye(3), (0, 0, 0.5))
        out = rasterize(cube_mesh, pose, k128,
                        RenderConfig(mode=UniformColor((128, 128, 128))))
        covered = out.color[out.mask]
        assert covered.size > 0
        assert np.all(covered[:, :3] == 128)
        assert np.all(covered[:, 3] == 255)
        assert np.all(out.color[~out.mask] == 0)

    def test_projected_area_scales_inverse_z_squared(self, cube_mesh):
        # Long focal length: the cube fills the frame while its own depth
        # extent stays negligible against the viewing distance.
        from posegap.geometry import CameraIntrinsics
        k = CameraIntrinsics(2500, 2500, 128, 128, 256, 256)
        near = rasterize(cube_mesh, Pose(np.eye(3), (0, 0, 2.0)), k,
                         RenderConfig())
        far = rasterize(cube_mesh, Pose(np.eye(3), (0, 0, 4.0)), k,
                        RenderConfig())
        ratio = near.mask.sum() / far.mask.sum()
        assert ratio == pytest.approx(4.0, rel=0.10)

    def test_behind_camera(self, cube_mesh, k128):
        with pytest.raises(NothingVisible):
            rasterize(cube_mesh, Pose(np.eye(3), (0, 0, -1.0)), k128,
                      RenderConfig())

    def test_empty_mesh(self, k128):
        mesh = Mesh(vertices=np.zeros((0, 3)), normals=np.zeros((0, 3)),
                    uvs=np.zeros((0, 2)), faces=np.zeros((0, 3, 3), int))
        with pytest.raises(EmptyMesh):
            rasterize(mesh, Pose(np.eye(3), (0, 0, 1)), k128, RenderConfig())

    def test_deterministic(self, cube_mesh, k128):
        pose = Pose(np.eye(3), (0.02, -0.03, 0.7))
        cfg = RenderConfig(mode=Checkerboard(), seed=5)
        a = rasterize(cube_mesh, pose, k128, cfg)
        b = rasterize(cube_mesh, pose, k128, cfg)
        assert np.array_equal(a.color, b.color)
        assert np.array_equal(a.depth, b.depth)

    def test_mask_depth_coherence_fuzz(self, cube_mesh, k128):
        for seed in range(25):
            pose = sample_pose(seed, (0.4, 1.5), k=k128)
            out = rasterize(cube_mesh, pose, k128, RenderConfig(seed=seed))
            finite = np.isfinite(out.depth)
            assert np.array_equal(out.mask, finite)

    def test_zbuffer_occlusion(self, k128):
        # Two overlapping camera-facing triangles; the near one must win
        # on every overlap pixel.
        near_tri = facing_triangle(1.0, extent=0.4)
        far_tri = facing_triangle(2.0, extent=1.0)
        merged = Mesh(
            vertices=np.vstack([near_tri.vertices, far_tri.vertices]),
            normals=np.vstack([near_tri.normals, far_tri.normals]),
            uvs=np.vstack([near_tri.uvs, far_tri.uvs]),
            faces=np.vstack([near_tri.faces, far_tri.faces + 3]),
        )
        out = rasterize(merged, Pose.identity(), k128, RenderConfig())
        near_only = rasterize(near_tri, Pose.identity(), k128, RenderConfig())
        overlap = near_only.mask
        assert overlap.any()
        assert np.array_equal(out.depth[overlap], near_only.depth[overlap])

    def test_checkerboard_is_pose_attached(self, cube_mesh, k128):
        pose = Pose(np.eye(3), (0, 0, 0.6))
        a = rasterize(cube_mesh, pose, k128,
                      RenderConfig(mode=Checkerboard(), seed=1))
        b = rasterize(cube_mesh, pose, k128,
                      RenderConfig(mode=Checkerboard(), seed=999))
        assert np.array_equal(a.color, b.color)

    def test_uniform_is_seed_independent(self, cube_mesh, k128):
        pose = Pose(np.eye(3), (0, 0, 0.6))
        a = rasterize(cube_mesh, pose, k128, RenderConfig(seed=1))
        b = rasterize(cube_mesh, pose, k128, RenderConfig(seed=2))
        assert np.array_equal(a.color, b.color)

    def test_real_texture_requires_texture(self, cube_mesh, k128):
        with pytest.raises(MissingTexture):
            rasterize(cube_mesh, Pose(np.eye(3), (0, 0, 0.6)), k128,
                      RenderConfig(mode=RealTexture()))

    def test_too_small_image(self, cube_mesh):
        k = default_intrinsics(8, 8)
        with pytest.raises(RenderError):
            rasterize(cube_mesh, Pose(np.eye(3), (0, 0, 0.6)), k, RenderConfig())


class TestShadeLambert:
    def test_no_lights_full_ambient(self):
        out = shade_lambert((10, 200, 45), (0, 0, 1), (0, 0, -1), (), 1.0)
        assert tuple(out) == (10, 200, 45)

    def test_light_on_normal_axis(self):
        light = PointLight(position=(0, 0, 0), intensity=1.0)
        out = shade_lambert((100, 100, 100), (0, 0, 1), (0, 0, -1),
                            (light,), 0.0)
        assert tuple(out) == (100, 100, 100)

    def test_light_behind_surface_black(self):
        light = PointLight(position=(0, 0, 2), intensity=1.0)
        out = shade_lambert((100, 100, 100), (0, 0, 1), (0, 0, -1),
                            (light,), 0.0)
        assert tuple(out) == (0, 0, 0)

    def test_zero_distance_clamps(self):
        light = PointLight(position=(0, 0, 1), intensity=1e-6)
        out = shade_lambert((200, 200, 200), (0, 0, 1), (0, 0, -1),
                            (light,), 0.0)
        assert np.all(out <= 200)


class TestSampleSurface:
    def test_checkerboard_parity(self):
        mode = Checkerboard(cells_per_uv=8, color_a=(0, 0, 0),
                            color_b=(255, 255, 255))
        assert tuple(sample_surface(mode, (0.05, 0.05))) == (0, 0, 0)
        assert tuple(sample_surface(mode, (0.05, 0.20))) == (255, 255, 255)

    def test_uniform(self):
        mode = UniformColor((128, 128, 128))
        for uv in [(0, 0), (0.3, 0.9), (0.99, 0.01)]:
            assert tuple(sample_surface(mode, uv)) == (128, 128, 128)

    def test_real_texture_texel_center(self):
        tex = np.array([[[255, 0, 0], [0, 255, 0]],
                        [[0, 0, 255], [255, 255, 0]]], dtype=np.uint8)
        # texel centers of a 2x2 texture are at uv (0.25/0.75 combinations)
        assert tuple(sample_surface(RealTexture(), (0.25, 0.25), texture=tex)) == (255, 0, 0)
        assert tuple(sample_surface(RealTexture(), (0.75, 0.25), texture=tex)) == (0, 255, 0)
        assert tuple(sample_surface(RealTexture(), (0.25, 0.75), texture=tex)) == (0, 0, 255)

    def test_random_texture_picks_by_seed(self):
        pool = tuple(np.full((2, 2, 3), v, np.uint8) for v in (10, 90, 200))
        mode = RandomTexture(pool)
        seen = {tuple(sample_surface(mode, (0.5, 0.5), seed=s))
                for s in range(30)}
        assert len(seen) == 3

    def test_missing_texture(self):
        with pytest.raises(MissingTexture):
            sample_surface(RealTexture(), (0.5, 0.5))


class TestSampleLights:
    def test_forced_single_light(self):
        lights = sample_lights(0, count_range=(1, 1), radius_range=(2.0, 2.0),
                               object_center=(1.0, 0.0, 3.0))
        assert len(lights) == 1
        d = np.linalg.norm(lights[0].position - np.array([1.0, 0.0, 3.0]))
        assert d == pytest.approx(2.0, abs=1e-6)

    def test_deterministic(self):
        a = sample_lights(42, (2, 5), (0.5, 2.0))
        b = sample_lights(42, (2, 5), (0.5, 2.0))
        assert len(a) == len(b)
        for la, lb in zip(a, b):
            assert np.array_equal(la.position, lb.position)
            assert la.intensity == lb.intensity

    def test_count_histogram_uniform(self):
        counts = [len(sample_lights(s, (2, 5), (1.0, 1.0))) for s in range(1000)]
        observed = [counts.count(c) for c in (2, 3, 4, 5)]
        _, p = stats.chisquare(observed)
        assert p > 0.01

    def test_invalid_ranges(self):
        with pytest.raises(RenderError):
            sample_lights(0, count_range=(0, 2))
        with pytest.raises(RenderError):
            sample_lights(0, radius_range=(0.0, 1.0))


class TestSamplePose:
    def test_degenerate_ranges_unique_pose(self):
        pose = sample_pose(0, distance_range=(2.0, 2.0),
                           azimuth_range=(0.0, 0.0),
                           elevation_range=(0.0, 0.0),
                           in_plane_range=(0.0, 0.0))
        assert np.allclose(pose.rotation, np.eye(3))
        assert np.allclose(pose.translation, (0, 0, 2.0))

    def test_deterministic(self, k256):
        a = sample_pose(123, (0.5, 1.5), k=k256)
        b = sample_pose(123, (0.5, 1.5), k=k256)
        assert np.array_equal(a.rotation, b.rotation)
        assert np.array_equal(a.translation, b.translation)

    def test_projected_center_in_central_box(self, k256):
        for seed in range(10_000):
            pose = sample_pose(seed, (0.4, 2.0), k=k256)
            p = project_point((0, 0, 0), pose, k256)
            assert 0.1 * k256.width <= p[0] <= 0.9 * k256.width
            assert 0.1 * k256.height <= p[1] <= 0.9 * k256.height

    def test_respects_object_center(self, cube_mesh, k256):
        center = control_points_3d(cube_mesh).centroid
        pose = sample_pose(7, (0.5, 1.0), k=k256, object_center=center)
        p = project_point(center, pose, k256)
        assert 0.1 * k256.width <= p[0] <= 0.9 * k256.width
