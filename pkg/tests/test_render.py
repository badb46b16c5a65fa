"""Renderer tests: analytic planes, inverse-square falloff, tone curve."""

import numpy as np
import pytest

from synthcolon.bvh import build_bvh
from synthcolon.levels import level_config
from synthcolon.mesh import TriMesh
from synthcolon.render import (DepthMap, RenderSettings, RgbFrame, auto_exposure,
                               render_frame, render_linear, shade, tone_map)
from synthcolon.scene import (CameraPose, LightSource, assign_materials,
                              intrinsics_for)


def _plane_mesh(z, half=200.0, albedo_material=0):
    """Two-triangle quad at depth z facing the origin (-z normals)."""
    v = np.array([[-half, -half, z], [half, -half, z],
                  [half, half, z], [-half, half, z]], dtype=np.float64)
    t = np.array([[0, 2, 1], [0, 3, 2]], dtype=np.int32)
    n = np.tile([0.0, 0.0, -1.0], (4, 1))
    m = np.full(4, albedo_material, dtype=np.int32)
    return TriMesh(v, t, n, m)


def _frontal_setup(width=64, height=48, level=1):
    pose = CameraPose(np.zeros(3), np.array([0.0, 0.0, 1.0]),
                      np.array([0.0, 1.0, 0.0]))
    intr = intrinsics_for(width, height)
    light = LightSource(pose.position)
    table = assign_materials(_plane_mesh(5.0), level_config(level),
                             frame_index=0, seed=0)
    return pose, intr, light, table


class TestShade:
    def test_unit_case_diffuse_only(self):
        # albedo 1, frontal normal, r = 1, no specular -> radiance 1
        out = shade(np.ones((1, 3)), np.array([[0.0, 0.0, -1.0]]),
                    np.array([[0.0, 0.0, -1.0]]), np.array([1.0]),
                    (0.0, 60.0), LightSource(np.zeros(3)))
        assert np.allclose(out, 1.0)

    def test_inverse_square_in_distance(self):
        args = (np.ones((1, 3)), np.array([[0.0, 0.0, -1.0]]),
                np.array([[0.0, 0.0, -1.0]]))
        near = shade(*args, np.array([2.0]), (0.0, 60.0), LightSource(np.zeros(3)))
        far = shade(*args, np.array([4.0]), (0.0, 60.0), LightSource(np.zeros(3)))
        assert np.allclose(near / far, 4.0)

    def test_grazing_incidence_is_dark(self):
        out = shade(np.ones((1, 3)), np.array([[1.0, 0.0, 0.0]]),
                    np.array([[0.0, 0.0, -1.0]]), np.array([3.0]),
                    (0.35, 60.0), LightSource(np.zeros(3)))
        assert np.allclose(out, 0.0)

    def test_specular_adds_on_top_of_diffuse(self):
        args = (np.full((1, 3), 0.5), np.array([[0.0, 0.0, -1.0]]),
                np.array([[0.0, 0.0, -1.0]]), np.array([1.0]))
        matte = shade(*args, (0.0, 60.0), LightSource(np.zeros(3)))
        shiny = shade(*args, (0.35, 60.0), LightSource(np.zeros(3)))
        # frontal: cos = 1 so the lobe contributes exactly k_s, channel-flat
        assert np.allclose(shiny - matte, 0.35)

    def test_nonpositive_distance_rejected(self):
        with pytest.raises(ValueError):
            shade(np.ones((1, 3)), np.array([[0.0, 0.0, -1.0]]),
                  np.array([[0.0, 0.0, -1.0]]), np.array([0.0]),
                  (0.0, 60.0), LightSource(np.zeros(3)))


class TestToneMap:
    def test_endpoints(self):
        out = tone_map(np.array([[[0.0, 1.0, 2.0]]]), exposure=1.0)
        assert out.dtype == np.uint8
        assert list(out[0, 0]) == [0, 255, 255]

    def test_mid_grey_reference_value(self):
        out = tone_map(np.array([[[0.5, 0.5, 0.5]]]), exposure=1.0)
        assert list(out[0, 0]) == [188, 188, 188]

    def test_linear_segment(self):
        # below the sRGB knee the transfer is 12.92 * c
        c = 0.002
        out = tone_map(np.array([[[c, c, c]]]), exposure=1.0)
        assert out[0, 0, 0] == int(round(12.92 * c * 255.0))

    def test_exposure_scales_before_clamp(self):
        out = tone_map(np.array([[[0.25, 0.25, 0.25]]]), exposure=2.0)
        assert list(out[0, 0]) == [188, 188, 188]

    def test_auto_exposure_hits_target(self):
        rng = np.random.default_rng(0)
        radiance = rng.uniform(0.0, 3.0, size=(20, 20, 3))
        e = auto_exposure(radiance)
        lum = (0.2126 * radiance[..., 0] + 0.7152 * radiance[..., 1]
               + 0.0722 * radiance[..., 2])
        assert np.isclose(e * np.percentile(lum, 90.0), 0.85)


class TestRenderFrame:
    def test_frontal_plane_depth_exact(self):
        pose, intr, light, table = _frontal_setup()
        accel = build_bvh(_plane_mesh(5.0))
        _, depth = render_linear(accel, _plane_mesh(5.0), table, pose, intr, light)
        assert depth.values.shape == (48, 64)
        assert np.allclose(depth.values, 5.0, atol=1e-9)

    def test_miss_is_black_at_max_depth(self):
        pose, intr, light, table = _frontal_setup()
        # small quad: center ray hits, corner rays miss
        mesh = _plane_mesh(5.0, half=0.2)
        radiance, depth = render_linear(build_bvh(mesh), mesh, table, pose,
                                        intr, light)
        assert depth.values[0, 0] == 25.0
        assert np.all(radiance[0, 0] == 0.0)
        assert depth.values[24, 32] == pytest.approx(5.0)

    def test_depth_clamps_to_25(self):
        pose, intr, light, table = _frontal_setup()
        mesh = _plane_mesh(30.0)
        radiance, depth = render_linear(build_bvh(mesh), mesh, table, pose,
                                        intr, light)
        assert np.all(depth.values == 25.0)
        # the surface is still lit even past the depth clamp
        assert radiance[24, 32].sum() > 0.0

    def test_center_pixel_inverse_square(self):
        pose, intr, light, table = _frontal_setup()
        r5, _ = render_linear(build_bvh(_plane_mesh(5.0)), _plane_mesh(5.0),
                              table, pose, intr, light)
        r10, _ = render_linear(build_bvh(_plane_mesh(10.0)), _plane_mesh(10.0),
                               table, pose, intr, light)
        ratio = r5[24, 32, 0] / r10[24, 32, 0]
        assert ratio == pytest.approx(4.0, rel=1e-3)

    def test_radiance_finite_and_nonnegative(self):
        pose, intr, light, table = _frontal_setup(level=5)
        mesh = _plane_mesh(4.0)
        radiance, _ = render_linear(build_bvh(mesh), mesh, table, pose, intr,
                                    light)
        assert np.all(np.isfinite(radiance))
        assert radiance.min() >= 0.0

    def test_rgb_depth_registration(self):
        # half-plane: lit pixels and near-depth pixels select the same set
        pose, intr, light, table = _frontal_setup()
        v = np.array([[0.0, -200.0, 5.0], [200.0, -200.0, 5.0],
                      [200.0, 200.0, 5.0], [0.0, 200.0, 5.0]])
        t = np.array([[0, 2, 1], [0, 3, 2]], dtype=np.int32)
        mesh = TriMesh(v, t, np.tile([0.0, 0.0, -1.0], (4, 1)),
                       np.zeros(4, dtype=np.int32))
        radiance, depth = render_linear(build_bvh(mesh), mesh, pose=pose,
                                        intrinsics=intr, light=light,
                                        table=table)
        lit = radiance.sum(axis=2) > 0.0
        near = depth.values < 25.0
        assert np.array_equal(lit, near)

    def test_frame_wrapper_types_and_determinism(self):
        pose, intr, light, table = _frontal_setup()
        mesh = _plane_mesh(5.0)
        accel = build_bvh(mesh)
        frame1, depth1 = render_frame(accel, mesh, table, pose, intr, light,
                                      RenderSettings(exposure=20.0))
        frame2, depth2 = render_frame(accel, mesh, table, pose, intr, light,
                                      RenderSettings(exposure=20.0))
        assert isinstance(frame1, RgbFrame) and isinstance(depth1, DepthMap)
        assert np.array_equal(frame1.pixels, frame2.pixels)
        assert np.array_equal(depth1.values, depth2.values)
        assert frame1.pixels[24, 32].min() > 0

    def test_supersample_keeps_center_ray_depth(self):
        pose, intr, light, table = _frontal_setup()
        mesh = _plane_mesh(5.0, half=0.2)
        _, d1 = render_linear(build_bvh(mesh), mesh, table, pose, intr, light,
                              RenderSettings(supersample=1))
        r4, d4 = render_linear(build_bvh(mesh), mesh, table, pose, intr, light,
                               RenderSettings(supersample=2))
        assert np.array_equal(d1.values, d4.values)
        # edge pixels now average hit and miss subsamples
        assert np.all(np.isfinite(r4))

    def test_light_must_ride_the_camera(self):
        pose, intr, light, table = _frontal_setup()
        mesh = _plane_mesh(5.0)
        with pytest.raises(ValueError):
            render_linear(build_bvh(mesh), mesh, table, pose, intr,
                          LightSource(np.array([0.0, 0.0, 1.0])))

    def test_specular_brightens_level4_center(self):
        pose, intr, light, _ = _frontal_setup()
        mesh = _plane_mesh(5.0)
        accel = build_bvh(mesh)
        t1 = assign_materials(mesh, level_config(1), frame_index=0, seed=0)
        t4 = assign_materials(mesh, level_config(4), frame_index=0, seed=0)
        r1, _ = render_linear(accel, mesh, t1, pose, intr, light)
        r4, _ = render_linear(accel, mesh, t4, pose, intr, light)
        # frontal center sees the full lobe; oblique corners see almost none
        assert r4[24, 32, 0] > r1[24, 32, 0] + 0.2 / 25.0
        assert r4[0, 0, 0] == pytest.approx(r1[0, 0, 0], abs=1e-6)

    def test_log_log_slope_is_minus_two(self):
        pose, intr, light, table = _frontal_setup(width=32, height=24)
        dists = np.arange(2.0, 13.0)
        lums = []
        for z in dists:
            mesh = _plane_mesh(float(z))
            radiance, _ = render_linear(build_bvh(mesh), mesh, table, pose,
                                        intr, light)
            lums.append(radiance[12, 16, 1])
        slope = np.polyfit(np.log(dists), np.log(lums), 1)[0]
        assert abs(slope - (-2.0)) < 0.05
