"""Camera path, intrinsics, light cone, surface noise, and materials."""

import numpy as np
import pytest

from synthcolon.anatomy import (
    SegmentSpec,
    build_centerline,
    build_tube_profile,
    default_segments,
    extrude_tube,
)
from synthcolon.bvh import build_bvh
from synthcolon.levels import level_config
from synthcolon.scene import (
    BASE_ALBEDO,
    CameraPose,
    Intrinsics,
    LightSource,
    NoiseParams,
    assign_materials,
    cone_weight,
    displace_surface,
    generate_camera_path,
    intrinsics_for,
    surface_noise_params,
)


def _straight(length=30.0, diameter=5.0):
    specs = (SegmentSpec("tube", length, diameter),)
    line = build_centerline(specs, seed=0)
    profile = build_tube_profile(line, specs, seed=0)
    return line, extrude_tube(line, profile, axial_steps=150, radial_steps=48)


def test_intrinsics_focal_from_fov():
    intr = intrinsics_for(1280, 1080)
    assert abs(intr.focal_px - 448.13) < 0.01
    assert intr.focal_cm == 0.1755
    assert intr.principal_point == (0.0, 0.0)
    # focal scales linearly with width at fixed FOV
    assert abs(intrinsics_for(320, 270).focal_px - intr.focal_px / 4.0) < 1e-9


def test_intrinsics_rejects_inconsistent_focal():
    with pytest.raises(ValueError):
        Intrinsics(1280, 1080, focal_px=500.0)


def test_camera_pose_validation_and_rotation():
    pose = CameraPose([0, 0, 0], [0, 0, 1], [0, -1, 0])
    r = pose.rotation()
    np.testing.assert_allclose(r @ r.T, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(np.linalg.det(r), 1.0, atol=1e-12)
    np.testing.assert_allclose(r @ [0, 0, 1], [0, 0, 1], atol=1e-12)
    with pytest.raises(ValueError):
        CameraPose([0, 0, 0], [0, 0, 2.0], [0, -1, 0])
    with pytest.raises(ValueError):
        CameraPose([0, 0, 0], [0, 0, 1.0], [0, 0, 1.0])


def test_light_cone_window():
    assert cone_weight(0.0) == 1.0
    assert cone_weight(129.9) == 1.0
    np.testing.assert_allclose(cone_weight(135.0), 0.5, atol=1e-12)
    assert cone_weight(140.0) == 0.0
    assert cone_weight(170.0) == 0.0
    a = np.linspace(0, 180, 361)
    w = cone_weight(a)
    assert np.all(np.diff(w) <= 1e-12)   # monotone falloff


def test_light_source_colocation_contract():
    light = LightSource(position=[1.0, 2.0, 3.0])
    np.testing.assert_array_equal(light.position, [1.0, 2.0, 3.0])
    assert light.cone_half_angle == 140.0
    with pytest.raises(ValueError):
        LightSource([0, 0, 0], cone_half_angle=0.0)


def test_zero_jitter_path_on_centerline():
    line, mesh = _straight()
    poses = generate_camera_path(line, mesh, 20, seed=0, jitter_radius=0.0)
    assert len(poses) == 20
    s_expect = np.linspace(line.arc_length - 2.0, 2.0, 20)
    for pose, s in zip(poses, s_expect):
        np.testing.assert_allclose(pose.position, line.point_at(s), atol=1e-9)
    # withdrawal on a +z tube: looking down -z
    for pose in poses:
        np.testing.assert_allclose(pose.optical_axis, [0, 0, -1], atol=1e-9)


def test_path_jitter_and_clearance():
    segs = default_segments()
    line = build_centerline(segs, seed=1)
    profile = build_tube_profile(line, segs, seed=1)
    mesh = extrude_tube(line, profile, axial_steps=400, radial_steps=64)
    poses = generate_camera_path(line, mesh, 80, seed=1)
    positions = np.array([p.position for p in poses])
    s_proj = line.project(positions)
    offsets = np.linalg.norm(positions - line.point_at(s_proj), axis=1)
    assert np.all(offsets <= 1.0 + 1e-6)
    d = build_bvh(mesh).distance(positions)
    assert np.all(d >= 0.8 - 1e-9)
    # withdrawal: arc projections non-increasing at desk frame spacing
    assert np.all(np.diff(s_proj) <= 1e-6)


def test_path_deterministic_and_seeded():
    line, mesh = _straight()
    a = generate_camera_path(line, mesh, 30, seed=5)
    b = generate_camera_path(line, mesh, 30, seed=5)
    c = generate_camera_path(line, mesh, 30, seed=6)
    np.testing.assert_array_equal(np.array([p.position for p in a]),
                                  np.array([p.position for p in b]))
    assert not np.allclose(np.array([p.position for p in a]),
                           np.array([p.position for p in c]))


def test_path_preconditions():
    line, mesh = _straight()
    with pytest.raises(ValueError):
        generate_camera_path(line, mesh, 1, seed=0)
    short = build_centerline((SegmentSpec("t", 3.0, 2.0),), seed=0)
    with pytest.raises(ValueError):
        generate_camera_path(short, None, 5, seed=0)


def test_displace_surface_bounds_and_identity():
    _, mesh = _straight()
    assert displace_surface(mesh, NoiseParams(amplitude=0.0)) is mesh
    out = displace_surface(mesh, NoiseParams(amplitude=0.15, frequency=0.8, seed=3))
    moved = np.linalg.norm(out.vertices - mesh.vertices, axis=1)
    assert moved.max() <= 0.15 + 1e-12
    assert moved.max() > 0.01
    out2 = displace_surface(mesh, NoiseParams(amplitude=0.15, frequency=0.8, seed=3))
    np.testing.assert_array_equal(out.vertices, out2.vertices)


def test_noise_params_validation():
    with pytest.raises(ValueError):
        NoiseParams(amplitude=-0.1)
    with pytest.raises(ValueError):
        NoiseParams(octaves=0)
    a = surface_noise_params(7)
    assert a == surface_noise_params(7)
    assert a != surface_noise_params(8)


def test_material_specular_by_level():
    _, mesh = _straight()
    for lvl, ks in [(1, 0.0), (2, 0.0), (3, 0.0), (4, 0.35), (5, 0.35)]:
        table = assign_materials(mesh, level_config(lvl), 0, seed=0)
        assert table.specular_ks == ks
    assert assign_materials(mesh, level_config(4), 0, 0).specular_exponent == 60.0


def test_texture_seed_changes_every_three_frames():
    _, mesh = _straight()
    seeds = [assign_materials(mesh, level_config(5), f, seed=11).texture_seed
             for f in range(7)]
    assert seeds[0] == seeds[1] == seeds[2]
    assert seeds[3] == seeds[4] == seeds[5]
    assert seeds[0] != seeds[3]
    assert seeds[3] != seeds[6]
    # polyp cell pattern stays fixed across frames
    cells = {assign_materials(mesh, level_config(5), f, seed=11).cell_seed
             for f in range(7)}
    assert len(cells) == 1


def test_albedo_uniform_until_textured():
    _, mesh = _straight()
    rng = np.random.default_rng(0)
    pts = rng.uniform(-3, 3, size=(500, 3))
    wall = np.zeros(500, dtype=np.int32)
    polyp = np.ones(500, dtype=np.int32)
    for lvl in (1, 2, 3):
        table = assign_materials(mesh, level_config(lvl), 0, seed=2)
        np.testing.assert_array_equal(table.albedo_at(pts, wall),
                                      np.tile(BASE_ALBEDO[0], (500, 1)))
        np.testing.assert_array_equal(table.albedo_at(pts, polyp),
                                      np.tile(BASE_ALBEDO[1], (500, 1)))
    # level 4: walls stay uniform, polyps get cell texture
    t4 = assign_materials(mesh, level_config(4), 0, seed=2)
    np.testing.assert_array_equal(t4.albedo_at(pts, wall),
                                  np.tile(BASE_ALBEDO[0], (500, 1)))
    assert np.ptp(t4.albedo_at(pts, polyp)[:, 0]) > 0.01
    # level 5: everything spatially modulated, still a valid reflectance
    t5 = assign_materials(mesh, level_config(5), 0, seed=2)
    a5 = t5.albedo_at(pts, wall)
    assert np.ptp(a5[:, 0]) > 0.01
    assert np.all(a5 >= 0.0) and np.all(a5 <= 1.0)


def test_level_config_matrix():
    rows = {
        1: (False, False, False, False, False, "sphere"),
        2: (True, False, False, False, False, "sphere"),
        3: (True, True, False, False, False, "deformed"),
        4: (True, True, True, True, False, "deformed"),
        5: (True, True, True, True, True, "deformed"),
    }
    for lvl, (folds, lumen, irr, spec, tex, polyp) in rows.items():
        cfg = level_config(lvl)
        assert (cfg.folds, cfg.deformed_lumen, cfg.surface_irregularities,
                cfg.specular, cfg.texture, cfg.polyp_variant) == \
            (folds, lumen, irr, spec, tex, polyp)
    with pytest.raises(ValueError):
        level_config(0)
    with pytest.raises(ValueError):
        level_config(6)
