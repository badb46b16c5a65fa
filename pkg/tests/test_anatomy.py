"""Centerline, tube profile, extrusion, folds, and polyps."""

import numpy as np
import pytest

from synthcolon.anatomy import (
    FoldSpec,
    PolypSpec,
    SegmentSpec,
    apply_folds,
    attach_polyps,
    build_centerline,
    build_tube_profile,
    default_segments,
    extrude_tube,
    make_polyp,
    sample_folds,
    sample_polyps,
)
from synthcolon.mesh import mesh_area


def _straight(length=30.0, diameter=5.0):
    specs = (SegmentSpec("tube", length, diameter),)
    line = build_centerline(specs, seed=0)
    profile = build_tube_profile(line, specs, seed=0)
    return specs, line, profile


def test_default_segments_order_and_lengths():
    segs = default_segments()
    assert [s.name for s in segs] == ["rectum", "sigmoid", "descending", "transverse", "ascending"]
    assert [s.length for s in segs] == [20.0, 49.0, 30.0, 58.0, 30.0]
    assert sum(s.length for s in segs) == 187.0


def test_centerline_arc_length_matches_segments():
    line = build_centerline(default_segments(), seed=0)
    assert abs(line.arc_length - 187.0) < 1e-6


def test_centerline_deterministic_and_seed_sensitive():
    a = build_centerline(default_segments(), seed=3)
    b = build_centerline(default_segments(), seed=3)
    c = build_centerline(default_segments(), seed=4)
    np.testing.assert_array_equal(a.control_points, b.control_points)
    assert not np.allclose(a.control_points, c.control_points)


def test_flexure_angles_near_targets():
    for seed in range(5):
        line = build_centerline(default_segments(), seed=seed)
        assert abs(line.flexure_angles["splenic"] - 30.0) <= 3.0
        assert abs(line.flexure_angles["hepatic"] - 40.0) <= 3.0
        assert line.flexure_angles["splenic"] < 90.0
        assert line.flexure_angles["hepatic"] < 90.0


def test_segment_bounds_contiguous_from_anus():
    line = build_centerline(default_segments(), seed=1)
    bounds = line.segment_bounds
    assert bounds[0][0] == "rectum" and bounds[0][1] == 0.0
    for (_, s0, s1), (_, t0, _) in zip(bounds, bounds[1:]):
        assert abs(s1 - t0) < 1e-9
    assert abs(bounds[-1][2] - line.arc_length) < 1e-6


def test_bend_radius_leaves_wall_clearance():
    # tube wall must fit inside every bend: 1/kappa - wall radius >= 0.15 cm
    segs = default_segments()
    for seed in range(3):
        line = build_centerline(segs, seed=seed)
        profile = build_tube_profile(line, segs, seed=seed)
        s_tab, kappa = line.curvature_table()
        theta = np.linspace(0.0, 2.0 * np.pi, 64, endpoint=False)
        r_max = profile.radius(s_tab, theta).max(axis=1)
        margin = 1.0 / np.maximum(kappa, 1e-30) - r_max
        assert margin.min() >= 0.15 - 1e-6


def test_frames_orthonormal_and_continuous():
    line = build_centerline(default_segments(), seed=2)
    prev_n1 = None
    for s in np.linspace(0.5, line.arc_length - 0.5, 200):
        t, n1, n2 = line.frame_at(s)
        for a, b in [(t, n1), (t, n2), (n1, n2)]:
            assert abs(np.dot(a, b)) < 1e-6
        if prev_n1 is not None:
            # rotation-minimizing frames: no sudden flips between nearby samples
            assert np.dot(n1, prev_n1) > 0.9
        prev_n1 = n1


def test_straight_fallback_runs_along_z():
    _, line, _ = _straight(length=30.0)
    assert abs(line.arc_length - 30.0) < 1e-9
    np.testing.assert_allclose(line.point_at(12.0), [0.0, 0.0, 12.0], atol=1e-9)
    np.testing.assert_allclose(line.tangent_at(12.0), [0.0, 0.0, 1.0], atol=1e-9)


def test_projection_roundtrip():
    line = build_centerline(default_segments(), seed=0)
    s_ref = np.linspace(1.0, line.arc_length - 1.0, 50)
    pts = line.point_at(s_ref)
    s_back = line.project(pts)
    np.testing.assert_allclose(s_back, s_ref, atol=5e-3)


def test_extrude_vertex_count_and_area():
    # lateral surface of a straight circular tube: 2 pi r L within 1%
    _, line, profile = _straight(length=30.0, diameter=5.0)
    tube = extrude_tube(line, profile, axial_steps=300, radial_steps=96)
    assert tube.n_vertices == 300 * 96
    assert tube.n_triangles == 2 * (300 - 1) * 96
    exact = 2.0 * np.pi * 2.5 * 30.0
    assert abs(mesh_area(tube) - exact) / exact < 0.01


def test_extrude_normals_face_lumen():
    _, line, profile = _straight()
    tube = extrude_tube(line, profile, axial_steps=100, radial_steps=48)
    axis = np.zeros_like(tube.vertices)
    axis[:, 2] = tube.vertices[:, 2]
    toward_axis = axis - tube.vertices
    dots = np.einsum("ij,ij->i", tube.normals, toward_axis)
    assert np.all(dots > 0)


def test_extrude_ring_radii_match_profile():
    segs = default_segments()
    line = build_centerline(segs, seed=0)
    profile = build_tube_profile(line, segs, seed=0)
    tube = extrude_tube(line, profile, axial_steps=200, radial_steps=64)
    s_vals = np.linspace(0.0, line.arc_length, 200)
    for i in [30, 100, 170]:
        ring = tube.vertices[i * 64:(i + 1) * 64]
        d = np.linalg.norm(ring - line.point_at(s_vals[i]), axis=1)
        theta = np.arange(64) / 64 * 2 * np.pi
        np.testing.assert_allclose(d, profile.radius(s_vals[i], theta)[0], atol=1e-9)


def test_cross_section_shapes_differ_by_segment():
    segs = default_segments()
    line = build_centerline(segs, seed=0)
    profile = build_tube_profile(line, segs, seed=0)
    # sample count divisible by 2 and 3 so symmetry rolls are exact
    theta = np.linspace(0.0, 2.0 * np.pi, 252, endpoint=False)

    def spread(s):
        r = profile.radius(s, theta)[0]
        return (r.max() - r.min()) / r.max()

    bounds = {name: (s0, s1) for name, s0, s1 in line.segment_bounds}
    mid = {k: 0.5 * (v[0] + v[1]) for k, v in bounds.items()}
    assert spread(mid["transverse"]) < 1e-9          # circular
    assert 0.1 < spread(mid["descending"]) < 0.45    # oval
    assert 0.1 < spread(mid["ascending"]) < 0.45     # triangular lobes
    # triangular has three-fold symmetry, oval two-fold
    r_asc = profile.radius(mid["ascending"], theta)[0]
    np.testing.assert_allclose(r_asc, np.roll(r_asc, len(theta) // 3), atol=1e-9)
    r_desc = profile.radius(mid["descending"], theta)[0]
    np.testing.assert_allclose(r_desc, np.roll(r_desc, len(theta) // 2), atol=1e-9)


def test_profile_max_radius_is_nominal():
    from synthcolon.anatomy import circular_profile, oval_profile, triangular_profile

    theta = np.linspace(0.0, 2.0 * np.pi, 720, endpoint=False)
    for prof in [circular_profile(2.6), oval_profile(2.6, 0.7), triangular_profile(2.6, 0.2)]:
        assert abs(prof.radius_fn(theta).max() - 2.6) < 1e-9

    # blended field never exceeds nominal; pinch tails shave at most a hair
    segs = default_segments()
    line = build_centerline(segs, seed=0)
    profile = build_tube_profile(line, segs, seed=0)
    bounds = {name: (s0, s1) for name, s0, s1 in line.segment_bounds}
    for spec in segs:
        s0, s1 = bounds[spec.name]
        r = profile.radius(0.5 * (s0 + s1), theta)[0]
        nominal = spec.nominal_diameter / 2.0
        assert r.max() <= nominal + 1e-9
        assert r.max() >= 0.99 * nominal


def test_fold_population_invariants():
    segs = default_segments()
    line = build_centerline(segs, seed=0)
    profile = build_tube_profile(line, segs, seed=0)
    for seed in range(5):
        folds = sample_folds(line, profile, seed=seed)
        assert 30 <= folds.count <= 60
        gaps = np.diff(folds.axial_positions)
        assert np.all(gaps >= 3.0 - 1e-9)
        assert np.all(gaps <= 6.0 + 1e-9)
        assert np.all(folds.fold_diameters >= 2.8 - 1e-9)
        assert np.all(folds.fold_diameters <= 7.5 + 1e-9)
        assert folds.axial_positions[0] >= 2.0
        assert folds.axial_positions[-1] <= line.arc_length - 2.0
    a = sample_folds(line, profile, seed=2)
    b = sample_folds(line, profile, seed=2)
    np.testing.assert_array_equal(a.axial_positions, b.axial_positions)


def test_fold_constricts_to_target_diameter():
    _, line, profile = _straight(length=30.0, diameter=5.0)
    tube = extrude_tube(line, profile, axial_steps=600, radial_steps=96)
    folds = FoldSpec(1, np.array([10.0]), np.array([3.2]))
    folded = apply_folds(tube, folds, line)
    rho = np.linalg.norm(folded.vertices[:, :2], axis=1)
    z = folded.vertices[:, 2]
    at_fold = np.abs(z - 10.0) < 0.05
    lumen = 2.0 * rho[at_fold].min()
    assert abs(lumen - 3.2) / 3.2 < 0.05
    # influence dies out beyond twice the falloff width
    far = np.abs(z - 10.0) > 2.0 * folds.axial_falloff_width
    assert np.max(np.abs(rho[far] - 2.5)) < 0.01 * 2.5


def test_fold_skips_when_wider_than_lumen():
    _, line, profile = _straight(length=30.0, diameter=3.0)
    tube = extrude_tube(line, profile, axial_steps=200, radial_steps=48)
    folds = FoldSpec(1, np.array([10.0]), np.array([3.4]))
    with pytest.warns(UserWarning):
        folded = apply_folds(tube, folds, line)
    np.testing.assert_array_equal(folded.vertices, tube.vertices)


def test_polyp_population_invariants():
    line = build_centerline(default_segments(), seed=0)
    for seed in range(5):
        polyps = sample_polyps(line, seed=seed)
        assert 8 <= len(polyps) <= 12
        for p in polyps:
            assert 5.0 <= p.base_diameter <= 30.0
            assert 4.0 <= p.wall_anchor[0] <= line.arc_length - 4.0
        # anchors keep at least the larger polyp's diameter apart
        for i, p in enumerate(polyps):
            for q in polyps[i + 1:]:
                gap = np.linalg.norm(line.point_at(p.wall_anchor[0])
                                     - line.point_at(q.wall_anchor[0]))
                assert gap >= max(p.base_diameter, q.base_diameter) / 10.0 - 1e-9
    a = sample_polyps(line, seed=1)
    b = sample_polyps(line, seed=1)
    assert [p.wall_anchor for p in a] == [p.wall_anchor for p in b]


def test_polyp_radii_within_ten_percent():
    spec = PolypSpec(30.0, (10.0, 0.0), deformation_seed=99)
    polyp = make_polyp(spec)
    radii = np.linalg.norm(polyp.vertices, axis=1)
    assert np.all(radii >= 1.5 * 0.9 - 1e-9)
    assert np.all(radii <= 1.5 * 1.1 + 1e-9)
    assert radii.max() - radii.min() > 1e-3   # actually deformed
    assert np.all(polyp.material == 1)


def test_polyp_rejects_large_perturbation():
    with pytest.raises(ValueError):
        PolypSpec(10.0, (5.0, 0.0), deformation_seed=1, max_radial_perturbation=0.2)


def test_attached_polyp_protrudes_by_its_radius():
    _, line, profile = _straight(length=30.0, diameter=5.0)
    tube = extrude_tube(line, profile, axial_steps=300, radial_steps=96)
    spec = PolypSpec(10.0, (15.0, 0.0), deformation_seed=123)
    out = attach_polyps(tube, [spec], line)
    assert out.n_vertices > tube.n_vertices
    rho = np.linalg.norm(out.vertices[:, :2], axis=1)
    polyp_rho = rho[out.material == 1]
    # sphere of radius 0.5 +-10% centered on the wall at rho = 2.5
    assert 2.5 - 0.55 - 0.01 <= polyp_rho.min() <= 2.5 - 0.45 + 0.01
    # skirt only pulls the wall toward the lumen, at most 0.15 r
    wall_rho = rho[out.material == 0]
    assert wall_rho.max() <= 2.5 + 1e-9
    assert wall_rho.min() >= 2.5 - 0.15 * 0.5 - 1e-9


def test_attach_polyps_validates_anchor():
    _, line, _ = _straight(length=30.0)
    spec = PolypSpec(10.0, (45.0, 0.0), deformation_seed=1)
    with pytest.raises(ValueError):
        attach_polyps(extrude_tube(line, _straight()[2], 50, 24), [spec], line)


def test_full_anatomy_pipeline_deterministic():
    segs = default_segments()

    def build(seed):
        line = build_centerline(segs, seed=seed)
        profile = build_tube_profile(line, segs, seed=seed)
        tube = extrude_tube(line, profile, axial_steps=150, radial_steps=48)
        folds = sample_folds(line, profile, seed=seed)
        folded = apply_folds(tube, folds, line)
        return attach_polyps(folded, sample_polyps(line, seed=seed), line)

    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a = build(5)
        b = build(5)
    np.testing.assert_array_equal(a.vertices, b.vertices)
    np.testing.assert_array_equal(a.triangles, b.triangles)
    np.testing.assert_array_equal(a.material, b.material)
