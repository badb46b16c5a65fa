"""Parametric colon construction: centerline, tubular wall, folds, polyps.

The colon is modeled as a cubic spline centerline threaded through a
hand-tuned 3D template (five anatomical segments, two acute flexures), a
tube extruded along rotation-minimizing frames with per-segment cross
sections, ring-shaped constricting folds, and deformed-sphere polyps
attached to the wall.  All dimensions in cm unless a name says otherwise.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.spatial import cKDTree

from .mesh import TriMesh, compute_vertex_normals, merge_meshes, uv_sphere
from .noise import fbm3
from .seeds import (DOMAIN_ANCHOR_REDRAW, DOMAIN_CENTERLINE, DOMAIN_FOLDS,
                    DOMAIN_POLYPS, DOMAIN_PROFILE, derive_rng)

# ---------------------------------------------------------------------------
# segment defaults (anus -> caecum order)
# ---------------------------------------------------------------------------

SEGMENT_ORDER = ("rectum", "sigmoid", "descending", "transverse", "ascending")
DEFAULT_LENGTH_CM = {
    "rectum": 20.0, "sigmoid": 49.0, "descending": 30.0,
    "transverse": 58.0, "ascending": 30.0,
}
DEFAULT_DIAMETER_CM = {
    "rectum": 5.0, "sigmoid": 4.2, "descending": 5.2,
    "transverse": 5.4, "ascending": 6.2,
}

# polyp sizes used as fixtures in tests and docs (mm)
CANONICAL_POLYP_DIAMETERS_MM = (5.0, 10.0, 15.0, 20.0, 25.0, 30.0)


@dataclass(frozen=True)
class SegmentSpec:
    """One anatomical segment: name, centerline length, lumen diameter."""

    name: str
    length: float             # cm along the centerline
    nominal_diameter: float   # cm, the maximum lumen diameter of the segment

    def __post_init__(self):
        if self.length <= 0:
            raise ValueError(f"segment {self.name!r}: length must be positive")
        if self.nominal_diameter <= 0:
            raise ValueError(f"segment {self.name!r}: diameter must be positive")


def default_segments() -> tuple[SegmentSpec, ...]:
    """The five standard segments, ordered anus -> caecum."""
    return tuple(
        SegmentSpec(name, DEFAULT_LENGTH_CM[name], DEFAULT_DIAMETER_CM[name])
        for name in SEGMENT_ORDER
    )


# ---------------------------------------------------------------------------
# centerline template (hand-tuned; anus -> caecum; x=left, y=anterior, z=up)
# ---------------------------------------------------------------------------

_TEMPLATE_POINTS = np.array([
    (2.0, -2.0, -41.0), (1.0, 2.0, -31.5), (4.0, 3.0, -23.0),        # rectum
    (10.0, 6.0, -22.0), (17.0, 9.0, -27.0), (23.0, 5.0, -22.0),      # sigmoid loop
    (24.0, 2.0, -13.0), (24.0, 0.0, 0.0),
    (26.0, -3.0, 15.0), (25.0, -1.0, 29.0),                          # descending
    (19.0, -1.0, 16.0), (6.0, 3.0, 11.0), (-6.0, 4.0, 11.0),         # transverse droop
    (-14.0, 2.0, 22.0),
    (-14.8, 2.0, 7.5), (-17.0, 0.0, -7.0),                           # ascending
])
# last template point index of each segment
_TEMPLATE_SEG_END = {"rectum": 2, "sigmoid": 7, "descending": 9,
                     "transverse": 13, "ascending": 15}
_SPLENIC_APEX = 9    # descending/transverse junction control point
_HEPATIC_APEX = 13   # transverse/ascending junction control point
# tangent-length multipliers that widen the turn radius at sharp bends
_TANGENT_SCALE = {4: 1.5, 9: 4.0, 10: 1.5, 12: 1.5, 13: 4.0}
# control points whose jitter is kept small to preserve flexure geometry
_FLEXURE_NEIGHBORHOOD = frozenset({8, 9, 10, 12, 13, 14})

# lumen narrowing at the flexure apexes (diameter multiplier, Gaussian falloff)
FLEXURE_PINCH = 0.45
FLEXURE_PINCH_SIGMA = 4.0

# a centerline is accepted only if the tube wall can follow every bend:
# min over arc of (curvature radius - max wall radius) must exceed this
_MIN_BEND_CLEARANCE = 0.15
_MAX_BUILD_ATTEMPTS = 64
_ARC_SAMPLES_PER_SPAN = 256


def _catmull_tangents(points: np.ndarray, scale: Mapping[int, float] | None = None) -> np.ndarray:
    t = np.empty_like(points)
    t[0] = points[1] - points[0]
    t[-1] = points[-1] - points[-2]
    t[1:-1] = 0.5 * (points[2:] - points[:-2])
    if scale:
        for i, k in scale.items():
            t[i] = t[i] * k
    return t


def _angle_deg(a: np.ndarray, b: np.ndarray) -> float:
    c = float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))
    return float(np.degrees(np.arccos(np.clip(c, -1.0, 1.0))))


@dataclass(frozen=True)
class Centerline:
    """Piecewise cubic spline through ordered control points (anus -> caecum).

    Hermite spans from per-point tangents give a C1 curve.  Arc-length
    parameterization, rotation-minimizing frames, and nearest-point
    projection are precomputed on a dense sample table.
    """

    control_points: np.ndarray                  # (n, 3)
    tangents: np.ndarray                        # (n, 3), spline end tangents
    flexure_angles: dict = field(default_factory=dict)   # name -> degrees
    flexure_arcs: dict = field(default_factory=dict)     # name -> arc position
    segment_bounds: tuple = ()                  # ((name, s_start, s_end), ...)

    def __post_init__(self):
        pts = np.asarray(self.control_points, dtype=np.float64)
        tan = np.asarray(self.tangents, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) < 2:
            raise ValueError("need at least two 3D control points")
        if tan.shape != pts.shape:
            raise ValueError("tangents must match control points")
        object.__setattr__(self, "control_points", pts)
        object.__setattr__(self, "tangents", tan)

        # Bezier coefficients per span
        p0, p3 = pts[:-1], pts[1:]
        p1 = p0 + tan[:-1] / 3.0
        p2 = p3 - tan[1:] / 3.0
        coeffs = np.stack([p0, p1, p2, p3], axis=1)     # (spans, 4, 3)
        object.__setattr__(self, "_coeffs", coeffs)

        # dense arc-length table
        n_spans = len(coeffs)
        u = np.linspace(0.0, 1.0, _ARC_SAMPLES_PER_SPAN)
        span_idx = np.repeat(np.arange(n_spans), _ARC_SAMPLES_PER_SPAN)
        u_all = np.tile(u, n_spans)
        pts_dense = _bezier_eval(coeffs, span_idx, u_all)
        seg_len = np.linalg.norm(np.diff(pts_dense, axis=0), axis=1)
        # spans share endpoints; zero out the stitch steps between spans
        stitch = np.arange(1, n_spans) * _ARC_SAMPLES_PER_SPAN - 1
        seg_len[stitch] = 0.0
        s_dense = np.concatenate([[0.0], np.cumsum(seg_len)])
        object.__setattr__(self, "_span_idx", span_idx)
        object.__setattr__(self, "_u_dense", u_all)
        object.__setattr__(self, "_s_dense", s_dense)
        object.__setattr__(self, "_pts_dense", pts_dense)
        object.__setattr__(self, "arc_length", float(s_dense[-1]))
        # arc position of each control point
        knot_arcs = s_dense[np.arange(n_spans + 1) * _ARC_SAMPLES_PER_SPAN - np.concatenate([[0], np.ones(n_spans, dtype=int)])]
        object.__setattr__(self, "_knot_arcs", knot_arcs)

        # rotation-minimizing frames via double reflection over the table
        tang = _bezier_deriv(coeffs, span_idx, u_all)
        tn = tang / np.linalg.norm(tang, axis=1, keepdims=True)
        n1 = np.empty_like(tn)
        t0 = tn[0]
        e = np.zeros(3)
        e[int(np.argmin(np.abs(t0)))] = 1.0
        v = e - np.dot(e, t0) * t0
        n1[0] = v / np.linalg.norm(v)
        for i in range(len(tn) - 1):
            v1 = pts_dense[i + 1] - pts_dense[i]
            c1 = float(np.dot(v1, v1))
            if c1 < 1e-30:
                n1[i + 1] = n1[i]
                continue
            rl = n1[i] - (2.0 / c1) * np.dot(v1, n1[i]) * v1
            tl = tn[i] - (2.0 / c1) * np.dot(v1, tn[i]) * v1
            v2 = tn[i + 1] - tl
            c2 = float(np.dot(v2, v2))
            if c2 >= 1e-30:
                rl = rl - (2.0 / c2) * np.dot(v2, rl) * v2
            rl = rl - np.dot(rl, tn[i + 1]) * tn[i + 1]
            n1[i + 1] = rl / np.linalg.norm(rl)
        object.__setattr__(self, "_n1_dense", n1)
        object.__setattr__(self, "_tan_dense", tn)
        object.__setattr__(self, "_tree", cKDTree(pts_dense))

    # -- queries ------------------------------------------------------------

    def _locate(self, s):
        """Map arc positions to (span, u) via the dense table."""
        s = np.clip(np.asarray(s, dtype=np.float64), 0.0, self.arc_length)
        j = np.clip(np.searchsorted(self._s_dense, s, side="right") - 1, 0, len(self._s_dense) - 2)
        s0, s1 = self._s_dense[j], self._s_dense[j + 1]
        w = np.where(s1 > s0, (s - s0) / np.where(s1 > s0, s1 - s0, 1.0), 0.0)
        # interpolate u only within a span; at stitches w is 0 by construction
        u = self._u_dense[j] + w * (np.where(self._span_idx[np.minimum(j + 1, len(self._span_idx) - 1)] == self._span_idx[j], self._u_dense[np.minimum(j + 1, len(self._u_dense) - 1)] - self._u_dense[j], 0.0))
        return self._span_idx[j], u

    def point_at(self, s) -> np.ndarray:
        """Curve point(s) at arc position(s) s."""
        span, u = self._locate(s)
        return _bezier_eval(self._coeffs, span, u)

    def tangent_at(self, s) -> np.ndarray:
        """Unit tangent(s) at arc position(s) s (points toward the caecum)."""
        span, u = self._locate(s)
        d = _bezier_deriv(self._coeffs, span, u)
        return d / np.linalg.norm(d, axis=-1, keepdims=True)

    def frame_at(self, s):
        """(tangent, normal1, normal2) orthonormal frame(s), roll-free."""
        s_arr = np.atleast_1d(np.asarray(s, dtype=np.float64))
        t = np.atleast_2d(self.tangent_at(s_arr))
        j = np.clip(np.searchsorted(self._s_dense, np.clip(s_arr, 0, self.arc_length)) , 0, len(self._s_dense) - 1)
        n1 = self._n1_dense[j]
        n1 = n1 - np.einsum("ij,ij->i", n1, t)[:, None] * t
        n1 = n1 / np.linalg.norm(n1, axis=1, keepdims=True)
        n2 = np.cross(t, n1)
        if np.isscalar(s) or np.asarray(s).ndim == 0:
            return t[0], n1[0], n2[0]
        return t, n1, n2

    def project(self, points: np.ndarray) -> np.ndarray:
        """Arc position of the nearest curve point for each query point."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        _, idx = self._tree.query(points)
        # parabolic refinement over the neighboring samples
        i0 = np.clip(idx, 1, len(self._s_dense) - 2)
        d = np.stack([
            np.einsum("ij,ij->i", points - self._pts_dense[i0 - 1], points - self._pts_dense[i0 - 1]),
            np.einsum("ij,ij->i", points - self._pts_dense[i0], points - self._pts_dense[i0]),
            np.einsum("ij,ij->i", points - self._pts_dense[i0 + 1], points - self._pts_dense[i0 + 1]),
        ], axis=1)
        denom = d[:, 0] - 2.0 * d[:, 1] + d[:, 2]
        shift = np.where(np.abs(denom) > 1e-30, 0.5 * (d[:, 0] - d[:, 2]) / np.where(np.abs(denom) > 1e-30, denom, 1.0), 0.0)
        shift = np.clip(shift, -1.0, 1.0)
        step = np.where(shift >= 0,
                        self._s_dense[np.minimum(i0 + 1, len(self._s_dense) - 1)] - self._s_dense[i0],
                        self._s_dense[i0] - self._s_dense[i0 - 1])
        return np.clip(self._s_dense[i0] + shift * step, 0.0, self.arc_length)

    def curvature_table(self):
        """(arc positions, curvature) over the dense sample table."""
        d1 = _bezier_deriv(self._coeffs, self._span_idx, self._u_dense)
        d2 = _bezier_deriv2(self._coeffs, self._span_idx, self._u_dense)
        num = np.linalg.norm(np.cross(d1, d2), axis=1)
        den = np.linalg.norm(d1, axis=1) ** 3
        return self._s_dense, num / np.maximum(den, 1e-30)

    def control_point_arcs(self) -> np.ndarray:
        """Arc position of every control point."""
        return self._knot_arcs


def _bezier_eval(coeffs, span, u):
    c = coeffs[span]
    u = np.asarray(u, dtype=np.float64)[..., None]
    omu = 1.0 - u
    return (omu ** 3 * c[..., 0, :] + 3 * u * omu ** 2 * c[..., 1, :]
            + 3 * u ** 2 * omu * c[..., 2, :] + u ** 3 * c[..., 3, :])


def _bezier_deriv(coeffs, span, u):
    c = coeffs[span]
    u = np.asarray(u, dtype=np.float64)[..., None]
    omu = 1.0 - u
    return (3 * omu ** 2 * (c[..., 1, :] - c[..., 0, :])
            + 6 * u * omu * (c[..., 2, :] - c[..., 1, :])
            + 3 * u ** 2 * (c[..., 3, :] - c[..., 2, :]))


def _bezier_deriv2(coeffs, span, u):
    c = coeffs[span]
    u = np.asarray(u, dtype=np.float64)[..., None]
    return (6 * (1.0 - u) * (c[..., 2, :] - 2 * c[..., 1, :] + c[..., 0, :])
            + 6 * u * (c[..., 3, :] - 2 * c[..., 2, :] + c[..., 1, :]))


# ---------------------------------------------------------------------------
# centerline construction
# ---------------------------------------------------------------------------

def _wall_radius_bound(s, seg_bounds, radius_by_name, pinch_arcs):
    """Upper bound of the wall radius at arc position s (vectorized)."""
    s = np.asarray(s, dtype=np.float64)
    r = np.full(s.shape, radius_by_name[seg_bounds[0][0]])
    for (name, _, s_end), (next_name, _, _) in zip(seg_bounds[:-1], seg_bounds[1:]):
        w = np.clip((s - (s_end - 1.5)) / 3.0, 0.0, 1.0)
        w = w * w * (3.0 - 2.0 * w)
        r = r * (1.0 - w) + radius_by_name[next_name] * w
    for sa in pinch_arcs:
        g = np.exp(-0.5 * ((s - sa) / FLEXURE_PINCH_SIGMA) ** 2)
        r = r * (1.0 - (1.0 - FLEXURE_PINCH) * g)
    return r


def _template_centerline(specs, rng, jitter_cm):
    """One jittered, length-normalized instance of the colon template."""
    pts = _TEMPLATE_POINTS.copy()
    chord = np.empty_like(pts)
    chord[0] = pts[1] - pts[0]
    chord[-1] = pts[-1] - pts[-2]
    chord[1:-1] = pts[2:] - pts[:-2]
    chord /= np.linalg.norm(chord, axis=1, keepdims=True)
    for i in range(1, len(pts) - 1):
        cap = 0.35 if i in _FLEXURE_NEIGHBORHOOD else jitter_cm
        # random direction orthogonal to the local chord
        raw = rng.standard_normal(3)
        raw -= np.dot(raw, chord[i]) * chord[i]
        norm = np.linalg.norm(raw)
        if norm < 1e-12:
            continue
        pts[i] += (rng.uniform(0.0, cap) / norm) * raw
    tangents = _catmull_tangents(pts, _TANGENT_SCALE)

    target = sum(s.length for s in specs)
    probe = Centerline(pts, tangents)
    k = target / probe.arc_length
    line = Centerline(pts * k, tangents * k)

    knots = line.control_point_arcs()
    seg_bounds, s_prev = [], 0.0
    for spec in specs:
        s_end = float(knots[_TEMPLATE_SEG_END[spec.name]])
        seg_bounds.append((spec.name, s_prev, s_end))
        s_prev = s_end
    splenic = _angle_deg(line.control_points[_SPLENIC_APEX - 1] - line.control_points[_SPLENIC_APEX],
                         line.control_points[_SPLENIC_APEX + 1] - line.control_points[_SPLENIC_APEX])
    hepatic = _angle_deg(line.control_points[_HEPATIC_APEX - 1] - line.control_points[_HEPATIC_APEX],
                         line.control_points[_HEPATIC_APEX + 1] - line.control_points[_HEPATIC_APEX])
    return Centerline(
        line.control_points, line.tangents,
        flexure_angles={"splenic": splenic, "hepatic": hepatic},
        flexure_arcs={"splenic": float(knots[_SPLENIC_APEX]), "hepatic": float(knots[_HEPATIC_APEX])},
        segment_bounds=tuple(seg_bounds),
    )


def build_centerline(specs, seed: int = 0, jitter_cm: float = 1.5) -> Centerline:
    """Seeded colon centerline through the template, or a straight line.

    The five standard segment names (in anus->caecum order) select the 3D
    template: interior control points are jittered orthogonally (at most
    jitter_cm, capped at 2 cm), the whole curve is scaled so the arc length
    equals the summed segment lengths, and the draw is rejected until the
    bend radii leave room for the tube wall and both flexure angles stay
    near their targets.  Any other segment list produces straight spans.
    """
    specs = tuple(specs)
    if not specs:
        raise ValueError("need at least one segment")
    for s in specs:
        if s.length <= 0:
            raise ValueError("segment lengths must be positive")
    if not 0.0 <= jitter_cm <= 2.0:
        raise ValueError("jitter_cm must be within [0, 2]")

    if tuple(s.name for s in specs) == SEGMENT_ORDER:
        rng = derive_rng(seed, DOMAIN_CENTERLINE)
        radius_by_name = {s.name: s.nominal_diameter / 2.0 for s in specs}
        for _ in range(_MAX_BUILD_ATTEMPTS):
            line = _template_centerline(specs, rng, jitter_cm)
            if abs(line.flexure_angles["splenic"] - 30.0) > 3.0:
                continue
            if abs(line.flexure_angles["hepatic"] - 40.0) > 3.0:
                continue
            s_tab, kappa = line.curvature_table()
            bound = _wall_radius_bound(s_tab, line.segment_bounds, radius_by_name,
                                       tuple(line.flexure_arcs.values()))
            margin = float(np.min(1.0 / np.maximum(kappa, 1e-30) - bound))
            if margin >= _MIN_BEND_CLEARANCE:
                return line
        raise RuntimeError(f"no acceptable centerline in {_MAX_BUILD_ATTEMPTS} draws for seed {seed}")

    # generic fallback: straight spans along +z, one per segment
    z = np.concatenate([[0.0], np.cumsum([s.length for s in specs])])
    pts = np.zeros((len(z), 3))
    pts[:, 2] = z
    tangents = _catmull_tangents(pts)
    bounds = tuple((s.name, float(z[i]), float(z[i + 1])) for i, s in enumerate(specs))
    return Centerline(pts, tangents, segment_bounds=bounds)


# ---------------------------------------------------------------------------
# cross sections
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CrossSectionProfile:
    """Lumen cross-section shape: angle -> radius, normalized so max = nominal."""

    shape: str                                   # circular | oval | triangular
    radius_fn: Callable[[np.ndarray], np.ndarray]
    segment_binding: tuple = ()                  # segment names using this shape

    def radius(self, theta):
        return self.radius_fn(np.asarray(theta, dtype=np.float64))


def circular_profile(radius: float, segments=()) -> CrossSectionProfile:
    r = float(radius)
    return CrossSectionProfile("circular", lambda th: np.full(np.shape(th), r), tuple(segments))


def oval_profile(radius: float, eccentricity: float = 0.75, segments=()) -> CrossSectionProfile:
    """Elliptic section; `radius` is the semi-major axis (the max radius)."""
    a = float(radius)
    b = a * float(np.sqrt(1.0 - eccentricity ** 2))

    def fn(th):
        th = np.asarray(th, dtype=np.float64)
        return a * b / np.sqrt((b * np.cos(th)) ** 2 + (a * np.sin(th)) ** 2)

    return CrossSectionProfile("oval", fn, tuple(segments))


def triangular_profile(radius: float, lobing: float = 0.18, segments=()) -> CrossSectionProfile:
    """Rounded-triangle section via a three-lobe cosine blend; max radius = `radius`."""
    r, lo = float(radius), float(lobing)

    def fn(th):
        th = np.asarray(th, dtype=np.float64)
        return r * (1.0 + lo * np.cos(3.0 * th)) / (1.0 + lo)

    return CrossSectionProfile("triangular", fn, tuple(segments))


DEFAULT_SHAPE_BINDING = {
    "ascending": "triangular", "transverse": "circular", "descending": "oval",
    "sigmoid": "circular", "rectum": "circular",
}


@dataclass(frozen=True)
class TubeProfile:
    """Arc-position-aware radius field for a whole multi-segment tube.

    Blends per-segment cross sections across 3 cm transition zones and
    narrows the lumen near flexure apexes (Gaussian pinch).
    """

    profiles: tuple                      # CrossSectionProfile per segment, in order
    seg_bounds: tuple                    # ((name, s_start, s_end), ...)
    pinch_arcs: tuple = ()
    pinch: float = FLEXURE_PINCH
    pinch_sigma: float = FLEXURE_PINCH_SIGMA

    def radius(self, s, theta):
        """Radius at (arc position, angle); broadcasts (A,), (R,) -> (A, R)."""
        s = np.atleast_1d(np.asarray(s, dtype=np.float64))[:, None]
        theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))[None, :]
        r = np.broadcast_to(self.profiles[0].radius(theta), (s.shape[0], theta.shape[1])).copy()
        for (name, _, s_end), prof in zip(self.seg_bounds[:-1], self.profiles[1:]):
            w = np.clip((s - (s_end - 1.5)) / 3.0, 0.0, 1.0)
            w = w * w * (3.0 - 2.0 * w)
            r = r * (1.0 - w) + prof.radius(theta) * w
        return r * self.pinch_factor(s[:, 0])[:, None]

    def pinch_factor(self, s):
        s = np.asarray(s, dtype=np.float64)
        f = np.ones(s.shape)
        for sa in self.pinch_arcs:
            g = np.exp(-0.5 * ((s - sa) / self.pinch_sigma) ** 2)
            f = f * (1.0 - (1.0 - self.pinch) * g)
        return f

    def mean_radius(self, s):
        """Mean radius over angle at arc position(s) s."""
        theta = np.linspace(0.0, 2.0 * np.pi, 256, endpoint=False)
        return self.radius(s, theta).mean(axis=1)


def build_tube_profile(centerline: Centerline, specs, seed: int = 0,
                       deformed: bool = True) -> TubeProfile:
    """Per-segment cross sections bound by shape family, seeded parameters.

    With deformed=False every segment is circular (the flexure pinch stays:
    it is what keeps the tube inside its own bends).
    """
    rng = derive_rng(seed, DOMAIN_PROFILE)
    eccentricity = rng.uniform(0.6, 0.85)
    lobing = rng.uniform(0.15, 0.22)
    profiles = []
    for spec in specs:
        r = spec.nominal_diameter / 2.0
        shape = DEFAULT_SHAPE_BINDING.get(spec.name, "circular") if deformed else "circular"
        if shape == "oval":
            profiles.append(oval_profile(r, eccentricity, segments=(spec.name,)))
        elif shape == "triangular":
            profiles.append(triangular_profile(r, lobing, segments=(spec.name,)))
        else:
            profiles.append(circular_profile(r, segments=(spec.name,)))
    seg_bounds = centerline.segment_bounds
    if not seg_bounds:
        s_prev, bounds = 0.0, []
        for spec in specs:
            bounds.append((spec.name, s_prev, s_prev + spec.length))
            s_prev += spec.length
        seg_bounds = tuple(bounds)
    return TubeProfile(tuple(profiles), seg_bounds,
                       pinch_arcs=tuple(centerline.flexure_arcs.values()))


# ---------------------------------------------------------------------------
# tube extrusion
# ---------------------------------------------------------------------------

def extrude_tube(centerline: Centerline, profile, axial_steps: int = 600,
                 radial_steps: int = 96) -> TriMesh:
    """Extrude the cross-section profile along the centerline.

    Produces exactly axial_steps x radial_steps vertices; rings lie in the
    plane orthogonal to the local tangent; ends are open.  Triangles are
    wound so normals face the lumen.
    """
    if axial_steps < 2:
        raise ValueError("axial_steps >= 2 required")
    if radial_steps < 3:
        raise ValueError("radial_steps >= 3 required")

    s = np.linspace(0.0, centerline.arc_length, axial_steps)
    centers = centerline.point_at(s)
    t, n1, n2 = centerline.frame_at(s)
    if np.any(np.linalg.norm(_bezier_deriv(centerline._coeffs, *centerline._locate(s)), axis=1) < 1e-12):
        raise ValueError("degenerate centerline tangent")

    theta = 2.0 * np.pi * np.arange(radial_steps) / radial_steps
    if hasattr(profile, "seg_bounds"):
        radii = profile.radius(s, theta)                       # (A, R)
    else:
        radii = np.broadcast_to(profile.radius(theta), (axial_steps, radial_steps))
    direction = (np.cos(theta)[None, :, None] * n1[:, None, :]
                 + np.sin(theta)[None, :, None] * n2[:, None, :])
    vertices = centers[:, None, :] + radii[..., None] * direction
    vertices = vertices.reshape(-1, 3)

    i = np.arange(axial_steps - 1)[:, None]
    j = np.arange(radial_steps)[None, :]
    jn = (j + 1) % radial_steps
    a = i * radial_steps + j
    b = i * radial_steps + jn
    c = (i + 1) * radial_steps + j
    d = (i + 1) * radial_steps + jn
    tris = np.concatenate([
        np.stack([a, c, b], axis=-1).reshape(-1, 3),
        np.stack([b, c, d], axis=-1).reshape(-1, 3),
    ])
    normals = compute_vertex_normals(vertices, tris)
    return TriMesh(vertices=vertices, triangles=tris, normals=normals)


# ---------------------------------------------------------------------------
# folds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FoldSpec:
    """Ring-shaped constrictions: positions along the arc and target diameters."""

    count: int
    axial_positions: np.ndarray      # cm along the centerline
    fold_diameters: np.ndarray       # cm, the constricted lumen diameter
    axial_falloff_width: float = 0.8

    def __post_init__(self):
        object.__setattr__(self, "axial_positions",
                           np.asarray(self.axial_positions, dtype=np.float64))
        object.__setattr__(self, "fold_diameters",
                           np.asarray(self.fold_diameters, dtype=np.float64))
        if self.count != len(self.axial_positions) or self.count != len(self.fold_diameters):
            raise ValueError("count must match positions and diameters")
        if self.axial_falloff_width <= 0:
            raise ValueError("falloff width must be positive")


def empty_fold_spec() -> FoldSpec:
    return FoldSpec(0, np.empty(0), np.empty(0))


def sample_folds(centerline: Centerline, profile: TubeProfile, seed: int = 0) -> FoldSpec:
    """Draw a fold population: count in [30, 60], spacing in [3, 6] cm,
    diameters in [2.8, 7.5] cm bounded by the local lumen diameter."""
    rng = derive_rng(seed, DOMAIN_FOLDS)
    count = int(rng.integers(30, 61))
    length = centerline.arc_length
    end_margin = 2.0
    usable_end = length - end_margin
    start = end_margin + rng.uniform(0.0, 3.0)
    if start + 3.0 * (count - 1) > usable_end:
        raise ValueError("centerline too short for the requested fold count")
    positions = [start]
    for i in range(1, count):
        remaining = count - 1 - i
        hi = min(6.0, (usable_end - positions[-1]) - 3.0 * remaining)
        positions.append(positions[-1] + rng.uniform(3.0, hi))
    positions = np.asarray(positions)
    local_d = 2.0 * profile.mean_radius(positions)
    hi_d = np.minimum(7.5, 0.95 * local_d)
    diameters = np.where(hi_d > 2.8, rng.uniform(np.full(count, 2.8), np.maximum(hi_d, 2.8 + 1e-9)), 2.8)
    return FoldSpec(count, positions, diameters)


def _vertex_adjacency(n_vertices, triangles):
    """CSR-style adjacency (indptr, indices) over mesh edges."""
    e = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    e = np.concatenate([e, e[:, ::-1]])
    e = np.unique(e, axis=0)
    indptr = np.zeros(n_vertices + 1, dtype=np.int64)
    np.add.at(indptr, e[:, 0] + 1, 1)
    indptr = np.cumsum(indptr)
    return indptr, e[:, 1].copy()


def _laplacian_pass(vertices, indptr, indices, affected, lam=0.5):
    """One umbrella-operator smoothing step restricted to affected vertices."""
    out = vertices.copy()
    idx = np.nonzero(affected)[0]
    for v in idx:
        nb = indices[indptr[v]:indptr[v + 1]]
        if len(nb):
            out[v] = (1.0 - lam) * vertices[v] + lam * vertices[nb].mean(axis=0)
    return out


def apply_folds(mesh: TriMesh, folds: FoldSpec, centerline: Centerline) -> TriMesh:
    """Constrict the tube at each fold position with a Gaussian axial falloff.

    Folds whose target diameter is not below the local lumen diameter are
    skipped with a warning (a fold must constrict).  A single Laplacian
    smoothing pass runs over the affected rings, and amplitudes are
    re-normalized once so the constricted diameter lands on target.
    """
    if folds.count == 0:
        return mesh
    if np.any(folds.axial_positions < 0) or np.any(folds.axial_positions > centerline.arc_length):
        raise ValueError("fold positions must lie within the centerline arc length")

    s_v = centerline.project(mesh.vertices)
    axis_pts = centerline.point_at(s_v)
    radial = mesh.vertices - axis_pts
    rho = np.linalg.norm(radial, axis=1)
    sigma = folds.axial_falloff_width / 1.7     # keeps deformation < 1% beyond 2 widths

    def band_diameter(radii, s_k, half_width):
        # coarse meshes may have no ring inside the band: widen to the nearest
        band = np.abs(s_v - s_k) < half_width
        while not np.any(band):
            half_width *= 2.0
            band = np.abs(s_v - s_k) < half_width
        return 2.0 * radii[band].mean()

    # local lumen diameter at each fold from the undeformed mesh
    local_d = np.empty(folds.count)
    for k, s_k in enumerate(folds.axial_positions):
        local_d[k] = band_diameter(rho, s_k, 0.5)
    keep = folds.fold_diameters < local_d
    for k in np.nonzero(~keep)[0]:
        warnings.warn(
            f"fold at s={folds.axial_positions[k]:.1f} cm skipped: "
            f"diameter {folds.fold_diameters[k]:.2f} does not constrict "
            f"local diameter {local_d[k]:.2f}")
    if not np.any(keep):
        return mesh

    pos = folds.axial_positions[keep]
    amp = 1.0 - folds.fold_diameters[keep] / local_d[keep]
    indptr, indices = _vertex_adjacency(mesh.n_vertices, mesh.triangles)

    def deform(amplitudes):
        dev = np.zeros(len(s_v))
        for s_k, a_k in zip(pos, amplitudes):
            dev += a_k * np.exp(-0.5 * ((s_v - s_k) / sigma) ** 2)
        scale = np.maximum(1.0 - dev, 0.1)
        verts = axis_pts + radial * scale[:, None]
        affected = dev > 1e-4
        return _laplacian_pass(verts, indptr, indices, affected), affected

    verts, _ = deform(amp)
    # one re-normalization: measure achieved constriction, correct amplitudes
    achieved = np.empty(len(pos))
    new_rho = np.linalg.norm(verts - axis_pts, axis=1)
    for k, s_k in enumerate(pos):
        achieved[k] = band_diameter(new_rho, s_k, 0.3)
    target = folds.fold_diameters[keep]
    base = local_d[keep]
    gap = base - achieved
    correction = np.where(np.abs(gap) > 1e-9, (base - target) / np.where(np.abs(gap) > 1e-9, gap, 1.0), 1.0)
    verts, _ = deform(amp * correction)
    return mesh.with_vertices(verts)


# ---------------------------------------------------------------------------
# polyps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PolypSpec:
    """One polyp: size, wall anchor, and shape randomization parameters."""

    base_diameter: float                 # mm
    wall_anchor: tuple                   # (arc position cm, angle rad)
    deformation_seed: int
    max_radial_perturbation: float = 0.10

    def __post_init__(self):
        if self.base_diameter <= 0:
            raise ValueError("base_diameter must be positive")
        if not 0.0 <= self.max_radial_perturbation <= 0.10:
            raise ValueError("radial perturbation is limited to 10% of the radius")


POLYP_MATERIAL = 1


def make_polyp(spec: PolypSpec, n_lat: int = 32, n_lon: int = 64) -> TriMesh:
    """Deformed sphere: per-vertex radius within ±10% of the base radius."""
    r_cm = spec.base_diameter / 2.0 / 10.0
    sphere = uv_sphere(r_cm, n_lat, n_lon)
    if spec.max_radial_perturbation > 0.0:
        unit = sphere.vertices / r_cm
        bump = fbm3(unit * 2.5, octaves=3, seed=spec.deformation_seed)
        verts = sphere.vertices * (1.0 + spec.max_radial_perturbation * bump)[:, None]
        sphere = sphere.with_vertices(verts)
    return TriMesh(sphere.vertices, sphere.triangles, sphere.normals,
                   material=np.full(sphere.n_vertices, POLYP_MATERIAL, dtype=np.int32))


def sample_polyps(centerline: Centerline, seed: int = 0,
                  perturbation: float = 0.10,
                  profile: TubeProfile | None = None) -> tuple[PolypSpec, ...]:
    """Draw a polyp population: count 10±2, diameters 5-30 mm, spread anchors.

    With a profile given, draws whose sphere would fill more than 75% of the
    local lumen radius are rejected (a polyp that seals a pinched flexure
    would leave no room for the camera).
    """
    rng = derive_rng(seed, DOMAIN_POLYPS)
    count = int(rng.integers(8, 13))
    length = centerline.arc_length
    specs: list[PolypSpec] = []
    while len(specs) < count:
        d_mm = float(rng.uniform(5.0, 30.0))
        s = float(rng.uniform(4.0, length - 4.0))
        phi = float(rng.uniform(0.0, 2.0 * np.pi))
        if profile is not None:
            reach = 1.1 * d_mm / 20.0
            if reach > 0.75 * float(profile.mean_radius(s)[0]):
                continue
        anchor_pt = centerline.point_at(s)
        clear = all(
            np.linalg.norm(anchor_pt - centerline.point_at(other.wall_anchor[0])) >= max(d_mm, other.base_diameter) / 10.0
            for other in specs
        )
        if not clear:
            continue
        specs.append(PolypSpec(d_mm, (s, phi), int(rng.integers(0, 2 ** 62)),
                               max_radial_perturbation=perturbation))
    return tuple(specs)


def attach_polyps(mesh: TriMesh, specs, centerline: Centerline) -> TriMesh:
    """Blend polyps into the wall at their anchors; protrusion height ≈ radius.

    Anchors closer than one polyp diameter are re-drawn (10 tries, then
    error).  Each polyp sphere is centered exactly on the wall, and the
    surrounding wall gets a cosine skirt (width 0.3 x radius) toward the
    lumen so the junction has no crease.
    """
    specs = tuple(specs)
    if not specs:
        return mesh
    length = centerline.arc_length
    for spec in specs:
        if not 0.0 <= spec.wall_anchor[0] <= length:
            raise ValueError("polyp anchor outside the centerline arc length")

    s_v = centerline.project(mesh.vertices)
    axis_pts = centerline.point_at(s_v)
    radial = mesh.vertices - axis_pts
    rho = np.linalg.norm(radial, axis=1)

    def wall_point(s, phi):
        t, n1, n2 = centerline.frame_at(s)
        direction = np.cos(phi) * n1 + np.sin(phi) * n2
        band = np.abs(s_v - s) < 0.5
        if np.any(band):
            theta_v = np.arctan2(np.einsum("ij,j->i", radial[band], n2),
                                 np.einsum("ij,j->i", radial[band], n1))
            near = np.abs(np.angle(np.exp(1j * (theta_v - phi)))) < 0.35
            r_wall = rho[band][near].mean() if np.any(near) else rho[band].mean()
        else:
            r_wall = rho.mean()
        return centerline.point_at(s) + r_wall * direction

    placed: list[tuple[PolypSpec, np.ndarray]] = []
    for spec in specs:
        s, phi = spec.wall_anchor
        for attempt in range(11):
            w = wall_point(s, phi)
            min_sep_ok = all(
                np.linalg.norm(w - w_other) >= max(spec.base_diameter, other.base_diameter) / 10.0
                for other, w_other in placed
            )
            if min_sep_ok:
                break
            if attempt == 10:
                raise RuntimeError("could not place polyp without overlap after 10 re-draws")
            redraw = derive_rng(spec.deformation_seed, DOMAIN_ANCHOR_REDRAW, attempt)
            s = float(redraw.uniform(2.0, length - 2.0))
            phi = float(redraw.uniform(0.0, 2.0 * np.pi))
        placed.append((PolypSpec(spec.base_diameter, (s, phi), spec.deformation_seed,
                                 spec.max_radial_perturbation), w))

    # cosine skirt: pull nearby wall slightly toward the lumen
    verts = mesh.vertices.copy()
    inward = -radial / np.maximum(rho, 1e-12)[:, None]
    for spec, w in placed:
        r = spec.base_diameter / 2.0 / 10.0
        dist = np.linalg.norm(verts - w, axis=1)
        inside = dist < 1.3 * r
        if not np.any(inside):
            continue
        x = np.clip((dist[inside] - r) / (0.3 * r), 0.0, 1.0)
        height = 0.15 * r * 0.5 * (1.0 + np.cos(np.pi * x))
        verts[inside] += height[:, None] * inward[inside]
    result = mesh.with_vertices(verts)

    for spec, w in placed:
        polyp = make_polyp(spec)
        polyp = TriMesh(polyp.vertices + w, polyp.triangles, polyp.normals, polyp.material)
        result = merge_meshes(result, polyp)
    return result
