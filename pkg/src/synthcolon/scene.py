"""Camera/light trajectory, surface perturbation, and material assignment.

Coordinate conventions: camera space is +x right, +y down (image rows),
+z along the optical axis; pixel coordinates are centered, u in
[-W/2, W/2), v in [-H/2, H/2), principal point at (0, 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .anatomy import Centerline
from .bvh import Bvh, build_bvh
from .mesh import TriMesh
from .noise import fbm3, ridged3, value3, voronoi_f1
from .seeds import DOMAIN_CAMERA, DOMAIN_SURFACE_NOISE, DOMAIN_TEXTURE, derive_rng

HORIZONTAL_FOV_DEG = 110.0
FOCAL_CM = 0.1755
LIGHT_CONE_HALF_ANGLE_DEG = 140.0
LIGHT_CONE_FALLOFF_START_DEG = 130.0

# matte mucosa reflectance per material id (0 wall, 1 polyp)
BASE_ALBEDO = np.array([
    [0.78, 0.47, 0.41],
    [0.72, 0.42, 0.38],
])
SPECULAR_KS = 0.35
SPECULAR_EXPONENT = 60.0


# ---------------------------------------------------------------------------
# camera / light types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Intrinsics:
    """Pinhole camera: 110 degree horizontal FOV, centered principal point."""

    width: int
    height: int
    focal_px: float
    focal_cm: float = FOCAL_CM
    horizontal_fov: float = HORIZONTAL_FOV_DEG
    principal_point: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be positive")
        expected = (self.width / 2.0) / math.tan(math.radians(self.horizontal_fov / 2.0))
        if abs(self.focal_px - expected) > 1e-6 * expected:
            raise ValueError("focal_px inconsistent with width and FOV")

    @property
    def image_size(self) -> tuple:
        return (self.width, self.height)


def intrinsics_for(width: int, height: int) -> Intrinsics:
    """Intrinsics for a given resolution (focal length follows the FOV)."""
    focal_px = (width / 2.0) / math.tan(math.radians(HORIZONTAL_FOV_DEG / 2.0))
    return Intrinsics(width, height, focal_px)


@dataclass(frozen=True)
class CameraPose:
    """Camera position and orientation; axis and up are unit and orthogonal."""

    position: np.ndarray
    optical_axis: np.ndarray
    up: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.position, dtype=np.float64)
        a = np.asarray(self.optical_axis, dtype=np.float64)
        u = np.asarray(self.up, dtype=np.float64)
        if abs(np.linalg.norm(a) - 1.0) > 1e-9 or abs(np.linalg.norm(u) - 1.0) > 1e-9:
            raise ValueError("optical_axis and up must be unit vectors")
        if abs(np.dot(a, u)) > 1e-6:
            raise ValueError("up must be orthogonal to the optical axis")
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "optical_axis", a)
        object.__setattr__(self, "up", u)

    def rotation(self) -> np.ndarray:
        """Camera-to-world rotation, columns (right, down, forward)."""
        down = -self.up
        right = np.cross(down, self.optical_axis)
        return np.column_stack([right, down, self.optical_axis])


@dataclass(frozen=True)
class LightSource:
    """Point light co-located with the camera, cone-limited emission."""

    position: np.ndarray
    cone_half_angle: float = LIGHT_CONE_HALF_ANGLE_DEG
    power: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "position",
                           np.asarray(self.position, dtype=np.float64))
        if not 0.0 < self.cone_half_angle <= 180.0:
            raise ValueError("cone_half_angle must be in (0, 180]")
        if self.power < 0.0:
            raise ValueError("power must be non-negative")


def cone_weight(angle_deg: np.ndarray,
                half_angle: float = LIGHT_CONE_HALF_ANGLE_DEG,
                falloff_start: float = LIGHT_CONE_FALLOFF_START_DEG) -> np.ndarray:
    """Angular emission window: 1 inside falloff_start, cosine taper to the
    cone edge, 0 beyond."""
    angle = np.asarray(angle_deg, dtype=np.float64)
    t = np.clip((angle - falloff_start) / max(half_angle - falloff_start, 1e-12), 0.0, 1.0)
    return 0.5 * (1.0 + np.cos(np.pi * t))


# ---------------------------------------------------------------------------
# withdrawal camera path
# ---------------------------------------------------------------------------

def generate_camera_path(centerline: Centerline, mesh: TriMesh | None,
                         n_frames: int, seed: int = 0,
                         jitter_radius: float = 1.0,
                         clearance: float = 0.8,
                         end_margin: float = 2.0) -> list[CameraPose]:
    """Withdrawal trajectory: caecum to anus along the centerline.

    Each position is the centerline point displaced inside a disc of
    jitter_radius in the plane orthogonal to the tangent; displacements
    leaving less than `clearance` to the wall are re-drawn (20 tries, then
    the undisplaced centerline point).  Optical axes follow the chord to
    the next (anus-ward) position; up vectors are parallel-transported.
    """
    if n_frames < 2:
        raise ValueError("n_frames must be at least 2")
    length = centerline.arc_length
    if length <= 2.0 * end_margin:
        raise ValueError("centerline too short for the camera path")

    accel = build_bvh(mesh) if mesh is not None and jitter_radius > 0.0 else None
    rng = derive_rng(seed, DOMAIN_CAMERA)
    s_vals = np.linspace(length - end_margin, end_margin, n_frames)

    positions = np.empty((n_frames, 3))
    for k, s in enumerate(s_vals):
        center = centerline.point_at(s)
        _, n1, n2 = centerline.frame_at(s)
        pos = center
        if jitter_radius > 0.0:
            for _ in range(20):
                r = jitter_radius * math.sqrt(rng.uniform())
                phi = rng.uniform(0.0, 2.0 * math.pi)
                candidate = center + r * (math.cos(phi) * n1 + math.sin(phi) * n2)
                if accel is None or accel.distance(candidate[None, :])[0] >= clearance:
                    pos = candidate
                    break
        positions[k] = pos

    axes = np.empty((n_frames, 3))
    for k in range(n_frames - 1):
        chord = positions[k + 1] - positions[k]
        norm = np.linalg.norm(chord)
        axes[k] = chord / norm if norm > 1e-12 else -centerline.tangent_at(s_vals[k])
    axes[n_frames - 1] = axes[n_frames - 2]

    # parallel-transport the up vector so the view never rolls abruptly
    _, n1, _ = centerline.frame_at(s_vals[0])
    up = n1 - np.dot(n1, axes[0]) * axes[0]
    if np.linalg.norm(up) < 1e-9:
        up = np.array([0.0, 1.0, 0.0]) - axes[0, 1] * axes[0]
    up = up / np.linalg.norm(up)
    poses = []
    for k in range(n_frames):
        up = up - np.dot(up, axes[k]) * axes[k]
        nrm = np.linalg.norm(up)
        if nrm < 1e-9:
            helper = np.array([1.0, 0.0, 0.0])
            if abs(np.dot(helper, axes[k])) > 0.9:
                helper = np.array([0.0, 1.0, 0.0])
            up = helper - np.dot(helper, axes[k]) * axes[k]
            nrm = np.linalg.norm(up)
        up = up / nrm
        poses.append(CameraPose(positions[k], axes[k], up))
    return poses


# ---------------------------------------------------------------------------
# surface perturbation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseParams:
    """Normal-direction displacement field parameters."""

    amplitude: float = 0.15    # cm
    frequency: float = 0.8     # 1/cm
    octaves: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.amplitude < 0.0:
            raise ValueError("amplitude must be non-negative")
        if self.octaves < 1:
            raise ValueError("octaves must be at least 1")


def displace_surface(mesh: TriMesh, params: NoiseParams) -> TriMesh:
    """Move each vertex along its normal by a bounded gradient-noise field."""
    if params.amplitude == 0.0:
        return mesh
    field = fbm3(mesh.vertices * params.frequency, octaves=params.octaves,
                 seed=params.seed)
    verts = mesh.vertices + mesh.normals * (params.amplitude * field)[:, None]
    return mesh.with_vertices(verts)


def surface_noise_params(seed: int, amplitude: float = 0.15,
                         frequency: float = 0.8, octaves: int = 3) -> NoiseParams:
    """Default irregularity field for one model seed."""
    sub = int(derive_rng(seed, DOMAIN_SURFACE_NOISE).integers(0, 2 ** 62))
    return NoiseParams(amplitude, frequency, octaves, sub)


# ---------------------------------------------------------------------------
# materials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MaterialTable:
    """Per-frame shading inputs: albedo field, specular lobe, texture seeds.

    The color texture parameter seed is re-drawn every 3 frames; the polyp
    cell-texture seed is stable for a whole video so the pattern sticks to
    the surface.
    """

    level: int
    frame_index: int
    specular_ks: float
    specular_exponent: float
    textured: bool
    polyp_texture: bool
    texture_seed: int
    cell_seed: int

    def albedo_at(self, points: np.ndarray, material: np.ndarray) -> np.ndarray:
        """Reflectance at surface points, (n, 3) in [0, 1]."""
        points = np.asarray(points, dtype=np.float64)
        material = np.asarray(material)
        albedo = BASE_ALBEDO[material].copy()
        if self.polyp_texture:
            on_polyp = material == 1
            if np.any(on_polyp):
                f1 = voronoi_f1(points[on_polyp] * 1.8, seed=self.cell_seed)
                albedo[on_polyp] *= (0.78 + 0.22 * np.clip(f1, 0.0, 1.0))[:, None]
        if self.textured:
            for k in range(3):
                gain = 0.85 + 0.30 * value3(points * 0.9 + 17.0 * k,
                                            seed=self.texture_seed)
                albedo[:, k] *= gain
            vessels = ridged3(points * 2.2, octaves=2, seed=self.texture_seed + 1)
            mask = np.clip((vessels - 0.90) / 0.07, 0.0, 1.0)
            mask = mask * mask * (3.0 - 2.0 * mask)
            albedo *= 1.0 - mask[:, None] * np.array([0.25, 0.55, 0.50])
        return np.clip(albedo, 0.0, 1.0)


def assign_materials(mesh: TriMesh, level, frame_index: int, seed: int) -> MaterialTable:
    """Shading inputs for one frame of one video at the given level."""
    if not 1 <= level.level <= 5:
        raise ValueError("level must be 1..5")
    if frame_index < 0:
        raise ValueError("frame_index must be non-negative")
    texture_seed = 0
    if level.texture:
        texture_seed = int(derive_rng(seed, DOMAIN_TEXTURE,
                                      frame_index // 3).integers(0, 2 ** 62))
    cell_seed = int(derive_rng(seed, DOMAIN_TEXTURE).integers(0, 2 ** 62))
    return MaterialTable(
        level=level.level,
        frame_index=frame_index,
        specular_ks=SPECULAR_KS if level.specular else 0.0,
        specular_exponent=SPECULAR_EXPONENT,
        textured=level.texture,
        polyp_texture=level.level >= 4,
        texture_seed=texture_seed,
        cell_seed=cell_seed,
    )
