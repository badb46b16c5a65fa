"""Per-pixel ray-cast renderer: paired sRGB frames and metric depth maps.

Shading model: diffuse albedo * max(w.n, 0) / r^2 plus an albedo-free
specular lobe k_s * max(h.n, 0)^alpha / r^2, with the light co-located
with the camera so the half vector h equals the light direction w.
Depth is planar z (distance to the camera plane along the optical axis),
clamped to 25 cm; misses are black with depth 25.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bvh import Bvh
from .mesh import TriMesh
from .scene import CameraPose, Intrinsics, LightSource, MaterialTable, cone_weight

MAX_DEPTH_CM = 25.0


# ---------------------------------------------------------------------------
# frame containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DepthMap:
    """Per-pixel planar depth in cm, in [0, 25]."""

    values: np.ndarray    # (H, W) float64

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError("depth values must be (H, W)")
        if np.any(~np.isfinite(v)) or v.min() < 0.0 or v.max() > MAX_DEPTH_CM + 1e-9:
            raise ValueError("depth values must be finite and within [0, 25] cm")
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class RgbFrame:
    """8-bit sRGB image."""

    pixels: np.ndarray    # (H, W, 3) uint8

    def __post_init__(self):
        p = np.asarray(self.pixels)
        if p.ndim != 3 or p.shape[2] != 3 or p.dtype != np.uint8:
            raise ValueError("pixels must be (H, W, 3) uint8")
        object.__setattr__(self, "pixels", p)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class RenderSettings:
    exposure: float = 1.0
    supersample: int = 1     # 1 = one ray per pixel, 2 = 2x2 radiance samples

    def __post_init__(self):
        if self.exposure <= 0.0:
            raise ValueError("exposure must be positive")
        if self.supersample not in (1, 2):
            raise ValueError("supersample must be 1 or 2")


# ---------------------------------------------------------------------------
# shading
# ---------------------------------------------------------------------------

def shade(albedo: np.ndarray, normal: np.ndarray, light_dir: np.ndarray,
          distance: np.ndarray, specular: tuple, light: LightSource,
          cone_angle_deg: np.ndarray | None = None) -> np.ndarray:
    """Radiance for surface samples; all array inputs are (n, ...) batches."""
    distance = np.asarray(distance, dtype=np.float64)
    if np.any(distance <= 0.0):
        raise ValueError("light distance must be positive")
    k_s, alpha = specular
    cos_in = np.maximum(np.einsum("ij,ij->i", normal, light_dir), 0.0)
    inv_sq = 1.0 / (distance * distance)
    radiance = albedo * (cos_in * inv_sq)[:, None]
    if k_s > 0.0:
        # h == light_dir: camera and light share one origin
        radiance = radiance + (k_s * cos_in ** alpha * inv_sq)[:, None]
    radiance *= light.power
    if cone_angle_deg is not None:
        radiance *= cone_weight(cone_angle_deg, light.cone_half_angle)[:, None]
    return radiance


def tone_map(linear_rgb: np.ndarray, exposure: float) -> np.ndarray:
    """Exposure-scaled clamp followed by the sRGB transfer, to 8-bit."""
    c = np.clip(np.asarray(linear_rgb, dtype=np.float64) * exposure, 0.0, 1.0)
    srgb = np.where(c <= 0.0031308, 12.92 * c, 1.055 * np.power(c, 1.0 / 2.4) - 0.055)
    return np.rint(srgb * 255.0).astype(np.uint8)


def auto_exposure(radiance: np.ndarray, target: float = 0.85,
                  percentile: float = 90.0) -> float:
    """Exposure mapping the given luminance percentile to `target`."""
    lum = (0.2126 * radiance[..., 0] + 0.7152 * radiance[..., 1]
           + 0.0722 * radiance[..., 2])
    p = float(np.percentile(lum, percentile))
    return target / p if p > 0.0 else 1.0


# ---------------------------------------------------------------------------
# frame rendering
# ---------------------------------------------------------------------------

def _pixel_dirs(intrinsics: Intrinsics, offset_u: float, offset_v: float) -> np.ndarray:
    """World-scale-free camera-space directions with unit z, one per pixel."""
    w, h = intrinsics.width, intrinsics.height
    f = intrinsics.focal_px
    u = (np.arange(w) - w / 2.0 + 0.5 + offset_u) / f
    v = (np.arange(h) - h / 2.0 + 0.5 + offset_v) / f
    uu, vv = np.meshgrid(u, v)
    dirs = np.empty((h * w, 3))
    dirs[:, 0] = uu.ravel()
    dirs[:, 1] = vv.ravel()
    dirs[:, 2] = 1.0
    return dirs


def _trace_radiance(accel: Bvh, mesh: TriMesh, table: MaterialTable,
                    pose: CameraPose, intrinsics: Intrinsics, light: LightSource,
                    offset_u: float, offset_v: float):
    """One ray bundle: (radiance (n,3), planar depth (n,))."""
    rot = pose.rotation()
    dirs = _pixel_dirs(intrinsics, offset_u, offset_v) @ rot.T
    origins = np.broadcast_to(pose.position, dirs.shape)
    t, tri, bu, bv = accel.ray_query(origins, dirs)

    hit = tri >= 0
    depth = np.where(hit, np.minimum(t, MAX_DEPTH_CM), MAX_DEPTH_CM)
    radiance = np.zeros((len(dirs), 3))
    if np.any(hit):
        idx = np.nonzero(hit)[0]
        tv = mesh.triangles[tri[idx]]
        w0 = (1.0 - bu[idx] - bv[idx])[:, None]
        n = (w0 * mesh.normals[tv[:, 0]]
             + bu[idx, None] * mesh.normals[tv[:, 1]]
             + bv[idx, None] * mesh.normals[tv[:, 2]])
        n /= np.maximum(np.linalg.norm(n, axis=1, keepdims=True), 1e-300)
        # material of the dominant corner (ids are per-vertex)
        corner = np.argmax(np.column_stack([w0[:, 0], bu[idx], bv[idx]]), axis=1)
        mat = mesh.material[tv[np.arange(len(idx)), corner]]

        hit_p = pose.position + t[idx, None] * dirs[idx]
        to_cam = pose.position - hit_p
        r = np.linalg.norm(to_cam, axis=1)
        w_dir = to_cam / r[:, None]
        albedo = table.albedo_at(hit_p, mat)
        cos_axis = np.clip(-np.einsum("ij,j->i", w_dir, pose.optical_axis), -1.0, 1.0)
        cone_angle = np.degrees(np.arccos(cos_axis))
        radiance[idx] = shade(albedo, n, w_dir, r,
                              (table.specular_ks, table.specular_exponent),
                              light, cone_angle_deg=cone_angle)
    return radiance, depth


def render_linear(accel: Bvh, mesh: TriMesh, table: MaterialTable,
                  pose: CameraPose, intrinsics: Intrinsics, light: LightSource,
                  settings: RenderSettings = RenderSettings()):
    """Linear radiance (H, W, 3) and its registered DepthMap."""
    if not np.array_equal(light.position, pose.position):
        raise ValueError("light must be co-located with the camera")
    h, w = intrinsics.height, intrinsics.width
    if settings.supersample == 1:
        radiance, depth = _trace_radiance(accel, mesh, table, pose, intrinsics,
                                          light, 0.0, 0.0)
    else:
        radiance = np.zeros((h * w, 3))
        for du, dv in ((-0.25, -0.25), (0.25, -0.25), (-0.25, 0.25), (0.25, 0.25)):
            sub, _ = _trace_radiance(accel, mesh, table, pose, intrinsics,
                                     light, du, dv)
            radiance += sub
        radiance *= 0.25
        # ground-truth depth stays single-surface: center rays only
        _, depth = _trace_radiance(accel, mesh, table, pose, intrinsics,
                                   light, 0.0, 0.0)
    return radiance.reshape(h, w, 3), DepthMap(depth.reshape(h, w))


def render_frame(accel: Bvh, mesh: TriMesh, table: MaterialTable,
                 pose: CameraPose, intrinsics: Intrinsics, light: LightSource,
                 settings: RenderSettings = RenderSettings()):
    """Tone-mapped frame plus depth: (RgbFrame, DepthMap)."""
    radiance, depth = render_linear(accel, mesh, table, pose, intrinsics,
                                    light, settings)
    return RgbFrame(tone_map(radiance, settings.exposure)), depth
