"""Back-projection of depth maps to 3D points and PLY/2.5d exports.

For a centered pixel (u, v) with planar depth d and focal length f px:
x = d * u / f, y = d * v / f, z = d (principal point at the image center).
Pixels at the 25 cm clamp carry no geometry and are dropped.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .render import MAX_DEPTH_CM, DepthMap, RgbFrame
from .scene import CameraPose, Intrinsics


@dataclass(frozen=True)
class PointCloud:
    """Camera-frame points in cm with optional colors."""

    points: np.ndarray                 # (n, 3) float64
    colors: np.ndarray | None = None   # (n, 3) uint8
    frame_id: str = ""

    def __post_init__(self):
        p = np.asarray(self.points, dtype=np.float64)
        if p.ndim != 2 or p.shape[1] != 3:
            raise ValueError("points must be (n, 3)")
        if self.colors is not None:
            c = np.asarray(self.colors)
            if c.shape != p.shape or c.dtype != np.uint8:
                raise ValueError("colors must be (n, 3) uint8")
            object.__setattr__(self, "colors", c)
        object.__setattr__(self, "points", p)

    def __len__(self) -> int:
        return len(self.points)

    def to_world(self, pose: CameraPose) -> "PointCloud":
        """Rotate/translate camera-frame points into the world frame."""
        world = self.points @ pose.rotation().T + pose.position
        return PointCloud(world, self.colors, self.frame_id)


def _pixel_grid(intrinsics: Intrinsics):
    u = np.arange(intrinsics.width) - intrinsics.width / 2.0 + 0.5
    v = np.arange(intrinsics.height) - intrinsics.height / 2.0 + 0.5
    return np.meshgrid(u, v)


def backproject(depth: DepthMap, intrinsics: Intrinsics,
                rgb: RgbFrame | None = None, frame_id: str = "") -> PointCloud:
    """Lift a depth map to camera-frame 3D; clamped pixels are misses."""
    if (depth.height, depth.width) != (intrinsics.height, intrinsics.width):
        raise ValueError("depth dimensions do not match the intrinsics")
    if rgb is not None and (rgb.height, rgb.width) != (depth.height, depth.width):
        raise ValueError("rgb dimensions do not match the depth map")
    uu, vv = _pixel_grid(intrinsics)
    d = depth.values
    keep = (d > 0.0) & (d < MAX_DEPTH_CM)
    f = intrinsics.focal_px
    points = np.column_stack([
        (d[keep] * uu[keep] / f),
        (d[keep] * vv[keep] / f),
        d[keep],
    ])
    colors = rgb.pixels[keep] if rgb is not None else None
    return PointCloud(points, colors, frame_id)


# ---------------------------------------------------------------------------
# PLY exports
# ---------------------------------------------------------------------------

_CAMERA_TAG = 1
_PYRAMID_SCALE = 0.5     # cm, marker size for the camera pose


def _camera_pyramid(pose: CameraPose | None) -> np.ndarray:
    """Five vertices: apex at the camera, square base one unit forward."""
    if pose is None:
        apex = np.zeros(3)
        forward = np.array([0.0, 0.0, 1.0])
        down = np.array([0.0, 1.0, 0.0])
        right = np.array([1.0, 0.0, 0.0])
    else:
        apex = pose.position
        rot = pose.rotation()
        right, down, forward = rot[:, 0], rot[:, 1], rot[:, 2]
    s = _PYRAMID_SCALE
    base = apex + s * forward
    verts = [apex,
             base + s * (right + down) * 0.5,
             base + s * (right - down) * 0.5,
             base - s * (right + down) * 0.5,
             base - s * (right - down) * 0.5]
    return np.asarray(verts)


def export_ply(cloud: PointCloud, path, camera: CameraPose | None = None,
               include_camera_marker: bool = True) -> None:
    """ASCII PLY point cloud, plus a 5-vertex camera pyramid tagged with
    marker=1 so viewers and parsers can separate it from surface points."""
    if len(cloud) == 0:
        raise ValueError("refusing to export an empty point cloud")
    pyramid = _camera_pyramid(camera) if include_camera_marker else np.zeros((0, 3))
    n = len(cloud) + len(pyramid)
    has_color = cloud.colors is not None
    lines = [
        "ply",
        "format ascii 1.0",
        f"comment frame {cloud.frame_id}" if cloud.frame_id else "comment depth back-projection",
        f"element vertex {n}",
        "property double x",
        "property double y",
        "property double z",
    ]
    if has_color:
        lines += ["property uchar red", "property uchar green",
                  "property uchar blue"]
    lines += ["property uchar marker", "end_header"]
    for i, p in enumerate(cloud.points):
        row = f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g}"
        if has_color:
            c = cloud.colors[i]
            row += f" {c[0]} {c[1]} {c[2]}"
        lines.append(row + " 0")
    for p in pyramid:
        row = f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g}"
        if has_color:
            row += " 255 255 255"
        lines.append(row + f" {_CAMERA_TAG}")
    Path(path).write_text("\n".join(lines) + "\n")


def export_surface(depth: DepthMap, path) -> None:
    """2.5d height field: vertex (u, v, depth) per pixel, quads split in two.

    u and v are centered pixel coordinates; z is depth in cm, so the mesh
    is a direct plot of depth as a function of the image plane.
    """
    h, w = depth.height, depth.width
    if h < 2 or w < 2:
        raise ValueError("surface export needs at least a 2x2 depth map")
    uu = np.arange(w) - w / 2.0 + 0.5
    vv = np.arange(h) - h / 2.0 + 0.5
    gu, gv = np.meshgrid(uu, vv)
    verts = np.column_stack([gu.ravel(), gv.ravel(), depth.values.ravel()])
    idx = np.arange(h * w).reshape(h, w)
    a = idx[:-1, :-1].ravel()
    b = idx[:-1, 1:].ravel()
    c = idx[1:, 1:].ravel()
    d = idx[1:, :-1].ravel()
    tris = np.concatenate([np.column_stack([a, b, c]),
                           np.column_stack([a, c, d])])
    lines = [
        "ply",
        "format ascii 1.0",
        "comment 2.5d depth surface",
        f"element vertex {len(verts)}",
        "property double x",
        "property double y",
        "property double z",
        f"element face {len(tris)}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    for p in verts:
        lines.append(f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g}")
    for t in tris:
        lines.append(f"3 {t[0]} {t[1]} {t[2]}")
    Path(path).write_text("\n".join(lines) + "\n")
