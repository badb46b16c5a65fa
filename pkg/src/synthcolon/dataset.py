"""Dataset factory: build colon models, render videos, write manifests.

File layout per video: one directory holding rgb_XXXXX.png (8-bit sRGB),
depth_XXXXX.png (16-bit grayscale storing round(d / 25 * 65535), linear),
and manifest.json. Collections add an index.json next to the video
directories. Gamma encoding is applied by consumers, never baked into the
stored depth files.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .anatomy import (apply_folds, attach_polyps, build_centerline,
                      build_tube_profile, default_segments, empty_fold_spec,
                      extrude_tube, sample_folds, sample_polyps)
from .bvh import build_bvh
from .levels import LevelConfig, level_config
from .render import (MAX_DEPTH_CM, RenderSettings, auto_exposure, render_frame,
                     render_linear)
from .scene import (LIGHT_CONE_FALLOFF_START_DEG, LIGHT_CONE_HALF_ANGLE_DEG,
                    LightSource, assign_materials, displace_surface,
                    generate_camera_path, intrinsics_for, surface_noise_params)

MANIFEST_VERSION = 1
DEPTH_SCALE = 65535


# ---------------------------------------------------------------------------
# gamma codec
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GammaSpec:
    """Power-law depth compression favoring near and mid range."""

    gamma: float = 0.66
    d_max: float = MAX_DEPTH_CM

    def __post_init__(self):
        if not (0.0 < self.gamma <= 1.0):
            raise ValueError("gamma must be in (0, 1]")
        if self.d_max <= 0.0:
            raise ValueError("d_max must be positive")

    def apply(self, depth: np.ndarray) -> np.ndarray:
        """(d / d_max) ** gamma, mapping [0, d_max] onto [0, 1]."""
        depth = np.asarray(depth, dtype=np.float64)
        if np.any(depth < 0.0):
            raise ValueError("depth values must be non-negative")
        if np.any(depth > self.d_max * (1.0 + 1e-12)):
            raise ValueError(f"depth values must not exceed {self.d_max}")
        return np.power(depth / self.d_max, self.gamma)

    def invert(self, encoded: np.ndarray) -> np.ndarray:
        """Inverse of apply; exact at 0 and 1, < 1e-9 relative elsewhere."""
        encoded = np.asarray(encoded, dtype=np.float64)
        if np.any(encoded < 0.0) or np.any(encoded > 1.0 + 1e-12):
            raise ValueError("encoded values must lie in [0, 1]")
        return self.d_max * np.power(encoded, 1.0 / self.gamma)

    def to_dict(self) -> dict:
        return {"gamma": self.gamma, "d_max_cm": self.d_max}


# ---------------------------------------------------------------------------
# PNG depth/rgb codecs
# ---------------------------------------------------------------------------

def save_rgb_png(path, pixels: np.ndarray) -> None:
    Image.fromarray(np.ascontiguousarray(pixels), mode="RGB").save(path,
                                                                   format="PNG")


def load_rgb_png(path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def save_depth_png(path, depth_cm: np.ndarray) -> None:
    """16-bit linear code: round(d / 25 * 65535)."""
    depth_cm = np.asarray(depth_cm, dtype=np.float64)
    if depth_cm.min() < 0.0 or depth_cm.max() > MAX_DEPTH_CM + 1e-9:
        raise ValueError("depth must lie in [0, 25] cm")
    codes = np.rint(depth_cm / MAX_DEPTH_CM * DEPTH_SCALE).astype(np.uint16)
    Image.fromarray(codes).save(path, format="PNG")


def load_depth_png(path) -> np.ndarray:
    """Decode back to cm (float64); quantization ~0.0002 cm per step."""
    with Image.open(path) as img:
        codes = np.asarray(img, dtype=np.uint16)
    return codes.astype(np.float64) / DEPTH_SCALE * MAX_DEPTH_CM


# ---------------------------------------------------------------------------
# model assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ColonModel:
    """One procedural anatomy with its render-ready mesh."""

    config: LevelConfig
    seed: int
    centerline: object
    profile: object
    folds: object
    polyps: tuple
    mesh: object


def build_colon_model(level, seed: int, axial_steps: int = 600,
                      radial_steps: int = 96) -> ColonModel:
    """Assemble the anatomy for one video at the given detail level.

    Order matters: folds and surface noise deform the wall before polyps
    attach, so polyp geometry stays crisp at every level.
    """
    cfg = level if isinstance(level, LevelConfig) else level_config(level)
    segments = default_segments()
    centerline = build_centerline(segments, seed=seed)
    profile = build_tube_profile(centerline, segments, seed=seed,
                                 deformed=cfg.deformed_lumen)
    mesh = extrude_tube(centerline, profile, axial_steps=axial_steps,
                        radial_steps=radial_steps)
    if cfg.folds:
        folds = sample_folds(centerline, profile, seed=seed)
        mesh = apply_folds(mesh, folds, centerline)
    else:
        folds = empty_fold_spec()
    if cfg.surface_irregularities:
        mesh = displace_surface(mesh, surface_noise_params(seed=seed))
    perturbation = 0.10 if cfg.polyp_variant == "deformed" else 0.0
    polyps = sample_polyps(centerline, seed=seed, perturbation=perturbation,
                           profile=profile)
    mesh = attach_polyps(mesh, polyps, centerline)
    return ColonModel(config=cfg, seed=seed, centerline=centerline,
                      profile=profile, folds=folds, polyps=tuple(polyps),
                      mesh=mesh)


# ---------------------------------------------------------------------------
# video generation
# ---------------------------------------------------------------------------

def _video_id(level: int, seed: int) -> str:
    return f"level{level}_seed{seed:04d}"


def generate_video(level, seed: int, n_frames: int, out_dir,
                   width: int = 1280, height: int = 1080, fps: int = 15,
                   supersample: int = 1, axial_steps: int = 600,
                   radial_steps: int = 96, model: ColonModel | None = None,
                   threads: int | None = None) -> dict:
    """Render one withdrawal video; returns the manifest it wrote.

    Exposure is fixed for the whole video from the first frame so the
    appearance stays stable. Output bits depend only on the arguments,
    never on the thread count.
    """
    if n_frames < 1:
        raise ValueError("n_frames must be at least 1")
    if threads is not None:
        import numba
        numba.set_num_threads(threads)
    cfg = level if isinstance(level, LevelConfig) else level_config(level)
    if model is None:
        model = build_colon_model(cfg, seed, axial_steps=axial_steps,
                                  radial_steps=radial_steps)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    accel = build_bvh(model.mesh)
    intrinsics = intrinsics_for(width, height)
    # the path sampler needs two poses to orient the last camera
    poses = generate_camera_path(model.centerline, model.mesh,
                                 max(n_frames, 2), seed=seed)[:n_frames]

    table0 = assign_materials(model.mesh, cfg, 0, seed)
    radiance0, _ = render_linear(accel, model.mesh, table0, poses[0],
                                 intrinsics, LightSource(poses[0].position))
    exposure = auto_exposure(radiance0)

    frames = []
    for k, pose in enumerate(poses):
        table = assign_materials(model.mesh, cfg, k, seed)
        settings = RenderSettings(exposure=exposure, supersample=supersample)
        rgb, depth = render_frame(accel, model.mesh, table, pose, intrinsics,
                                  LightSource(pose.position), settings)
        rgb_name = f"rgb_{k:05d}.png"
        depth_name = f"depth_{k:05d}.png"
        try:
            save_rgb_png(out / rgb_name, rgb.pixels)
            save_depth_png(out / depth_name, depth.values)
        except OSError as exc:
            raise OSError(f"failed writing frame under {out}: {exc}") from exc
        frames.append({
            "index": k,
            "rgb": rgb_name,
            "depth": depth_name,
            "camera": {
                "position_cm": [float(v) for v in pose.position],
                "optical_axis": [float(v) for v in pose.optical_axis],
                "up": [float(v) for v in pose.up],
            },
        })

    manifest = {
        "format_version": MANIFEST_VERSION,
        "video_id": _video_id(cfg.level, seed),
        "level": cfg.level,
        "seed": seed,
        "n_frames": n_frames,
        "fps": fps,
        "duration_s": n_frames / fps,
        "width": width,
        "height": height,
        "supersample": supersample,
        "exposure": exposure,
        "split": None,
        "features": {
            "folds": cfg.folds,
            "deformed_lumen": cfg.deformed_lumen,
            "surface_irregularities": cfg.surface_irregularities,
            "specular": cfg.specular,
            "texture": cfg.texture,
            "polyp_variant": cfg.polyp_variant,
        },
        "intrinsics": {
            "width": width,
            "height": height,
            "focal_px": intrinsics.focal_px,
            "focal_cm": intrinsics.focal_cm,
            "horizontal_fov_deg": intrinsics.horizontal_fov,
            "principal_point": [0.0, 0.0],
        },
        "depth_encoding": {
            "convention": "planar_z",
            "format": "png16_linear",
            "scale": DEPTH_SCALE,
            "d_max_cm": MAX_DEPTH_CM,
            "consumer_gamma": GammaSpec().to_dict(),
        },
        "light": {
            "colocated_with_camera": True,
            "cone_half_angle_deg": LIGHT_CONE_HALF_ANGLE_DEG,
            "falloff_start_deg": LIGHT_CONE_FALLOFF_START_DEG,
        },
        "polyps": [
            {
                "base_diameter_mm": float(p.base_diameter),
                "arc_position_cm": float(p.wall_anchor[0]),
                "wall_angle_rad": float(p.wall_anchor[1]),
            }
            for p in model.polyps
        ],
        "frames": frames,
    }
    _write_json(out / "manifest.json", manifest)
    return manifest


def _write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_manifest(path) -> dict:
    manifest = json.loads(Path(path).read_text())
    for key in ("video_id", "level", "seed", "n_frames", "frames",
                "depth_encoding"):
        if key not in manifest:
            raise ValueError(f"{path}: manifest missing '{key}'")
    if len(manifest["frames"]) != manifest["n_frames"]:
        raise ValueError(f"{path}: frame list does not match n_frames")
    return manifest


# ---------------------------------------------------------------------------
# collections and splits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CollectionPlan:
    """How many videos per level, and the shared render parameters."""

    videos_per_level: tuple = (5, 5, 5, 5, 27)
    n_frames: int = 5400
    width: int = 1280
    height: int = 1080
    fps: int = 15
    base_seed: int = 0
    supersample: int = 1
    axial_steps: int = 600
    radial_steps: int = 96

    def __post_init__(self):
        if len(self.videos_per_level) != 5:
            raise ValueError("videos_per_level needs one count per level")
        if any(int(c) < 0 for c in self.videos_per_level):
            raise ValueError("video counts must be non-negative")
        if self.n_frames < 1:
            raise ValueError("n_frames must be at least 1")

    @property
    def total_videos(self) -> int:
        return int(sum(self.videos_per_level))

    @property
    def total_frames(self) -> int:
        return self.total_videos * self.n_frames


def full_plan(base_seed: int = 0) -> CollectionPlan:
    """Production scale: 47 videos, 248 400 frames."""
    return CollectionPlan(base_seed=base_seed)


def desk_plan(base_seed: int = 0, n_frames: int = 60) -> CollectionPlan:
    """Laptop scale: 6 short low-resolution videos."""
    return CollectionPlan(videos_per_level=(1, 1, 1, 1, 2), n_frames=n_frames,
                          width=320, height=270, base_seed=base_seed)


def build_collection(plan: CollectionPlan, out_dir,
                     threads: int | None = None) -> dict:
    """Generate every video in the plan; returns the collection index."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    videos = []
    k = 0
    for level, count in zip(range(1, 6), plan.videos_per_level):
        for _ in range(int(count)):
            seed = plan.base_seed + k
            vid = _video_id(level, seed)
            manifest = generate_video(
                level, seed, plan.n_frames, out / vid, width=plan.width,
                height=plan.height, fps=plan.fps, supersample=plan.supersample,
                axial_steps=plan.axial_steps, radial_steps=plan.radial_steps,
                threads=threads)
            videos.append({
                "video_id": vid,
                "level": level,
                "seed": seed,
                "n_frames": plan.n_frames,
                "path": vid,
                "manifest": f"{vid}/manifest.json",
                "split": None,
            })
            k += 1
    index = {
        "format_version": MANIFEST_VERSION,
        "plan": {
            "videos_per_level": list(plan.videos_per_level),
            "n_frames": plan.n_frames,
            "width": plan.width,
            "height": plan.height,
            "fps": plan.fps,
            "base_seed": plan.base_seed,
        },
        "total_videos": plan.total_videos,
        "total_frames": plan.total_frames,
        "videos": videos,
    }
    _write_json(out / "index.json", index)
    return index


FULL_CL_SPLITS = {1: (4, 1, 0), 2: (4, 1, 0), 3: (4, 1, 0), 4: (4, 1, 0),
                  5: (15, 4, 8)}
LEVEL5_FRACTIONS = (0.55, 0.15, 0.30)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _scaled_counts(n: int, fractions) -> tuple:
    """Split n into train/val/test with round-half-up; test absorbs slack."""
    train = min(_round_half_up(fractions[0] * n), n)
    val = min(_round_half_up(fractions[1] * n), n - train)
    return train, val, n - train - val


def split_collection(videos, strategy: str) -> dict:
    """Assign train/val/test tags; returns {video_id: tag}.

    Curriculum uses every level (Levels 1-4 split 4:1 train:val, Level 5
    split 55/15/30). The single-stage strategy trains on Level 5 only and
    tags Levels 1-4 "unused". Full-scale counts follow the fixed table;
    smaller collections scale proportionally with round-half-up.
    """
    if strategy not in ("cl", "tl"):
        raise ValueError("strategy must be 'cl' or 'tl'")
    by_level = {lv: [] for lv in range(1, 6)}
    for v in videos:
        by_level[int(v["level"])].append(v["video_id"])

    assignment = {}
    for lv in range(1, 6):
        vids = by_level[lv]
        n = len(vids)
        if strategy == "tl" and lv < 5:
            for vid in vids:
                assignment[vid] = "unused"
            continue
        full = FULL_CL_SPLITS[lv]
        if n == sum(full):
            train, val, test = full
        elif lv == 5:
            train, val, test = _scaled_counts(n, LEVEL5_FRACTIONS)
        else:
            train, val, test = _scaled_counts(n, (0.8, 0.2, 0.0))
        if n == 0 or (lv == 5 and n < 2):
            raise ValueError(f"not enough level-{lv} videos to split")
        for vid in vids[:train]:
            assignment[vid] = "train"
        for vid in vids[train:train + val]:
            assignment[vid] = "val"
        for vid in vids[train + val:]:
            assignment[vid] = "test"
    return assignment


def apply_split(index: dict, assignment: dict) -> dict:
    """Stamp split tags into a collection index (returns a new dict)."""
    videos = []
    for v in index["videos"]:
        tag = assignment.get(v["video_id"])
        if tag is None:
            raise ValueError(f"no split tag for {v['video_id']}")
        videos.append({**v, "split": tag})
    return {**index, "videos": videos}
