"""Synthetic colonoscopy dataset toolkit.

Procedural colon meshes, a physically-motivated endoscope renderer with
ground-truth depth, dataset assembly with manifests and splits, depth metrics,
a three-term depth loss with verified gradients, and 3D reconstruction tools.
"""

from .bvh import build_bvh
from .dataset import (CollectionPlan, GammaSpec, apply_split, build_collection,
                      build_colon_model, desk_plan, full_plan, generate_video,
                      load_depth_png, load_manifest, load_rgb_png,
                      save_depth_png, save_rgb_png, split_collection)
from .levels import LevelConfig, level_config
from .loss import (LossBreakdown, grad_check, loss_c, loss_e, loss_gradient,
                   loss_z, total_loss)
from .metrics import MetricReport, binned_rmse, evaluate_depth, rmse, threshold_accuracy
from .rawio import load_raw, save_raw
from .reconstruct import PointCloud, backproject, export_ply, export_surface
from .render import (DepthMap, MAX_DEPTH_CM, RenderSettings, RgbFrame,
                     auto_exposure, render_frame, render_linear)
from .scene import (CameraPose, Intrinsics, LightSource, MaterialTable,
                    assign_materials, generate_camera_path, intrinsics_for)

__version__ = "0.1.0"

__all__ = [
    "CameraPose", "CollectionPlan", "DepthMap", "GammaSpec", "Intrinsics",
    "LevelConfig", "LightSource", "LossBreakdown",
    "MAX_DEPTH_CM", "MaterialTable", "MetricReport", "PointCloud",
    "RenderSettings", "RgbFrame", "apply_split", "assign_materials",
    "auto_exposure", "backproject", "binned_rmse", "build_bvh",
    "build_collection", "build_colon_model", "desk_plan", "evaluate_depth",
    "export_ply", "export_surface", "full_plan", "generate_camera_path",
    "generate_video", "grad_check", "intrinsics_for", "level_config",
    "load_depth_png", "load_manifest", "load_raw", "load_rgb_png", "loss_c",
    "loss_e", "loss_gradient", "loss_z", "render_frame", "render_linear",
    "rmse", "save_depth_png", "save_raw", "save_rgb_png", "split_collection",
    "threshold_accuracy", "total_loss",
]
