"""Depth-estimation training harness for rendered endoscopy datasets.

Consumes video directories through their on-disk contract (manifest.json,
RGB/depth PNGs, raw-float grids, and the dataset CLI); never imports the
generator package.
"""

from .data import (DepthEncoding, FrameDataset, decode_depth, encode_depth,
                   half_res_target, load_depth_cm, load_manifest, load_rgb)
from .losses import (DEFAULT_WEIGHTS, DepthLoss, breakdown, gaussian_taps,
                     hessian_kernel_bank, loss_c, loss_e, loss_z, total_loss)
from .net import TinyNet
from .parity import compare_with_reference, loss_via_cli, torch_breakdown
from .raw import load_raw, save_raw
from .schedule import Stage, curriculum_stages, transfer_stage
from .train import (EpochRecord, TrainConfig, Trainer, TrainReport,
                    evaluate_threshold)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_WEIGHTS", "DepthEncoding", "DepthLoss", "EpochRecord",
    "FrameDataset", "Stage", "TinyNet", "TrainConfig", "TrainReport",
    "Trainer", "breakdown", "compare_with_reference", "curriculum_stages",
    "decode_depth", "encode_depth", "evaluate_threshold", "gaussian_taps",
    "half_res_target", "hessian_kernel_bank", "load_depth_cm",
    "load_manifest", "load_raw", "load_rgb", "loss_c", "loss_e",
    "loss_via_cli", "loss_z", "save_raw", "torch_breakdown", "total_loss",
    "transfer_stage",
]
