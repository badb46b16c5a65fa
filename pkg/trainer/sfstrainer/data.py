"""Dataset access through the on-disk video format.

A video directory holds manifest.json plus rgb_*.png / depth_*.png frame
pairs. RGB frames are 8-bit sRGB; depth frames are 16-bit PNGs holding linear
codes round(d / d_max * scale). The manifest's depth_encoding block carries
the decode parameters and the gamma curve the training target uses.

Targets are built as gamma-encoded depth, (d / d_max) ** gamma, averaged
down to half resolution with a 2x2 mean, matching the network's output head.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image
from torch.utils.data import Dataset


@dataclass(frozen=True)
class DepthEncoding:
    """Decode parameters for depth PNGs plus the target gamma curve."""

    scale: float
    d_max_cm: float
    gamma: float

    @classmethod
    def from_manifest(cls, manifest: dict) -> "DepthEncoding":
        enc = manifest["depth_encoding"]
        return cls(scale=float(enc["scale"]),
                   d_max_cm=float(enc["d_max_cm"]),
                   gamma=float(enc["consumer_gamma"]["gamma"]))


def load_manifest(video_dir) -> dict:
    """Read and lightly validate a video manifest."""
    path = Path(video_dir) / "manifest.json"
    with open(path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    for key in ("video_id", "level", "frames", "depth_encoding"):
        if key not in manifest:
            raise ValueError(f"{path}: missing manifest key {key!r}")
    return manifest


def load_rgb(path) -> np.ndarray:
    """8-bit RGB PNG as float32 (H, W, 3) in [0, 1]."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"), dtype=np.float32)
    return arr / 255.0


def load_depth_cm(path, encoding: DepthEncoding) -> np.ndarray:
    """16-bit depth PNG decoded to float32 centimetres."""
    with Image.open(path) as img:
        codes = np.asarray(img, dtype=np.float32)
    return codes * (encoding.d_max_cm / encoding.scale)


def encode_depth(depth_cm: np.ndarray, encoding: DepthEncoding) -> np.ndarray:
    """Gamma-encode depth onto [0, 1]: (d / d_max) ** gamma."""
    unit = np.clip(depth_cm / encoding.d_max_cm, 0.0, 1.0)
    return np.power(unit, encoding.gamma, dtype=np.float32)


def decode_depth(encoded: torch.Tensor, encoding: DepthEncoding) -> torch.Tensor:
    """Invert the gamma curve back to centimetres."""
    return encoding.d_max_cm * torch.clamp(encoded, 0.0, 1.0) ** (1.0 / encoding.gamma)


def half_res_target(encoded: np.ndarray) -> torch.Tensor:
    """2x2 mean pool of a gamma-encoded depth map, as a (1, H/2, W/2) tensor."""
    t = torch.from_numpy(np.ascontiguousarray(encoded))[None, None]
    return F.avg_pool2d(t, kernel_size=2, stride=2)[0]


class FrameDataset(Dataset):
    """Frames of one or more videos as (rgb, half-res gamma target) pairs.

    Decoded PNGs are cached in their compact integer form so repeated epochs
    do not pay the decode cost twice.
    """

    def __init__(self, video_dirs, cache: bool = True):
        if isinstance(video_dirs, (str, Path)):
            video_dirs = [video_dirs]
        self.items = []
        self.encoding = None
        for video_dir in video_dirs:
            root = Path(video_dir)
            manifest = load_manifest(root)
            enc = DepthEncoding.from_manifest(manifest)
            if self.encoding is None:
                self.encoding = enc
            elif enc != self.encoding:
                raise ValueError("videos in one dataset must share an encoding")
            for frame in manifest["frames"]:
                self.items.append((root / frame["rgb"], root / frame["depth"]))
        if not self.items:
            raise ValueError("no frames found in the given video directories")
        self._cache = {} if cache else None

    def __len__(self) -> int:
        return len(self.items)

    def _arrays(self, index: int):
        if self._cache is not None and index in self._cache:
            return self._cache[index]
        rgb_path, depth_path = self.items[index]
        with Image.open(rgb_path) as img:
            rgb_u8 = np.asarray(img.convert("RGB"))
        with Image.open(depth_path) as img:
            codes = np.asarray(img, dtype=np.uint16)
        if self._cache is not None:
            self._cache[index] = (rgb_u8, codes)
        return rgb_u8, codes

    def __getitem__(self, index: int):
        rgb_u8, codes = self._arrays(index)
        rgb = torch.from_numpy(rgb_u8.astype(np.float32) / 255.0).permute(2, 0, 1)
        depth_cm = codes.astype(np.float32) * (self.encoding.d_max_cm
                                               / self.encoding.scale)
        target = half_res_target(encode_depth(depth_cm, self.encoding))
        return rgb, target
