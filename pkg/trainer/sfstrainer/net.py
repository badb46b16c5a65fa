"""Tiny encoder-decoder depth network.

Input is a full-resolution RGB frame; output is a single-channel map at half
resolution in gamma-encoded depth space [0, 1]. The stem downsamples
immediately (the target lives at half resolution, so nothing is computed at
full resolution), three more strided stages reach 1/16 scale, and the decoder
climbs back to 1/2 with additive long skips. About a quarter million
parameters, small enough to train on a single CPU core.
"""

import math

import torch
import torch.nn.functional as F
from torch import nn


class TinyNet(nn.Module):

    def __init__(self):
        super().__init__()
        self.stem = nn.Conv2d(3, 16, 3, stride=2, padding=1)
        self.enc1a = nn.Conv2d(16, 32, 3, stride=2, padding=1)
        self.enc1b = nn.Conv2d(32, 32, 3, padding=1)
        self.enc2a = nn.Conv2d(32, 64, 3, stride=2, padding=1)
        self.enc2b = nn.Conv2d(64, 64, 3, padding=1)
        self.enc3 = nn.Conv2d(64, 128, 3, stride=2, padding=1)
        self.dec3 = nn.Conv2d(128, 64, 3, padding=1)
        self.dec2 = nn.Conv2d(64, 32, 3, padding=1)
        self.dec1 = nn.Conv2d(32, 16, 3, padding=1)
        self.head = nn.Conv2d(16, 1, 3, padding=1)

    @staticmethod
    def _up(x: torch.Tensor) -> torch.Tensor:
        return F.interpolate(x, scale_factor=2, mode="nearest")

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 4 or x.shape[1] != 3:
            raise ValueError("expected a (B, 3, H, W) batch")
        h, w = x.shape[2], x.shape[3]
        hp = math.ceil(h / 16) * 16
        wp = math.ceil(w / 16) * 16
        if (hp, wp) != (h, w):
            x = F.pad(x, (0, wp - w, 0, hp - h), mode="replicate")

        s0 = F.relu(self.stem(x))                     # 1/2
        s1 = F.relu(self.enc1b(F.relu(self.enc1a(s0))))   # 1/4
        s2 = F.relu(self.enc2b(F.relu(self.enc2a(s1))))   # 1/8
        deep = F.relu(self.enc3(s2))                  # 1/16
        d = F.relu(self.dec3(self._up(deep)) + s2)    # 1/8
        d = F.relu(self.dec2(self._up(d)) + s1)       # 1/4
        d = F.relu(self.dec1(self._up(d)) + s0)       # 1/2
        out = torch.sigmoid(self.head(d))
        return out[:, :, : h // 2, : w // 2]

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())
