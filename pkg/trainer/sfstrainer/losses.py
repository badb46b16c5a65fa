"""Three-term depth loss in torch.

Reimplements the dataset tools' numerical contract natively so training gets
autograd, and the parity helpers can check the two implementations against
each other through the raw-float interchange format:

- depth term: mean absolute difference
- edge term: mean absolute difference of central-difference gradients
  (stencil [-1/2, 0, 1/2], replicated borders)
- curvature term: mean absolute difference of second-derivative-of-Gaussian
  responses (sigma 3, 12x12 kernels on half-integer taps, correlation
  against a replicate pad of 6 before / 5 after, mixed term counted twice)

All sums are divided by the pixel count of one map; the weighted total is
w1*Lz + w2*Le + w3*Lc with no further normalization.
"""

from functools import lru_cache

import torch
import torch.nn.functional as F
from torch import nn

SIGMA = 3.0
KERNEL_SIZE = 12
PAD_BEFORE = 6
PAD_AFTER = 5
DEFAULT_WEIGHTS = (0.1, 0.3, 0.6)


@lru_cache(maxsize=None)
def gaussian_taps(dtype=torch.float64):
    """12 half-integer taps of a sigma-3 Gaussian and its derivatives.

    The zeroth row is normalized to unit sum; the second-derivative row is
    mean-subtracted so constant inputs give exactly zero response.
    """
    x = torch.arange(KERNEL_SIZE, dtype=dtype) - 5.5
    g0 = torch.exp(-x * x / (2.0 * SIGMA * SIGMA))
    z = g0.sum()
    g = g0 / z
    g1 = (-x / SIGMA ** 2) * g0 / z
    g2 = ((x * x - SIGMA ** 2) / SIGMA ** 4) * g0 / z
    g2 = g2 - g2.mean()
    return g, g1, g2


@lru_cache(maxsize=None)
def hessian_kernel_bank(dtype=torch.float64) -> torch.Tensor:
    """Stacked (3, 1, 12, 12) correlation kernels: K_xx, K_xy, K_yy."""
    g, g1, g2 = gaussian_taps(dtype)
    k_xx = torch.outer(g, g2)
    k_xy = torch.outer(g1, g1)
    k_yy = torch.outer(g2, g)
    return torch.stack([k_xx, k_xy, k_yy])[:, None].contiguous()


def _as_batch(x: torch.Tensor) -> torch.Tensor:
    if x.ndim == 2:
        return x[None, None]
    if x.ndim == 3:
        return x[:, None]
    if x.ndim == 4 and x.shape[1] == 1:
        return x
    raise ValueError("expected (H,W), (B,H,W) or (B,1,H,W) depth maps")


def _pixels(x: torch.Tensor) -> int:
    return x.shape[-1] * x.shape[-2]


def gradient_maps(x: torch.Tensor):
    """Central-difference gradients with replicated borders."""
    b = _as_batch(x)
    px = F.pad(b, (1, 1, 0, 0), mode="replicate")
    py = F.pad(b, (0, 0, 1, 1), mode="replicate")
    gx = 0.5 * (px[..., 2:] - px[..., :-2])
    gy = 0.5 * (py[..., 2:, :] - py[..., :-2, :])
    return gx, gy


def hessian_maps(x: torch.Tensor) -> torch.Tensor:
    """(B, 3, H, W) responses to the K_xx, K_xy, K_yy kernels."""
    b = _as_batch(x)
    bank = hessian_kernel_bank(b.dtype)
    padded = F.pad(b, (PAD_BEFORE, PAD_AFTER, PAD_BEFORE, PAD_AFTER),
                   mode="replicate")
    return F.conv2d(padded, bank)


def loss_z(pred: torch.Tensor, truth: torch.Tensor) -> torch.Tensor:
    p, t = _as_batch(pred), _as_batch(truth)
    return torch.abs(p - t).sum(dim=(1, 2, 3)).mean() / _pixels(p)


def loss_e(pred: torch.Tensor, truth: torch.Tensor) -> torch.Tensor:
    pgx, pgy = gradient_maps(pred)
    tgx, tgy = gradient_maps(truth)
    per = (torch.abs(pgx - tgx).sum(dim=(1, 2, 3))
           + torch.abs(pgy - tgy).sum(dim=(1, 2, 3)))
    return per.mean() / _pixels(pgx)


def loss_c(pred: torch.Tensor, truth: torch.Tensor) -> torch.Tensor:
    diff = torch.abs(hessian_maps(pred) - hessian_maps(truth))
    mults = torch.tensor([1.0, 2.0, 1.0], dtype=diff.dtype,
                         device=diff.device)
    per = (diff.sum(dim=(2, 3)) * mults).sum(dim=1)
    return per.mean() / _pixels(diff)


def breakdown(pred: torch.Tensor, truth: torch.Tensor):
    """The three loss terms as scalar tensors."""
    return loss_z(pred, truth), loss_e(pred, truth), loss_c(pred, truth)


def total_loss(pred: torch.Tensor, truth: torch.Tensor,
               weights=DEFAULT_WEIGHTS) -> torch.Tensor:
    if len(weights) != 3 or any(w < 0 for w in weights):
        raise ValueError("weights must be three non-negative numbers")
    lz, le, lc = breakdown(pred, truth)
    return weights[0] * lz + weights[1] * le + weights[2] * lc


class DepthLoss(nn.Module):
    """Weighted three-term loss as a module, for training loops."""

    def __init__(self, weights=DEFAULT_WEIGHTS):
        super().__init__()
        if len(weights) != 3 or any(w < 0 for w in weights):
            raise ValueError("weights must be three non-negative numbers")
        self.weights = tuple(float(w) for w in weights)

    def forward(self, pred: torch.Tensor, truth: torch.Tensor) -> torch.Tensor:
        return total_loss(pred, truth, self.weights)
