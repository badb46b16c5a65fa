"""Three-term depth supervision objective and its analytic gradient.

total = w1 * L_z + w2 * L_e + w3 * L_c
  L_z: mean absolute depth error
  L_e: mean absolute error of central-difference gradients (x and y)
  L_c: mean absolute error of Gaussian-derivative Hessian responses,
       the mixed term counted twice

Gradients use the stencil [-1/2, 0, 1/2] with replicated borders. The
Hessian responses come from 12x12 separable kernels built from a sigma = 3
Gaussian sampled at half-integer offsets (-5.5 .. 5.5): the smoothing taps
are normalized to sum 1, the first-derivative taps sum to 0 by symmetry,
and the second-derivative taps are mean-subtracted so a constant image has
exactly zero response.  Convolution is correlation against a replicate-
padded array: pad 6 before and 5 after along each axis, then
out[i, j] = sum_ab K[a, b] * pad[i + a, j + b].

No term is normalized beyond its mean; weights carry all the balance.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

SIGMA = 3.0
KERNEL_SIZE = 12
PAD_BEFORE = 6
PAD_AFTER = 5
DEFAULT_WEIGHTS = (0.1, 0.3, 0.6)


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def gaussian_taps(sigma: float = SIGMA, size: int = KERNEL_SIZE):
    """(smooth, first derivative, second derivative) 1-d taps."""
    x = np.arange(size) - (size - 1) / 2.0
    g0 = np.exp(-x * x / (2.0 * sigma * sigma))
    z = g0.sum()
    g = g0 / z
    g1 = (-x / sigma ** 2) * g0 / z
    g2 = ((x * x - sigma ** 2) / sigma ** 4) * g0 / z
    g2 = g2 - g2.mean()
    for arr in (g, g1, g2):
        arr.flags.writeable = False
    return g, g1, g2


@lru_cache(maxsize=None)
def hessian_kernels(sigma: float = SIGMA, size: int = KERNEL_SIZE):
    """(K_xx, K_xy, K_yy), each (size, size); rows are y, columns are x."""
    g, g1, g2 = gaussian_taps(sigma, size)
    k_xx = np.outer(g, g2)
    k_xy = np.outer(g1, g1)
    k_yy = np.outer(g2, g)
    for arr in (k_xx, k_xy, k_yy):
        arr.flags.writeable = False
    return k_xx, k_xy, k_yy


def conv2d_replicate(image: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Correlate with replicate padding; output matches the input shape."""
    image = np.asarray(image, dtype=np.float64)
    h, w = image.shape
    pad = np.pad(image, ((PAD_BEFORE, PAD_AFTER), (PAD_BEFORE, PAD_AFTER)),
                 mode="edge")
    out = np.zeros((h, w))
    for a in range(kernel.shape[0]):
        for b in range(kernel.shape[1]):
            out += kernel[a, b] * pad[a:a + h, b:b + w]
    return out


def gradient_maps(depth: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference (d/dx, d/dy) with replicated borders."""
    depth = np.asarray(depth, dtype=np.float64)
    px = np.pad(depth, ((0, 0), (1, 1)), mode="edge")
    py = np.pad(depth, ((1, 1), (0, 0)), mode="edge")
    gx = 0.5 * (px[:, 2:] - px[:, :-2])
    gy = 0.5 * (py[2:, :] - py[:-2, :])
    return gx, gy


def hessian_maps(depth: np.ndarray):
    """(H_xx, H_xy, H_yy) responses of the frozen kernels."""
    k_xx, k_xy, k_yy = hessian_kernels()
    return (conv2d_replicate(depth, k_xx),
            conv2d_replicate(depth, k_xy),
            conv2d_replicate(depth, k_yy))


# ---------------------------------------------------------------------------
# loss terms
# ---------------------------------------------------------------------------

def _check_pair(pred: np.ndarray, truth: np.ndarray):
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape or pred.ndim != 2:
        raise ValueError("prediction and truth must be equal-shape 2-d arrays")
    if np.any(~np.isfinite(pred)) or np.any(~np.isfinite(truth)):
        raise ValueError("loss inputs must be finite")
    return pred, truth


def loss_z(pred: np.ndarray, truth: np.ndarray) -> float:
    pred, truth = _check_pair(pred, truth)
    return float(np.mean(np.abs(pred - truth)))


def loss_e(pred: np.ndarray, truth: np.ndarray) -> float:
    pred, truth = _check_pair(pred, truth)
    pgx, pgy = gradient_maps(pred)
    tgx, tgy = gradient_maps(truth)
    return float(np.mean(np.abs(pgx - tgx) + np.abs(pgy - tgy)))


def loss_c(pred: np.ndarray, truth: np.ndarray) -> float:
    pred, truth = _check_pair(pred, truth)
    pxx, pxy, pyy = hessian_maps(pred)
    txx, txy, tyy = hessian_maps(truth)
    return float(np.mean(np.abs(pxx - txx) + 2.0 * np.abs(pxy - txy)
                         + np.abs(pyy - tyy)))


@dataclass(frozen=True)
class LossBreakdown:
    loss_z: float
    loss_e: float
    loss_c: float
    weights: tuple
    total: float
    space: str = "linear"    # which depth encoding the inputs were in

    def to_dict(self) -> dict:
        return {"loss_z": self.loss_z, "loss_e": self.loss_e,
                "loss_c": self.loss_c, "weights": list(self.weights),
                "total": self.total, "space": self.space}


def total_loss(pred: np.ndarray, truth: np.ndarray,
               weights: tuple = DEFAULT_WEIGHTS,
               space: str = "linear") -> LossBreakdown:
    """Weighted sum of the three terms; weights must be non-negative.

    `space` only records what the caller fed in ("linear" cm or "gamma"
    normalized depth); the arithmetic is identical either way.
    """
    w = tuple(float(v) for v in weights)
    if len(w) != 3 or any(v < 0.0 for v in w):
        raise ValueError("weights must be three non-negative numbers")
    if space not in ("linear", "gamma"):
        raise ValueError("space must be 'linear' or 'gamma'")
    lz = loss_z(pred, truth)
    le = loss_e(pred, truth)
    lc = loss_c(pred, truth)
    return LossBreakdown(lz, le, lc, w, w[0] * lz + w[1] * le + w[2] * lc,
                         space)


# ---------------------------------------------------------------------------
# analytic gradient (adjoints of the replicate-padded linear ops)
# ---------------------------------------------------------------------------

def _fold_axis(acc: np.ndarray, before: int, after: int, axis: int) -> np.ndarray:
    """Collapse replicate-pad margins back onto the border rows/columns."""
    n = acc.shape[axis] - before - after
    sl = [slice(None)] * acc.ndim
    sl[axis] = slice(before, before + n)
    core = acc[tuple(sl)].copy()
    if before:
        sl[axis] = slice(0, before)
        lead = acc[tuple(sl)].sum(axis=axis)
        first = [slice(None)] * acc.ndim
        first[axis] = 0
        core[tuple(first)] += lead
    if after:
        sl[axis] = slice(before + n, None)
        trail = acc[tuple(sl)].sum(axis=axis)
        last = [slice(None)] * acc.ndim
        last[axis] = n - 1
        core[tuple(last)] += trail
    return core


def _conv_adjoint(upstream: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Adjoint of conv2d_replicate: scatter through the taps, fold the pad."""
    h, w = upstream.shape
    acc = np.zeros((h + PAD_BEFORE + PAD_AFTER, w + PAD_BEFORE + PAD_AFTER))
    for a in range(kernel.shape[0]):
        for b in range(kernel.shape[1]):
            acc[a:a + h, b:b + w] += kernel[a, b] * upstream
    acc = _fold_axis(acc, PAD_BEFORE, PAD_AFTER, axis=0)
    return _fold_axis(acc, PAD_BEFORE, PAD_AFTER, axis=1)


def _gradient_adjoint(ux: np.ndarray, uy: np.ndarray) -> np.ndarray:
    """Adjoint of gradient_maps for upstream fields (ux, uy)."""
    h, w = ux.shape
    acc_x = np.zeros((h, w + 2))
    acc_x[:, 2:] += 0.5 * ux
    acc_x[:, :-2] -= 0.5 * ux
    out = _fold_axis(acc_x, 1, 1, axis=1)
    acc_y = np.zeros((h + 2, w))
    acc_y[2:, :] += 0.5 * uy
    acc_y[:-2, :] -= 0.5 * uy
    return out + _fold_axis(acc_y, 1, 1, axis=0)


def loss_gradient(pred: np.ndarray, truth: np.ndarray,
                  weights: tuple = DEFAULT_WEIGHTS) -> np.ndarray:
    """d(total)/d(pred), same shape as pred.

    Uses sign(0) = 0 at the (measure-zero) L1 kinks; everywhere else the
    derivative is exact.
    """
    pred, truth = _check_pair(pred, truth)
    w1, w2, w3 = (float(v) for v in weights)
    n = pred.size
    grad = (w1 / n) * np.sign(pred - truth)

    pgx, pgy = gradient_maps(pred)
    tgx, tgy = gradient_maps(truth)
    grad += (w2 / n) * _gradient_adjoint(np.sign(pgx - tgx), np.sign(pgy - tgy))

    k_xx, k_xy, k_yy = hessian_kernels()
    pxx, pxy, pyy = hessian_maps(pred)
    txx, txy, tyy = hessian_maps(truth)
    grad += (w3 / n) * (_conv_adjoint(np.sign(pxx - txx), k_xx)
                        + 2.0 * _conv_adjoint(np.sign(pxy - txy), k_xy)
                        + _conv_adjoint(np.sign(pyy - tyy), k_yy))
    return grad


def grad_check(pred: np.ndarray, truth: np.ndarray,
               weights: tuple = DEFAULT_WEIGHTS, step: float = 1e-6,
               kink_tol: float = 1e-6) -> dict:
    """Compare the analytic gradient against central differences.

    Pixels whose perturbation can cross an L1 kink are excluded: any pixel
    within a kernel footprint of a near-zero difference field (or with a
    near-zero depth difference itself) has a discontinuous derivative there.
    Returns max/mean absolute deviation over the checked pixels.
    """
    from scipy.ndimage import maximum_filter

    pred, truth = _check_pair(pred, truth)
    analytic = loss_gradient(pred, truth, weights)

    near = np.abs(pred - truth) <= kink_tol
    pgx, pgy = gradient_maps(pred)
    tgx, tgy = gradient_maps(truth)
    near_g = (np.abs(pgx - tgx) <= kink_tol) | (np.abs(pgy - tgy) <= kink_tol)
    # stencil reach 1 -> size-3 reverse footprint
    near |= maximum_filter(near_g, size=3, mode="constant")
    ph = hessian_maps(pred)
    th = hessian_maps(truth)
    near_h = np.zeros_like(near)
    for p, t in zip(ph, th):
        near_h |= np.abs(p - t) <= kink_tol
    # a source pixel reaches conv outputs at most PAD_BEFORE away
    near |= maximum_filter(near_h, size=2 * PAD_BEFORE + 1, mode="constant")
    checked = ~near

    numeric = np.zeros_like(pred)
    it = np.nditer(pred, flags=["multi_index"])
    while not it.finished:
        i, j = it.multi_index
        if checked[i, j]:
            bump = np.zeros_like(pred)
            bump[i, j] = step
            up = total_loss(pred + bump, truth, weights).total
            dn = total_loss(pred - bump, truth, weights).total
            numeric[i, j] = (up - dn) / (2.0 * step)
        it.iternext()

    diff = np.abs(analytic - numeric)[checked]
    scale = np.maximum(np.abs(numeric), np.abs(analytic))[checked]
    rel = diff / np.maximum(scale, 1e-12)
    return {
        "max_abs_error": float(diff.max()) if diff.size else 0.0,
        "max_rel_error": float(rel.max()) if rel.size else 0.0,
        "mean_abs_error": float(diff.mean()) if diff.size else 0.0,
        "checked_pixels": int(checked.sum()),
        "excluded_pixels": int(near.sum()),
    }
