"""SSIM and PSNR with the masked-region evaluation protocol.

SSIM follows Wang et al.: Gaussian window (size 7, sigma 1.5),
C1 = (0.01 L)^2, C2 = (0.03 L)^2, averaged over valid window positions.
For strips thinner than the window, the largest odd window that fits is
used instead.  Masked-region scores are computed on the masked rows
extracted and stacked in index order, after dividing both arrays by the
ground-truth maximum so the unit data range assumption holds.
"""

from __future__ import annotations

import numpy as np

from .masking import MaskSpec
from .tensor import ContractViolation

PSNR_SENTINEL_DB = 99.0


def _check_pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ContractViolation(f"shape mismatch {a.shape} vs {b.shape}")
    if a.ndim != 2:
        raise ContractViolation(f"expected 2-d arrays, got shape {a.shape}")
    return a, b


def _gaussian_window(size: int, sigma: float = 1.5) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords ** 2) / (2.0 * sigma ** 2))
    win = np.outer(g, g)
    return win / win.sum()


def _windowed_mean(x: np.ndarray, win: np.ndarray) -> np.ndarray:
    w = win.shape[0]
    view = np.lib.stride_tricks.sliding_window_view(x, (w, w))
    return np.tensordot(view, win, axes=([2, 3], [0, 1]))


def ssim(a, b, data_range: float = 1.0) -> float:
    """Mean structural similarity over Gaussian-weighted local windows."""
    a, b = _check_pair(a, b)
    if data_range <= 0:
        raise ContractViolation(f"data_range must be positive, got {data_range}")
    size = min(7, min(a.shape))
    if size % 2 == 0:
        size -= 1
    win = _gaussian_window(size)

    mu_a = _windowed_mean(a, win)
    mu_b = _windowed_mean(b, win)
    var_a = _windowed_mean(a * a, win) - mu_a ** 2
    var_b = _windowed_mean(b * b, win) - mu_b ** 2
    cov = _windowed_mean(a * b, win) - mu_a * mu_b

    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def psnr(a, b, data_range: float = 1.0) -> float:
    """10*log10(L^2 / MSE); identical inputs report the 99 dB sentinel."""
    a, b = _check_pair(a, b)
    if data_range <= 0:
        raise ContractViolation(f"data_range must be positive, got {data_range}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_SENTINEL_DB
    return float(10.0 * np.log10(data_range ** 2 / mse))


def eval_masked(pred, truth, mask: MaskSpec) -> dict:
    """SSIM/PSNR on the masked rows only, stacked in index order."""
    pred, truth = _check_pair(pred, truth)
    if mask.n_angles != pred.shape[0]:
        raise ContractViolation(
            f"mask covers {mask.n_angles} angles but sinogram has {pred.shape[0]} rows")
    if not mask.masked:
        raise ContractViolation("mask is empty; nothing to evaluate")
    rows = list(mask.masked)
    peak = float(truth.max())
    norm = peak if peak > 0 else 1.0
    sub_p = pred[rows] / norm
    sub_t = truth[rows] / norm
    return {"ssim": ssim(sub_p, sub_t, 1.0), "psnr": psnr(sub_p, sub_t, 1.0)}
