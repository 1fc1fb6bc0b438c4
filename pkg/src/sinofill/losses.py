"""Physics-aware training losses for sinogram inpainting.

Three differentiable terms: plain pixel MSE, a total-projection
consistency penalty that compares the mean per-angle detector sum of a
predicted sinogram against the total absorption of its own filtered
backprojection, and a frequency-domain penalty equal to the summed
squared modulus of the difference of the unnormalized 2-d spectra.

With the package FFT convention (unnormalized forward), the frequency
term satisfies Parseval exactly: freq_loss(a, b) == A*D*sum((a-b)^2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import radon
from .tensor import (ContractViolation, Tensor, mul, rfft_axis, scale,
                     split_channels, square, sub, tmean, tsum)


@dataclass
class LossWeights:
    w_pixel: float = 1.0
    w_absorp: float = 0.1
    w_freq: float = 0.1

    def __post_init__(self):
        if min(self.w_pixel, self.w_absorp, self.w_freq) < 0:
            raise ContractViolation("loss weights must be >= 0")


@dataclass
class LossBreakdown:
    total: float
    pixel: float
    absorp: float
    freq: float


def _as_tensor(x, like: Tensor | None = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x, dtype=like.dtype if like is not None else None)


def pixel_loss(pred, truth) -> Tensor:
    """Mean squared error over all entries."""
    pred = _as_tensor(pred)
    truth = _as_tensor(truth, pred)
    return tmean(square(sub(pred, truth)))


def absorp_sum_loss(pred, filter: str = "ramp") -> Tensor:
    """Squared gap between the mean angle sum and the reconstruction mass.

    The reconstruction comes from the predicted sinogram itself
    (self-consistency), and the angle sum is normalized by the angle
    count so both terms estimate the same object integral.
    """
    pred = _as_tensor(pred)
    if len(pred.shape) != 2:
        raise ContractViolation(f"expected (A, D) sinogram, got shape {pred.shape}")
    n_angles = pred.shape[0]
    mean_angle_sum = scale(tsum(pred), 1.0 / n_angles)
    recon = radon.fbp_t(pred, filter=filter)
    mass = tsum(recon)  # fbp output is already restricted to the inscribed circle
    return square(sub(mean_angle_sum, mass))


def _rfft_weights(n: int) -> np.ndarray:
    # multiplicity of each stored bin in the full spectrum
    bins = n // 2 + 1
    w = np.full(bins, 2.0)
    w[0] = 1.0
    if n % 2 == 0:
        w[-1] = 1.0
    return w


def freq_loss(pred, truth) -> Tensor:
    """Sum of |F_pred - F_truth|^2 over the full unnormalized 2-d spectrum.

    Computed with real transforms along both axes; Hermitian symmetry
    supplies the multiplicity of each stored bin, so the value equals
    the sum over all A*D complex bins of the 2-d DFT.
    """
    pred = _as_tensor(pred)
    truth = _as_tensor(truth, pred)
    if pred.shape != truth.shape:
        raise ContractViolation(f"shape mismatch {pred.shape} vs {truth.shape}")
    if len(pred.shape) != 2:
        raise ContractViolation(f"expected (A, D) sinograms, got shape {pred.shape}")
    a, d = pred.shape
    diff = sub(pred, truth)

    spec_w = rfft_axis(diff, axis=1)  # (2, A, D//2+1)
    re_part = split_channels(spec_w, 0, 1)  # (1, A, D//2+1)
    im_part = split_channels(spec_w, 1, 2)
    fr = rfft_axis(re_part, axis=1)  # (2, 1, A//2+1, D//2+1)
    fi = rfft_axis(im_part, axis=1)

    wu = _rfft_weights(a)[:, None]
    wv = _rfft_weights(d)[None, :]
    weights = Tensor(np.broadcast_to(wu * wv, (2, 1) + (wu * wv).shape).copy(),
                     dtype=pred.dtype)
    weighted = mul(square(fr) + square(fi), weights)
    return tsum(weighted)


def total_loss(pred, truth, weights: LossWeights | None = None,
               filter: str = "ramp"):
    """Weighted combination; returns (scalar tensor, breakdown record)."""
    if weights is None:
        weights = LossWeights()
    pred = _as_tensor(pred)
    truth = _as_tensor(truth, pred)
    lp = pixel_loss(pred, truth)
    la = absorp_sum_loss(pred, filter=filter)
    lf = freq_loss(pred, truth)
    total = scale(lp, weights.w_pixel) + scale(la, weights.w_absorp) + scale(lf, weights.w_freq)
    breakdown = LossBreakdown(total=total.item(), pixel=lp.item(),
                              absorp=la.item(), freq=lf.item())
    return total, breakdown
