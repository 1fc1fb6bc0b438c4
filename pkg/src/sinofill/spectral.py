"""Frequency-domain convolution on latent feature maps.

A per-channel complex kernel multiplies the real-FFT spectrum of the
features along one spatial axis (the convolution theorem form of a 1-d
circular convolution per row or column), followed by the inverse
transform and an optional activation.  Two such branches, one along the
width and one along the height, are combined with fixed weights.

Complex spectra travel as real tensors with a leading real/imag axis of
size 2, so the whole pipeline stays inside the real-valued autodiff
engine.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass

import numpy as np

from .tensor import (ContractViolation, Tensor, complex_hadamard, gelu,
                     irfft_axis, rfft_axis, scale)

AXES = ("width", "height")
ACTIVATIONS = ("identity", "gelu")

DEFAULT_ALPHA_H = 0.55
DEFAULT_ALPHA_W = 0.45


@dataclass
class FreqConvParams:
    """Per-channel frequency kernels plus branch weights.

    Kernels are stacked real/imag tensors: ``k_w`` has shape
    (2, C, W//2+1) and ``k_h`` (2, C, H//2+1).  Either may be None when
    the corresponding branch is disabled.
    """

    k_w: Tensor | None
    k_h: Tensor | None
    alpha_w: float = DEFAULT_ALPHA_W
    alpha_h: float = DEFAULT_ALPHA_H
    activation: str = "gelu"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ContractViolation(f"unknown activation {self.activation!r}")
        if not (math.isfinite(self.alpha_w) and math.isfinite(self.alpha_h)):
            raise ContractViolation("branch weights must be finite")


def delta_kernel(channels: int, length: int, dtype: str = "f64") -> Tensor:
    """Frequency transform of the unit impulse: all-ones real part.

    Hadamard-multiplying by it leaves the signal unchanged, so a block
    initialized here starts as the identity.
    """
    bins = length // 2 + 1
    k = np.zeros((2, channels, bins))
    k[0] = 1.0
    return Tensor(k, dtype=dtype)


def spatial_to_freq_kernel(kernel_spatial, dtype: str = "f64") -> Tensor:
    """Transform per-channel spatial kernels (C, L) into the stacked form."""
    k = np.asarray(kernel_spatial, dtype=np.float64)
    if k.ndim != 2:
        raise ContractViolation(f"expected (C, L) spatial kernels, got {k.shape}")
    spec = np.fft.rfft(k, axis=1)
    return Tensor(np.stack([spec.real, spec.imag]), dtype=dtype)


def _apply_activation(x: Tensor, activation: str) -> Tensor:
    if activation == "identity":
        return x
    if activation == "gelu":
        return gelu(x)
    raise ContractViolation(f"unknown activation {activation!r}")


def freq_conv_axis(h: Tensor, kernel: Tensor, axis: str,
                   activation: str = "identity") -> Tensor:
    """activation(iRFFT(kernel * RFFT(h))) along one spatial axis of (C, H, W).

    The kernel is per-channel and broadcast along the orthogonal axis;
    differentiable in both the features and the kernel.
    """
    if axis not in AXES:
        raise ContractViolation(f"axis must be one of {AXES}, got {axis!r}")
    if len(h.shape) != 3:
        raise ContractViolation(f"expected (C, H, W) features, got shape {h.shape}")
    c = h.shape[0]
    ax = 2 if axis == "width" else 1
    length = h.shape[ax]
    bins = length // 2 + 1
    if kernel.shape != (2, c, bins):
        raise ContractViolation(
            f"kernel shape {kernel.shape} does not match (2, {c}, {bins}) for axis {axis!r}")
    spec = rfft_axis(h, axis=ax)
    mixed = complex_hadamard(spec, kernel, axis=ax)
    out = irfft_axis(mixed, axis=ax, length=length)
    return _apply_activation(out, activation)


def freq_conv_block(h: Tensor, params: FreqConvParams) -> Tensor:
    """Weighted sum of the width and height branches (same shape as input)."""
    if params.k_w is None or params.k_h is None:
        raise ContractViolation("freq_conv_block needs both width and height kernels")
    yw = freq_conv_axis(h, params.k_w, "width", params.activation)
    yh = freq_conv_axis(h, params.k_h, "height", params.activation)
    return scale(yw, params.alpha_w) + scale(yh, params.alpha_h)


# ---------------------------------------------------------------------------
# Complexity benchmark
# ---------------------------------------------------------------------------


def _direct_circular_conv(x: np.ndarray, kern: np.ndarray) -> np.ndarray:
    """Per-channel circular convolution along the width axis, tap by tap."""
    out = np.zeros_like(x)
    taps = kern.shape[1]
    for j in range(taps):
        out += kern[:, j][:, None, None] * np.roll(x, j, axis=2)
    return out


def _complexity_terms(c: int, h: int, w: int, k: int, latent_channels: int = 8,
                      r: int = 2) -> dict:
    """Operation-count expressions for the two placement strategies,
    evaluated for one configuration (downsampling factor r, encoder =
    two stride-2 3x3 layers ending at ``latent_channels``)."""
    hw_r = h * w / r ** 2
    return {
        "o_down": 2.0 * c * h * w / r ** 2,
        "o_s": c ** 2 * k ** 2 * hw_r,
        "o_f": c * hw_r * math.log(hw_r) + c * hw_r,
        "o_r": 2.0 * c ** 2 * k ** 2 * hw_r,
        "o_e": (c * latent_channels * 9 * (h / 2) * (w / 2) / r ** 2
                + latent_channels ** 2 * 9 * (h / 4) * (w / 4) / r ** 2),
    }


def bench_conv(sizes, repeats: int = 5, seed: int = 0) -> list[dict]:
    """Time direct circular convolution against the FFT path.

    Both paths are checked for numerical agreement (<= 1e-5 relative)
    before timing; no pass/fail threshold is applied to the timings
    themselves since they are machine-dependent.
    """
    sizes = list(sizes)
    if not sizes:
        raise ContractViolation("bench_conv needs at least one size")
    rows = []
    rng = np.random.default_rng(seed)
    for c, h, w, k in sizes:
        x = rng.standard_normal((c, h, w))
        kern = rng.standard_normal((c, k))
        kern_padded = np.zeros((c, w))
        kern_padded[:, :k] = kern
        kfreq = spatial_to_freq_kernel(kern_padded)
        xt = Tensor(x)

        ref = _direct_circular_conv(x, kern)
        out = freq_conv_axis(xt, kfreq, "width", "identity").numpy()
        err = np.abs(out - ref).max() / max(np.abs(ref).max(), 1e-30)
        if err > 1e-5:
            raise ContractViolation(
                f"benchmark paths disagree for size {(c, h, w, k)}: rel err {err:.3e}")

        t_direct = min(_timed(lambda: _direct_circular_conv(x, kern)) for _ in range(repeats))
        t_fft = min(_timed(lambda: freq_conv_axis(xt, kfreq, "width", "identity"))
                    for _ in range(repeats))
        rows.append({
            "C": c, "H": h, "W": w, "k": k,
            "t_direct_ms": t_direct * 1e3,
            "t_fft_ms": t_fft * 1e3,
            "o_terms": _complexity_terms(c, h, w, k),
        })
    return rows


def _timed(fn) -> float:
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


def bench_report_csv(rows) -> str:
    lines = ["C,H,W,k,t_direct_ms,t_fft_ms,o_terms"]
    for r in rows:
        terms = json.dumps(r["o_terms"], separators=(",", ":"))
        lines.append(f'{r["C"]},{r["H"]},{r["W"]},{r["k"]},'
                     f'{r["t_direct_ms"]:.6f},{r["t_fft_ms"]:.6f},"{terms}"')
    return "\n".join(lines) + "\n"
