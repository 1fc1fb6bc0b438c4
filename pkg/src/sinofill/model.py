"""Desk-scale sinogram inpainting network.

Architecture: the masked sinogram and its mask indicator enter as two
channels, pass through two stride-2 3x3 convolutions, a frequency
convolution block acts on the latent (or on a 2x-pooled copy of the
input for the alternative placement), and two stride-2 3x3 transposed
convolutions decode back to one channel.  The final layer is linear so
the output can cover the full line-integral range.

Training: per sample per epoch, a mask ratio is drawn uniformly from
the configured range, the masked sinogram plus indicator goes through
the network, and the combined loss against the clean sinogram drives an
Adam step (beta1=0.9, beta2=0.99, eps=1e-8; batch_size > 1 averages
gradients over that many samples per step).  The learning rate follows
a cosine ramp to zero and the returned weights are the average of the
iterates over the final 30% of steps, which removes most of the
per-sample gradient jitter.  Everything is driven by a single
splitmix64 stream, so a seed fixes the whole run.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import spectral, tensorio
from .losses import LossWeights, total_loss
from .masking import apply_mask, sample_mask
from .spectral import FreqConvParams, delta_kernel
from .tensor import (ContractViolation, Rng, Tensor, backward, concat_channels,
                     conv2d, conv2d_transpose, debug_checks_enabled, gelu,
                     record, scale, tsum)

PLACEMENTS = ("latent", "downsample_first", "none")

FREQ_KERNEL_INIT_NOISE = 0.01

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.99
ADAM_EPS = 1e-8

# fraction of final steps whose iterates are averaged into the result
POLYAK_TAIL_FRAC = 0.5


@dataclass
class NetConfig:
    input_size: tuple[int, int]
    channels: int = 8
    placement: str = "latent"
    activation: str = "gelu"
    freq_axes: tuple[str, ...] = ("width", "height")
    seed: int = 0

    def __post_init__(self):
        self.input_size = tuple(int(v) for v in self.input_size)
        self.freq_axes = tuple(self.freq_axes)
        a, d = self.input_size
        if a % 4 != 0 or d % 4 != 0 or a < 8 or d < 8:
            raise ContractViolation(f"input_size must be multiples of 4 and >= 8, got {self.input_size}")
        if self.placement not in PLACEMENTS:
            raise ContractViolation(f"placement must be one of {PLACEMENTS}, got {self.placement!r}")
        if self.activation != "gelu":
            raise ContractViolation(f"unsupported activation {self.activation!r}")
        if not set(self.freq_axes) <= set(spectral.AXES):
            raise ContractViolation(f"freq_axes must be a subset of {spectral.AXES}")

    def to_json_dict(self) -> dict:
        return {"input_size": list(self.input_size), "channels": self.channels,
                "placement": self.placement, "activation": self.activation,
                "freq_axes": list(self.freq_axes), "seed": self.seed}

    @classmethod
    def from_json_dict(cls, d: dict) -> "NetConfig":
        return cls(input_size=tuple(d["input_size"]), channels=int(d["channels"]),
                   placement=d["placement"], activation=d["activation"],
                   freq_axes=tuple(d["freq_axes"]), seed=int(d["seed"]))


@dataclass
class NetParams:
    config: NetConfig
    tensors: dict[str, Tensor]
    alpha_w: float = spectral.DEFAULT_ALPHA_W
    alpha_h: float = spectral.DEFAULT_ALPHA_H


@dataclass
class TrainConfig:
    epochs: int
    batch_size: int = 1  # one Adam step per sample
    learning_rate: float = 2e-2
    mask_ratio_range: tuple[float, float] = (0.1, 0.9)
    weights: LossWeights = field(default_factory=LossWeights)
    seed: int = 0
    dtype: str = "f64"

    def __post_init__(self):
        lo, hi = self.mask_ratio_range
        if not 0.0 <= lo <= hi <= 1.0:
            raise ContractViolation(f"mask_ratio_range must satisfy 0 <= lo <= hi <= 1, got {self.mask_ratio_range}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ContractViolation("epochs and batch_size must be >= 1")


def _freq_dims(cfg: NetConfig) -> tuple[int, int, int]:
    """(channels, height, width) seen by the frequency block."""
    a, d = cfg.input_size
    if cfg.placement == "latent":
        return cfg.channels, a // 4, d // 4
    return 2, a // 2, d // 2  # downsample_first: acts on the pooled 2-channel input


def init_params(cfg: NetConfig, dtype: str = "f64") -> NetParams:
    """Deterministic initialization: fan-in scaled uniform conv weights
    (U(-s, s), s = 1/sqrt(C_in*kh*kw)), zero biases, and frequency
    kernels at the delta kernel plus sigma=0.01 noise so the block
    starts near the identity."""
    rng = Rng(cfg.seed)
    c = cfg.channels

    def conv_weight(shape):
        # He-style uniform: U(-s, s) with s = sqrt(6 / fan_in) keeps the
        # activation variance roughly constant through the gelu stack
        fan_in = shape[1] * shape[2] * shape[3]
        s = math.sqrt(6.0 / fan_in)
        return Tensor(rng.uniforms(shape, -s, s), dtype=dtype, requires_grad=True)

    def zeros(shape):
        return Tensor(np.zeros(shape), dtype=dtype, requires_grad=True)

    tensors = {
        "enc1_w": conv_weight((c, 2, 3, 3)),
        "enc1_b": zeros((c,)),
        "enc2_w": conv_weight((c, c, 3, 3)),
        "enc2_b": zeros((c,)),
        "dec1_w": conv_weight((c, c, 3, 3)),
        "dec1_b": zeros((c,)),
        "dec2_w": conv_weight((c, 1, 3, 3)),
        "dec2_b": zeros((1,)),
    }

    if cfg.placement != "none":
        fc, fh, fw = _freq_dims(cfg)
        for axis in ("width", "height"):
            if axis not in cfg.freq_axes:
                continue
            length = fw if axis == "width" else fh
            base = delta_kernel(fc, length).numpy()
            noise = rng.normals(base.shape, 0.0, FREQ_KERNEL_INIT_NOISE)
            name = "freq_kw" if axis == "width" else "freq_kh"
            tensors[name] = Tensor(base + noise, dtype=dtype, requires_grad=True)

    return NetParams(config=cfg, tensors=tensors)


def _pool_kernel(channels: int, dtype: str) -> Tensor:
    w = np.zeros((channels, channels, 2, 2))
    for i in range(channels):
        w[i, i] = 0.25
    return Tensor(w, dtype=dtype)


def _upsample_kernel(channels: int, dtype: str) -> Tensor:
    w = np.zeros((channels, channels, 2, 2))
    for i in range(channels):
        w[i, i] = 1.0
    return Tensor(w, dtype=dtype)


def _apply_freq(params: NetParams, h: Tensor) -> Tensor:
    cfg = params.config
    axes = cfg.freq_axes
    act = cfg.activation
    if not axes:
        return h
    if set(axes) == {"width", "height"}:
        fc = FreqConvParams(k_w=params.tensors["freq_kw"], k_h=params.tensors["freq_kh"],
                            alpha_w=params.alpha_w, alpha_h=params.alpha_h, activation=act)
        return spectral.freq_conv_block(h, fc)
    if axes == ("width",):
        return spectral.freq_conv_axis(h, params.tensors["freq_kw"], "width", act)
    return spectral.freq_conv_axis(h, params.tensors["freq_kh"], "height", act)


def _value_scale(cfg: NetConfig) -> float:
    # line integrals reach O(D) for unit attenuation, far above unit-scale
    # weights; a fixed D/2 normalization keeps activations near 1
    return cfg.input_size[1] / 2.0


def forward(params: NetParams, masked, indicator) -> Tensor:
    """Full differentiable pass; output shape equals the input sinogram.

    Sinogram values are divided by a fixed D/2 constant on the way in
    and multiplied back on the way out, so the learnable stack operates
    on unit-scale data regardless of the line-integral magnitudes.
    """
    cfg = params.config
    a, d = cfg.input_size
    dtype = params.tensors["enc1_w"].dtype
    m_t = masked if isinstance(masked, Tensor) else Tensor(masked, dtype=dtype)
    i_t = indicator if isinstance(indicator, Tensor) else Tensor(indicator, dtype=dtype)
    if m_t.shape != (a, d) or i_t.shape != (a, d):
        raise ContractViolation(
            f"expected {(a, d)} sinogram and indicator, got {m_t.shape} and {i_t.shape}")

    s = _value_scale(cfg)
    x = concat_channels(scale(m_t, 1.0 / s), i_t)
    if cfg.placement == "downsample_first":
        x = conv2d(x, _pool_kernel(2, dtype), stride=2)
        x = _apply_freq(params, x)
        x = conv2d_transpose(x, _upsample_kernel(2, dtype), stride=2)

    t = params.tensors
    h = gelu(conv2d(x, t["enc1_w"], t["enc1_b"], stride=2, pad=1))
    h = gelu(conv2d(h, t["enc2_w"], t["enc2_b"], stride=2, pad=1))
    if cfg.placement == "latent":
        h = _apply_freq(params, h)
    h = gelu(conv2d_transpose(h, t["dec1_w"], t["dec1_b"], stride=2, pad=1, out_pad=1))
    out = conv2d_transpose(h, t["dec2_w"], t["dec2_b"], stride=2, pad=1, out_pad=1)
    # output activation keeps the empty regions of the sinogram near zero
    return scale(gelu(tsum(out, axis=0)), s)  # (1, A, D) -> (A, D), data units


def inpaint(params: NetParams, masked, indicator) -> np.ndarray:
    """Network output with the known (unmasked) rows replaced by the input."""
    masked_arr = np.asarray(masked)
    ind_arr = np.asarray(indicator)
    out = np.array(forward(params, masked_arr, ind_arr).numpy())
    known = ind_arr.max(axis=1) == 0
    out[known] = masked_arr[known]
    return out


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


def load_sinograms(manifest_path) -> list[np.ndarray]:
    """Load the sinogram files listed in a dataset manifest."""
    manifest_path = Path(manifest_path)
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    names = manifest.get("sinograms")
    if not names:
        raise ContractViolation(f"{manifest_path}: manifest lists no sinograms")
    base = manifest_path.parent
    return [tensorio.read_tensor(base / name) for name in names]


def _resolve_dataset(dataset) -> list[np.ndarray]:
    if isinstance(dataset, (str, Path)):
        return load_sinograms(dataset)
    sinos = [np.asarray(s, dtype=np.float64) for s in dataset]
    return sinos


def _adam_step(params: NetParams, grads: dict[str, np.ndarray], state: dict,
               lr: float, dtype: str) -> None:
    state["t"] += 1
    t = state["t"]
    bc1 = 1.0 - ADAM_BETA1 ** t
    bc2 = 1.0 - ADAM_BETA2 ** t
    for name, g in grads.items():
        m = state["m"][name] = ADAM_BETA1 * state["m"][name] + (1.0 - ADAM_BETA1) * g
        v = state["v"][name] = ADAM_BETA2 * state["v"][name] + (1.0 - ADAM_BETA2) * g * g
        update = lr * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)
        params.tensors[name] = Tensor(params.tensors[name].numpy() - update,
                                      dtype=dtype, requires_grad=True)


def train(dataset, net_cfg: NetConfig, train_cfg: TrainConfig):
    """Supervised inpainting with random masks; returns (params, history).

    History has one record per epoch with the mean loss and its
    component means.  Single-threaded and fully determined by the
    config seeds.
    """
    sinos = _resolve_dataset(dataset)
    if not sinos:
        raise ContractViolation("training dataset is empty")
    a, d = net_cfg.input_size
    for i, s in enumerate(sinos):
        if s.shape != (a, d):
            raise ContractViolation(f"sample {i} has shape {s.shape}, expected {(a, d)}")

    dtype = train_cfg.dtype
    params = init_params(net_cfg, dtype=dtype)
    names = list(params.tensors)
    state = {"t": 0,
             "m": {n: np.zeros(params.tensors[n].shape) for n in names},
             "v": {n: np.zeros(params.tensors[n].shape) for n in names}}
    rng = Rng(train_cfg.seed)
    lo, hi = train_cfg.mask_ratio_range
    n = len(sinos)
    history = []

    total_steps = train_cfg.epochs * ((n + train_cfg.batch_size - 1) // train_cfg.batch_size)
    tail_start = (1.0 - POLYAK_TAIL_FRAC) * total_steps
    tail_sum = {name: np.zeros(params.tensors[name].shape) for name in names}
    tail_count = 0
    step = 0

    for epoch in range(train_cfg.epochs):
        order = rng.sample(n, n)
        sums = {"loss": 0.0, "pixel": 0.0, "absorp": 0.0, "freq": 0.0}
        accum = {name: np.zeros(params.tensors[name].shape) for name in names}
        in_batch = 0
        for pos, idx in enumerate(order):
            truth = sinos[idx]
            ratio = rng.uniform(lo, hi)
            mask = sample_mask(a, ratio, seed=rng.next_u64())
            masked_s, ind = apply_mask(truth, mask)
            with record():
                pred = forward(params, masked_s, ind)
                loss_t, bd = total_loss(pred, Tensor(truth, dtype=dtype),
                                        train_cfg.weights)
                grads = backward(loss_t)
            if not math.isfinite(bd.total):
                raise RuntimeError(
                    f"non-finite loss at epoch {epoch}, sample {idx} (value {bd.total})")
            if debug_checks_enabled():
                for name in names:
                    g = grads.get(params.tensors[name])
                    if g is None or not np.all(np.isfinite(g.numpy())):
                        raise RuntimeError(
                            f"parameter {name} missing or non-finite gradient "
                            f"at epoch {epoch}, sample {idx}")
            for name in names:
                accum[name] += grads[params.tensors[name]].numpy()
            in_batch += 1
            sums["loss"] += bd.total
            sums["pixel"] += bd.pixel
            sums["absorp"] += bd.absorp
            sums["freq"] += bd.freq
            if in_batch == train_cfg.batch_size or pos == n - 1:
                mean_grads = {name: accum[name] / in_batch for name in names}
                lr = train_cfg.learning_rate * 0.5 * (1.0 + math.cos(math.pi * step / total_steps))
                _adam_step(params, mean_grads, state, lr, dtype)
                accum = {name: np.zeros(params.tensors[name].shape) for name in names}
                in_batch = 0
                step += 1
                if step > tail_start:
                    for name in names:
                        tail_sum[name] += params.tensors[name].numpy()
                    tail_count += 1
        history.append({"epoch": epoch,
                        "loss": sums["loss"] / n,
                        "pixel": sums["pixel"] / n,
                        "absorp": sums["absorp"] / n,
                        "freq": sums["freq"] / n})

    if tail_count:
        for name in names:
            params.tensors[name] = Tensor(tail_sum[name] / tail_count,
                                          dtype=dtype, requires_grad=True)
    return params, history


def history_csv(history) -> str:
    """Training history as CSV text; float repr keeps reruns bit-identical."""
    lines = ["epoch,loss,pixel,absorp,freq"]
    for row in history:
        lines.append(f'{row["epoch"]},{row["loss"]!r},{row["pixel"]!r},'
                     f'{row["absorp"]!r},{row["freq"]!r}')
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Parameter serialization
# ---------------------------------------------------------------------------


def save_params(params: NetParams, model_dir) -> None:
    model_dir = Path(model_dir)
    model_dir.mkdir(parents=True, exist_ok=True)
    meta = {"config": params.config.to_json_dict(),
            "alpha_w": params.alpha_w, "alpha_h": params.alpha_h,
            "tensors": list(params.tensors)}
    with open(model_dir / "params.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1)
        fh.write("\n")
    for name, t in params.tensors.items():
        tensorio.write_tensor(model_dir / f"{name}.sint", t)


def load_params(model_dir) -> NetParams:
    model_dir = Path(model_dir)
    with open(model_dir / "params.json", encoding="utf-8") as fh:
        meta = json.load(fh)
    cfg = NetConfig.from_json_dict(meta["config"])
    tensors = {}
    for name in meta["tensors"]:
        arr = tensorio.read_tensor(model_dir / f"{name}.sint")
        tensors[name] = Tensor(arr, requires_grad=True)
    return NetParams(config=cfg, tensors=tensors,
                     alpha_w=float(meta["alpha_w"]), alpha_h=float(meta["alpha_h"]))
