"""Command-line pipeline: dataset generation, training, inpainting,
evaluation, ablations, the mask-ratio sweep, and the convolution
benchmark.

Exit codes: 0 success, 1 runtime or I/O failure, 2 usage or config
error.  All file formats are defined here and in tensorio: the binary
tensor format, dataset manifests, MaskSpec JSON, model directories, and
the CSV reports with fixed headers.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import baselines, masking, metrics, phantom, radon, spectral, tensorio
from .losses import LossWeights
from .masking import MaskSpec, apply_mask, sample_mask
from .model import (NetConfig, TrainConfig, forward, history_csv, inpaint,
                    load_params, load_sinograms, save_params, train)
from .tensor import ContractViolation

ABLATION_ARMS = ("full", "no_freq", "no_h", "no_w", "no_absorp_loss",
                 "no_freq_loss", "placement_downsample", "placement_latent")

ABLATION_RATIOS = (0.4, 0.6, 0.8)

# deterministic evaluation masks: sample i at evaluation seed s gets
# sample_mask(A, ratio, EVAL_MASK_SEED_BASE + 1000 * s + i)
EVAL_MASK_SEED_BASE = 100_000


class ConfigError(Exception):
    """Config file violates the published schema."""


# ---------------------------------------------------------------------------
# Shared evaluation helpers (also used by the acceptance suite)
# ---------------------------------------------------------------------------


def holdout_split(sinos: list) -> tuple[list, list]:
    """Deterministic train/held-out split: the last count//11 samples
    (at least one) are held out."""
    n_test = max(1, len(sinos) // 11)
    if len(sinos) <= n_test:
        raise ContractViolation(f"dataset of {len(sinos)} too small to split")
    return sinos[:-n_test], sinos[-n_test:]


def eval_masked_mean(predict, test_sinos, ratio: float, eval_seed: int) -> dict:
    """Mean masked-region metrics of ``predict(masked, indicator, mask)``
    over a test set, one deterministic mask per sample."""
    scores = {"ssim": [], "psnr": []}
    for i, truth in enumerate(test_sinos):
        mask = sample_mask(truth.shape[0], ratio,
                           EVAL_MASK_SEED_BASE + 1000 * eval_seed + i)
        masked, ind = apply_mask(truth, mask)
        result = metrics.eval_masked(predict(masked, ind, mask), truth, mask)
        scores["ssim"].append(result["ssim"])
        scores["psnr"].append(result["psnr"])
    return {k: float(np.mean(v)) for k, v in scores.items()}


def eval_reconstruction_mean(params, test_sinos) -> dict:
    """Full-frame reconstruction metrics on unmasked inputs (empty mask)."""
    scores = {"ssim": [], "psnr": []}
    for truth in test_sinos:
        pred = forward(params, truth, np.zeros_like(truth)).numpy()
        peak = float(truth.max()) or 1.0
        scores["ssim"].append(metrics.ssim(pred / peak, truth / peak))
        scores["psnr"].append(metrics.psnr(pred / peak, truth / peak))
    return {k: float(np.mean(v)) for k, v in scores.items()}


def arm_setup(arm: str, input_size, seed: int) -> tuple[NetConfig, LossWeights]:
    """Translate an ablation arm name into a network config and loss weights."""
    if arm not in ABLATION_ARMS:
        raise ConfigError(f"unknown ablation arm {arm!r}")
    net_kwargs = {"input_size": input_size, "seed": seed}
    weights = LossWeights()
    if arm == "no_freq":
        net_kwargs["placement"] = "none"
    elif arm == "no_h":
        net_kwargs["freq_axes"] = ("width",)
    elif arm == "no_w":
        net_kwargs["freq_axes"] = ("height",)
    elif arm == "no_absorp_loss":
        weights = LossWeights(w_absorp=0.0)
    elif arm == "no_freq_loss":
        weights = LossWeights(w_freq=0.0)
    elif arm == "placement_downsample":
        net_kwargs["placement"] = "downsample_first"
    return NetConfig(**net_kwargs), weights


def run_arm(arm: str, train_sinos, seed: int, epochs: int):
    """Train one ablation arm; returns the trained parameters."""
    input_size = train_sinos[0].shape
    net_cfg, weights = arm_setup(arm, input_size, seed)
    train_cfg = TrainConfig(epochs=epochs, seed=seed, weights=weights)
    params, _ = train(train_sinos, net_cfg, train_cfg)
    return params


# ---------------------------------------------------------------------------
# Train config file schema
# ---------------------------------------------------------------------------

_NET_FIELDS = {"channels", "placement", "activation", "freq_axes", "seed"}
_TRAIN_FIELDS = {"epochs", "batch_size", "learning_rate", "mask_ratio_range",
                 "seed", "dtype", "weights"}
_WEIGHT_FIELDS = {"w_pixel", "w_absorp", "w_freq"}


def parse_train_config(doc: dict, input_size) -> tuple[NetConfig, TrainConfig]:
    """Validate a config document; unknown fields are schema errors."""
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    for key in doc:
        if key not in ("net", "train"):
            raise ConfigError(f"unknown top-level field {key!r}")
    net_doc = doc.get("net", {})
    train_doc = doc.get("train", {})
    for key in net_doc:
        if key not in _NET_FIELDS:
            raise ConfigError(f"unknown field net.{key}")
    for key in train_doc:
        if key not in _TRAIN_FIELDS:
            raise ConfigError(f"unknown field train.{key}")
    weights_doc = train_doc.get("weights", {})
    for key in weights_doc:
        if key not in _WEIGHT_FIELDS:
            raise ConfigError(f"unknown field train.weights.{key}")
    if "epochs" not in train_doc:
        raise ConfigError("missing required field train.epochs")
    try:
        net_cfg = NetConfig(input_size=input_size,
                            **{k: tuple(v) if k == "freq_axes" else v
                               for k, v in net_doc.items()})
        train_kwargs = {k: v for k, v in train_doc.items() if k != "weights"}
        if "mask_ratio_range" in train_kwargs:
            train_kwargs["mask_ratio_range"] = tuple(train_kwargs["mask_ratio_range"])
        train_cfg = TrainConfig(weights=LossWeights(**weights_doc), **train_kwargs)
    except (ContractViolation, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    return net_cfg, train_cfg


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_gen(args) -> int:
    out_dir = Path(args.out)
    manifest = phantom.gen_dataset(args.kind, args.count, args.size, args.seed, out_dir)
    n_angles = args.angles if args.angles else args.size
    sino_names = []
    for i, img_name in enumerate(manifest["images"]):
        img = tensorio.read_tensor(out_dir / img_name)
        sino = radon.project(img, n_angles)
        name = f"sino_{i:04d}.sint"
        tensorio.write_tensor(out_dir / name, sino)
        sino_names.append(name)
    manifest["angles"] = n_angles
    manifest["sinograms"] = sino_names
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")
    return 0


def cmd_train(args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        doc = json.load(fh)
    sinos = load_sinograms(args.data)
    net_cfg, train_cfg = parse_train_config(doc, sinos[0].shape)
    params, history = train(sinos, net_cfg, train_cfg)
    out = Path(args.out)
    save_params(params, out)
    with open(out / "history.csv", "w", encoding="utf-8") as fh:
        fh.write(history_csv(history))
    return 0


def cmd_inpaint(args) -> int:
    sino = tensorio.read_tensor(args.sino)
    mask = sample_mask(sino.shape[0], args.mask_ratio, args.seed)
    masked, ind = apply_mask(sino, mask)
    if args.method == "fcdm":
        if not args.model:
            raise ConfigError("--method fcdm requires --model")
        params = load_params(args.model)
        result = inpaint(params, masked, ind)
    elif args.method == "linear":
        result = baselines.linear_interp_inpaint(masked, mask)
    else:
        result = baselines.tv_inpaint(masked, mask)
    tensorio.write_tensor(args.out, result)
    masking.save_mask(str(args.out) + ".mask.json", mask)
    return 0


_EVAL_HEADER = "method,ratio,seed,ssim,psnr"


def cmd_eval(args) -> int:
    pred = tensorio.read_tensor(args.pred)
    truth = tensorio.read_tensor(args.truth)
    mask = masking.load_mask(args.mask)
    result = metrics.eval_masked(pred, truth, mask)
    out = Path(args.out)
    line = f'{args.method},{mask.ratio},{mask.seed},{result["ssim"]!r},{result["psnr"]!r}'
    new_file = not out.exists()
    with open(out, "a", encoding="utf-8") as fh:
        if new_file:
            fh.write(_EVAL_HEADER + "\n")
        fh.write(line + "\n")
    return 0


def cmd_ablate(args) -> int:
    arms = [a.strip() for a in args.arms.split(",") if a.strip()]
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    for arm in arms:
        if arm not in ABLATION_ARMS:
            raise ConfigError(f"unknown ablation arm {arm!r}; choose from {ABLATION_ARMS}")
    sinos = load_sinograms(args.data)
    train_sinos, test_sinos = holdout_split(sinos)
    rows = ["arm,seed,ratio,ssim,psnr"]
    for arm in arms:
        for seed in seeds:
            params = run_arm(arm, train_sinos, seed, args.epochs)
            for ratio in ABLATION_RATIOS:
                r = eval_masked_mean(
                    lambda m, i, k: inpaint(params, m, i), test_sinos, ratio, seed)
                rows.append(f'{arm},{seed},{ratio},{r["ssim"]!r},{r["psnr"]!r}')
            if arm.startswith("placement_"):
                r = eval_reconstruction_mean(params, test_sinos)
                rows.append(f'{arm},{seed},0.0,{r["ssim"]!r},{r["psnr"]!r}')
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("\n".join(rows) + "\n")
    return 0


def cmd_sweep(args) -> int:
    ratios = [float(r) for r in args.ratios.split(",") if r.strip()]
    params = load_params(args.model)
    sinos = load_sinograms(args.data)
    rows = ["ratio,sample,ssim,psnr"]
    for ratio in ratios:
        per_sample = []
        for i, truth in enumerate(sinos):
            mask = sample_mask(truth.shape[0], ratio, EVAL_MASK_SEED_BASE + i)
            masked, ind = apply_mask(truth, mask)
            r = metrics.eval_masked(inpaint(params, masked, ind), truth, mask)
            per_sample.append(r)
            rows.append(f'{ratio},{i},{r["ssim"]!r},{r["psnr"]!r}')
        mean_ssim = float(np.mean([r["ssim"] for r in per_sample]))
        mean_psnr = float(np.mean([r["psnr"] for r in per_sample]))
        rows.append(f"{ratio},mean,{mean_ssim!r},{mean_psnr!r}")
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("\n".join(rows) + "\n")
    return 0


def cmd_bench(args) -> int:
    sizes = []
    try:
        for chunk in args.sizes.split(";"):
            chunk = chunk.strip()
            if not chunk:
                continue
            c, h, w, k = (int(v) for v in chunk.split(","))
            sizes.append((c, h, w, k))
    except ValueError as exc:
        raise ConfigError(f"bad --sizes spec {args.sizes!r}: expected 'C,H,W,k;...'") from exc
    if not sizes:
        raise ConfigError("--sizes spec is empty")
    rows = spectral.bench_conv(sizes)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(spectral.bench_report_csv(rows))
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sinofill",
                                     description="Sinogram inpainting pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a phantom + sinogram dataset")
    p.add_argument("--kind", required=True, choices=("shepp", "shapes"))
    p.add_argument("--count", required=True, type=int)
    p.add_argument("--size", required=True, type=int)
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--angles", type=int, default=None,
                   help="projection angles (default: image size)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train the inpainting model")
    p.add_argument("--data", required=True, help="dataset manifest.json")
    p.add_argument("--config", required=True, help="train config JSON")
    p.add_argument("--out", required=True, help="output model directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("inpaint", help="inpaint one masked sinogram")
    p.add_argument("--model", default=None, help="model directory (fcdm only)")
    p.add_argument("--sino", required=True)
    p.add_argument("--mask-ratio", required=True, type=float)
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--method", required=True, choices=("fcdm", "linear", "tv"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_inpaint)

    p = sub.add_parser("eval", help="masked-region metrics for one prediction")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--mask", required=True, help="MaskSpec JSON")
    p.add_argument("--out", required=True, help="CSV to append to")
    p.add_argument("--method", default="unknown", help="method label for the CSV row")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train and evaluate ablation arms")
    p.add_argument("--data", required=True)
    p.add_argument("--arms", required=True, help="comma-separated arm names")
    p.add_argument("--seeds", required=True, help="comma-separated seeds")
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=30)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("sweep", help="masked metrics across mask ratios")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--ratios", required=True, help="comma-separated ratios")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="direct vs FFT convolution benchmark")
    p.add_argument("--sizes", required=True, help="'C,H,W,k;C,H,W,k;...'")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return 1
    except (OSError, RuntimeError, ContractViolation, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
