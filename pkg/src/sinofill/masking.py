"""Sparse-view masks: random subsets of whole angle rows are removed.

Masked rows are filled with zeros; a binary indicator map marks them so
downstream code can tell true-zero signal from missing rows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .tensor import ContractViolation, Rng


@dataclass(frozen=True)
class MaskSpec:
    n_angles: int
    ratio: float
    masked: tuple[int, ...]  # sorted, distinct, in [0, n_angles)
    seed: int

    def __post_init__(self):
        if any(not 0 <= i < self.n_angles for i in self.masked):
            raise ContractViolation(f"mask indices out of range [0, {self.n_angles})")
        if list(self.masked) != sorted(set(self.masked)):
            raise ContractViolation("mask indices must be sorted and distinct")

    def to_json_dict(self) -> dict:
        return {"n_angles": self.n_angles, "ratio": self.ratio,
                "masked": list(self.masked), "seed": self.seed}

    @classmethod
    def from_json_dict(cls, d: dict) -> "MaskSpec":
        return cls(n_angles=int(d["n_angles"]), ratio=float(d["ratio"]),
                   masked=tuple(int(i) for i in d["masked"]), seed=int(d["seed"]))


def save_mask(path, mask: MaskSpec) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(mask.to_json_dict(), fh)
        fh.write("\n")


def load_mask(path) -> MaskSpec:
    with open(path, encoding="utf-8") as fh:
        return MaskSpec.from_json_dict(json.load(fh))


def sample_mask(n_angles: int, ratio: float, seed: int) -> MaskSpec:
    """Uniform sample without replacement of round(ratio * A) angle indices."""
    if n_angles < 1:
        raise ContractViolation(f"need at least one angle, got {n_angles}")
    if not 0.0 <= ratio <= 1.0:
        raise ContractViolation(f"ratio must be in [0, 1], got {ratio}")
    count = round(ratio * n_angles)
    picked = Rng(seed).sample(n_angles, count)
    return MaskSpec(n_angles=n_angles, ratio=ratio, masked=tuple(sorted(picked)), seed=seed)


def apply_mask(sino, mask: MaskSpec):
    """Zero the masked rows; returns (masked sinogram, indicator map).

    Unmasked rows are copied bit-exactly; the indicator is 1.0 on masked
    rows and 0.0 elsewhere.
    """
    s = np.asarray(sino)
    if s.ndim != 2:
        raise ContractViolation(f"sinogram must be 2-d, got shape {s.shape}")
    if mask.n_angles != s.shape[0]:
        raise ContractViolation(
            f"mask covers {mask.n_angles} angles but sinogram has {s.shape[0]} rows")
    out = s.copy()
    indicator = np.zeros_like(s)
    idx = list(mask.masked)
    out[idx] = 0.0
    indicator[idx] = 1.0
    return out, indicator
