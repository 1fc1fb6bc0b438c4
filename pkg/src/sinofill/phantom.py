"""Synthetic attenuation images: Shepp-Logan phantoms and random shapes.

All generators emit square images with values in [0, 1] whose support
lies inside the inscribed circle, as the projection code assumes.
Coordinates are normalized so the image spans [-1, 1] and the inscribed
circle is the unit circle.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .tensor import ContractViolation, Rng
from . import tensorio

# Modified (Toft) Shepp-Logan ellipse table:
# (additive value, semi-axis a, semi-axis b, x center, y center, rotation deg)
SHEPP_LOGAN_ELLIPSES = [
    (1.00, 0.6900, 0.9200, 0.00, 0.0000, 0.0),
    (-0.80, 0.6624, 0.8740, 0.00, -0.0184, 0.0),
    (-0.20, 0.1100, 0.3100, 0.22, 0.0000, -18.0),
    (-0.20, 0.1600, 0.4100, -0.22, 0.0000, 18.0),
    (0.10, 0.2100, 0.2500, 0.00, 0.3500, 0.0),
    (0.10, 0.0460, 0.0460, 0.00, 0.1000, 0.0),
    (0.10, 0.0460, 0.0460, 0.00, -0.1000, 0.0),
    (0.10, 0.0460, 0.0230, -0.08, -0.6050, 0.0),
    (0.10, 0.0230, 0.0230, 0.00, -0.6050, 0.0),
    (0.10, 0.0230, 0.0460, 0.06, -0.6050, 0.0),
]

# per-sample dataset jitter (gen_dataset, kind="shepp")
SHEPP_INTENSITY_JITTER = 0.10   # multiplicative, +-10%
SHEPP_ROTATION_JITTER_DEG = 5.0

DATASET_MAX_SHAPES = 6


def _check_size(n: int) -> None:
    if n < 16 or n % 2 != 0:
        raise ContractViolation(f"image size must be an even integer >= 16, got {n}")


def _pixel_grid(n: int):
    # pixel centers in normalized [-1, 1] coordinates
    coords = (2.0 * np.arange(n) - n + 1.0) / n
    return np.meshgrid(coords, coords, indexing="xy")


def _render_ellipses(n: int, ellipses) -> np.ndarray:
    xx, yy = _pixel_grid(n)
    img = np.zeros((n, n), dtype=np.float64)
    for value, a, b, x0, y0, phi_deg in ellipses:
        phi = math.radians(phi_deg)
        cx, cy = xx - x0, yy - y0
        u = cx * math.cos(phi) + cy * math.sin(phi)
        v = -cx * math.sin(phi) + cy * math.cos(phi)
        img[(u / a) ** 2 + (v / b) ** 2 <= 1.0] += value
    return img


def shepp_logan(size: int) -> np.ndarray:
    """Standard 10-ellipse Shepp-Logan phantom on an NxN grid, clipped to [0, 1]."""
    _check_size(size)
    return np.clip(_render_ellipses(size, SHEPP_LOGAN_ELLIPSES), 0.0, 1.0)


# ---------------------------------------------------------------------------
# Random geometric shapes
# ---------------------------------------------------------------------------

_SUPERSAMPLE = 4


def _sample_shapes(rng: Rng, max_shapes: int) -> list[dict]:
    """Draw shape descriptors in normalized coordinates.

    Geometry is constrained to the 0.88-radius disk so the rendered
    support stays comfortably inside the inscribed circle.
    """
    count = 1 + rng.randint(max_shapes)
    shapes = []
    for _ in range(count):
        kind = ("circle", "rect", "triangle")[rng.randint(3)]
        value = rng.uniform(0.2, 1.0)
        cx = rng.uniform(-0.45, 0.45)
        cy = rng.uniform(-0.45, 0.45)
        if kind == "circle":
            r = rng.uniform(0.08, 0.40)
            r = min(r, 0.88 - math.hypot(cx, cy))
            shapes.append({"kind": kind, "value": value, "cx": cx, "cy": cy, "r": r})
        elif kind == "rect":
            hw = rng.uniform(0.06, 0.35)
            hh = rng.uniform(0.06, 0.35)
            reach = math.hypot(cx, cy) + math.hypot(hw, hh)
            if reach > 0.88:
                shrink = (0.88 - math.hypot(cx, cy)) / math.hypot(hw, hh)
                hw, hh = hw * shrink, hh * shrink
            shapes.append({"kind": kind, "value": value, "cx": cx, "cy": cy, "hw": hw, "hh": hh})
        else:
            verts = []
            for _ in range(3):
                vx = cx + rng.uniform(-0.35, 0.35)
                vy = cy + rng.uniform(-0.35, 0.35)
                norm = math.hypot(vx, vy)
                if norm > 0.85:
                    vx, vy = vx * 0.85 / norm, vy * 0.85 / norm
                verts.append((vx, vy))
            shapes.append({"kind": kind, "value": value, "verts": verts})
    return shapes


def _shape_membership(shape: dict, xx: np.ndarray, yy: np.ndarray) -> np.ndarray:
    if shape["kind"] == "circle":
        return (xx - shape["cx"]) ** 2 + (yy - shape["cy"]) ** 2 <= shape["r"] ** 2
    if shape["kind"] == "rect":
        return (np.abs(xx - shape["cx"]) <= shape["hw"]) & (np.abs(yy - shape["cy"]) <= shape["hh"])
    (x1, y1), (x2, y2), (x3, y3) = shape["verts"]
    d1 = (xx - x2) * (y1 - y2) - (x1 - x2) * (yy - y2)
    d2 = (xx - x3) * (y2 - y3) - (x2 - x3) * (yy - y3)
    d3 = (xx - x1) * (y3 - y1) - (x3 - x1) * (yy - y1)
    neg = (d1 < 0) | (d2 < 0) | (d3 < 0)
    pos = (d1 > 0) | (d2 > 0) | (d3 > 0)
    return ~(neg & pos)


def _render_shapes(size: int, shapes: list[dict]) -> np.ndarray:
    ss = _SUPERSAMPLE
    fine = size * ss
    coords = (2.0 * np.arange(fine) - fine + 1.0) / fine
    xx, yy = np.meshgrid(coords, coords, indexing="xy")
    img = np.zeros((size, size), dtype=np.float64)
    for shape in shapes:
        member = _shape_membership(shape, xx, yy).astype(np.float64)
        coverage = member.reshape(size, ss, size, ss).mean(axis=(1, 3))
        img = np.maximum(img, coverage * shape["value"])
    cgrid = (2.0 * np.arange(size) - size + 1.0) / size
    px, py = np.meshgrid(cgrid, cgrid, indexing="xy")
    img[px ** 2 + py ** 2 > 1.0] = 0.0
    return np.clip(img, 0.0, 1.0)


def random_shapes(size: int, seed: int, max_shapes: int) -> np.ndarray:
    """Anti-aliased random circles/rectangles/triangles, composited by maximum."""
    _check_size(size)
    if not 1 <= max_shapes <= 16:
        raise ContractViolation(f"max_shapes must be in [1, 16], got {max_shapes}")
    return _render_shapes(size, _sample_shapes(Rng(seed), max_shapes))


def uniform_disk(size: int, radius: float, value: float = 1.0) -> np.ndarray:
    """Centered anti-aliased disk; handy analytic reference object."""
    _check_size(size)
    return _render_shapes(size, [{"kind": "circle", "value": value,
                                  "cx": 0.0, "cy": 0.0, "r": 2.0 * radius / size}])


# ---------------------------------------------------------------------------
# Dataset generation
# ---------------------------------------------------------------------------


def _perturbed_shepp(rng: Rng) -> list[tuple]:
    out = []
    for value, a, b, x0, y0, phi in SHEPP_LOGAN_ELLIPSES:
        jitter = 1.0 + rng.uniform(-SHEPP_INTENSITY_JITTER, SHEPP_INTENSITY_JITTER)
        dphi = rng.uniform(-SHEPP_ROTATION_JITTER_DEG, SHEPP_ROTATION_JITTER_DEG)
        out.append((value * jitter, a, b, x0, y0, phi + dphi))
    return out


def sample_image(kind: str, size: int, rng: Rng) -> np.ndarray:
    """One dataset sample driven by the shared generator stream."""
    if kind == "shepp":
        return np.clip(_render_ellipses(size, _perturbed_shepp(rng)), 0.0, 1.0)
    if kind == "shapes":
        return _render_shapes(size, _sample_shapes(rng, DATASET_MAX_SHAPES))
    raise ContractViolation(f"unknown dataset kind {kind!r}")


def gen_dataset(kind: str, count: int, size: int, seed: int, out_dir) -> dict:
    """Write ``count`` phantom images plus a manifest; deterministic per seed."""
    if kind not in ("shepp", "shapes"):
        raise ContractViolation(f"unknown dataset kind {kind!r}")
    _check_size(size)
    if count < 0:
        raise ContractViolation(f"count must be >= 0, got {count}")
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create dataset directory {out_dir}: {exc}") from exc

    rng = Rng(seed)
    images = []
    for i in range(count):
        img = sample_image(kind, size, rng)
        name = f"img_{i:04d}.sint"
        tensorio.write_tensor(out_dir / name, img)
        images.append(name)

    manifest = {"kind": kind, "size": size, "seed": seed, "count": count, "images": images}
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")
    return manifest
