"""Parallel-beam forward projection and filtered backprojection.

Conventions: a sinogram is an (A, D) array of line integrals, one row
per projection angle theta_i = i*pi/A, one column per unit-spaced
detector bin centered on the image.  D equals the image side N.  Pixel
centers sit at integer offsets from the image center (N-1)/2; the
reconstruction circle is the inscribed circle of radius N/2.

``fbp`` is linear in the sinogram and is also registered as a
differentiable primitive (name ``"fbp"``) whose backward pass is the
exact adjoint: mask/scale, bilinear-splat reprojection, then the same
self-adjoint ramp filtering.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .tensor import ContractViolation, Tensor, apply_primitive, register_primitive

FILTERS = ("ramp", "hann")


def _check_image(image) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] != img.shape[1]:
        raise ContractViolation(f"image must be square 2-d, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ContractViolation("image contains non-finite values")
    return img


def _check_sino(sino) -> np.ndarray:
    s = np.asarray(sino, dtype=np.float64)
    if s.ndim != 2:
        raise ContractViolation(f"sinogram must be 2-d, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise ContractViolation("sinogram contains non-finite values")
    return s


def circle_mask(n: int) -> np.ndarray:
    """Boolean mask of pixel centers inside the inscribed circle."""
    c = (n - 1) / 2.0
    yy, xx = np.mgrid[0:n, 0:n]
    return (xx - c) ** 2 + (yy - c) ** 2 <= (n / 2.0) ** 2


def _bilinear_sample(img: np.ndarray, yy: np.ndarray, xx: np.ndarray) -> np.ndarray:
    """Sample img at fractional (row, col) coordinates; zero outside."""
    n = img.shape[0]
    y0 = np.floor(yy).astype(np.int64)
    x0 = np.floor(xx).astype(np.int64)
    dy = yy - y0
    dx = xx - x0
    out = np.zeros(yy.shape, dtype=img.dtype)
    for oy, ox, w in ((0, 0, (1 - dy) * (1 - dx)), (0, 1, (1 - dy) * dx),
                      (1, 0, dy * (1 - dx)), (1, 1, dy * dx)):
        yi = y0 + oy
        xi = x0 + ox
        m = (yi >= 0) & (yi < n) & (xi >= 0) & (xi < n)
        out[m] += w[m] * img[yi[m], xi[m]]
    return out


def project(image, n_angles: int) -> np.ndarray:
    """Radon transform: (A, D) line integrals by rotated bilinear sampling.

    Rays step through the image with unit step length, so each row is a
    plain sum of interpolated samples.
    """
    img = _check_image(image)
    if n_angles < 2:
        raise ContractViolation(f"need at least 2 angles, got {n_angles}")
    n = img.shape[0]
    c = (n - 1) / 2.0
    offsets = np.arange(n) - c  # detector positions == integration steps
    s_grid, t_grid = np.meshgrid(offsets, offsets, indexing="ij")  # (D, T)
    sino = np.empty((n_angles, n), dtype=np.float64)
    for i in range(n_angles):
        theta = i * np.pi / n_angles
        cos_t, sin_t = np.cos(theta), np.sin(theta)
        xx = s_grid * cos_t - t_grid * sin_t + c
        yy = s_grid * sin_t + t_grid * cos_t + c
        sino[i] = _bilinear_sample(img, yy, xx).sum(axis=1)
    return sino


def angle_sums(sino) -> np.ndarray:
    """Per-angle detector sums; constant across angles for in-circle objects."""
    return _check_sino(sino).sum(axis=1)


def total_absorption(image) -> float:
    """Pixel sum (unit pixel area) restricted to the inscribed circle."""
    img = _check_image(image)
    return float(img[circle_mask(img.shape[0])].sum())


# ---------------------------------------------------------------------------
# Filtered backprojection
# ---------------------------------------------------------------------------


def _filter_rows(rows: np.ndarray, filter_name: str) -> np.ndarray:
    """Ramp-filter detector rows: zero-pad to the next power of two >= 2D,
    multiply in frequency, inverse transform, crop.  The frequency response
    is real and even, so this map is its own transpose."""
    if filter_name not in FILTERS:
        raise ContractViolation(f"unknown filter {filter_name!r}; expected one of {FILTERS}")
    d = rows.shape[1]
    size = 1
    while size < 2 * d:
        size *= 2
    freqs = np.fft.fftfreq(size)
    resp = 2.0 * np.abs(freqs)
    if filter_name == "hann":
        resp *= 0.5 * (1.0 + np.cos(2.0 * np.pi * freqs))
    padded = np.zeros((rows.shape[0], size), dtype=np.float64)
    padded[:, :d] = rows
    return np.real(np.fft.ifft(np.fft.fft(padded, axis=1) * resp[None, :], axis=1))[:, :d]


@lru_cache(maxsize=4)
def _bp_tables(n_angles: int, n: int):
    """Flattened bilinear gather/scatter tables for backprojection.

    For each (angle, pixel) pair: indices into the flattened (A, D)
    filtered sinogram for the two neighboring detector bins, and the
    matching interpolation weights (zeroed outside the detector range).
    """
    d = n
    c = (n - 1) / 2.0
    yy, xx = np.mgrid[0:n, 0:n].astype(np.float64)
    xs = (xx - c).ravel()
    ys = (yy - c).ravel()
    thetas = np.arange(n_angles) * np.pi / n_angles
    t = np.cos(thetas)[:, None] * xs[None, :] + np.sin(thetas)[:, None] * ys[None, :] + c
    i0 = np.floor(t).astype(np.int64)
    frac = t - i0
    w0 = np.where((i0 >= 0) & (i0 < d), 1.0 - frac, 0.0)
    w1 = np.where((i0 + 1 >= 0) & (i0 + 1 < d), frac, 0.0)
    j0 = np.clip(i0, 0, d - 1)
    j1 = np.clip(i0 + 1, 0, d - 1)
    rows = np.arange(n_angles, dtype=np.int64)[:, None] * d
    flat0 = (rows + j0).ravel()
    flat1 = (rows + j1).ravel()
    return flat0, flat1, w0.ravel(), w1.ravel()


def _backproject(filtered: np.ndarray) -> np.ndarray:
    a, d = filtered.shape
    flat0, flat1, w0, w1 = _bp_tables(a, d)
    values = filtered.ravel()
    acc = values[flat0] * w0 + values[flat1] * w1
    return acc.reshape(a, d * d).sum(axis=0).reshape(d, d)


def _backproject_adjoint(grad: np.ndarray, n_angles: int) -> np.ndarray:
    n = grad.shape[0]
    flat0, flat1, w0, w1 = _bp_tables(n_angles, n)
    u = np.tile(grad.ravel(), n_angles)
    out = np.bincount(flat0, weights=w0 * u, minlength=n_angles * n)
    out += np.bincount(flat1, weights=w1 * u, minlength=n_angles * n)
    return out.reshape(n_angles, n)


def fbp(sino, filter: str = "ramp") -> np.ndarray:
    """Filtered backprojection, masked to the inscribed circle."""
    s = _check_sino(sino)
    a, d = s.shape
    recon = _backproject(_filter_rows(s, filter))
    recon *= np.pi / (2.0 * a)
    recon[~circle_mask(d)] = 0.0
    return recon


def _fbp_fwd(xs, attrs):
    return fbp(xs[0], attrs.get("filter", "ramp"))


def _fbp_vjp(g, xs, out, attrs):
    a = xs[0].shape[0]
    masked = np.where(circle_mask(g.shape[0]), g, 0.0) * (np.pi / (2.0 * a))
    return (_filter_rows(_backproject_adjoint(masked, a), attrs.get("filter", "ramp")),)


register_primitive("fbp", _fbp_fwd, _fbp_vjp)


def fbp_t(sino: Tensor, filter: str = "ramp") -> Tensor:
    """Differentiable fbp on a (A, D) tensor."""
    return apply_primitive("fbp", (sino,), {"filter": filter})
