"""Classical sinogram completion baselines.

Both methods never touch known rows: linear interpolation fills each
masked row per detector bin from the nearest unmasked rows, and TV
minimization runs projected gradient descent on the smoothed isotropic
total variation, re-imposing the known rows after every step.
"""

from __future__ import annotations

import numpy as np

from .masking import MaskSpec
from .tensor import ContractViolation

_TV_EPS = 1e-8


def linear_interp_inpaint(masked, mask: MaskSpec) -> np.ndarray:
    """Per-bin linear interpolation across missing angle rows.

    Boundary gaps copy the nearest unmasked row.  Exact on sinograms
    whose rows are affine in the angle index.
    """
    s = np.asarray(masked, dtype=np.float64)
    if mask.n_angles != s.shape[0]:
        raise ContractViolation(
            f"mask covers {mask.n_angles} angles but sinogram has {s.shape[0]} rows")
    missing = set(mask.masked)
    known = [i for i in range(s.shape[0]) if i not in missing]
    if not known:
        raise ContractViolation("all rows masked; nothing to interpolate from")
    out = s.copy()
    known_arr = np.asarray(known)
    for r in mask.masked:
        pos = np.searchsorted(known_arr, r)
        if pos == 0:
            out[r] = s[known_arr[0]]
        elif pos == len(known_arr):
            out[r] = s[known_arr[-1]]
        else:
            lo, hi = known_arr[pos - 1], known_arr[pos]
            w = (r - lo) / (hi - lo)
            out[r] = (1.0 - w) * s[lo] + w * s[hi]
    return out


def tv_objective(u: np.ndarray) -> float:
    """Smoothed isotropic total variation (forward differences)."""
    dx = np.diff(u, axis=1, append=u[:, -1:])
    dy = np.diff(u, axis=0, append=u[-1:, :])
    return float(np.sum(np.sqrt(dx ** 2 + dy ** 2 + _TV_EPS)))


def _tv_gradient(u: np.ndarray) -> np.ndarray:
    dx = np.diff(u, axis=1, append=u[:, -1:])
    dy = np.diff(u, axis=0, append=u[-1:, :])
    mag = np.sqrt(dx ** 2 + dy ** 2 + _TV_EPS)
    nx = dx / mag
    ny = dy / mag
    grad = -nx - ny
    grad[:, 1:] += nx[:, :-1]
    grad[1:, :] += ny[:-1, :]
    return grad


def tv_inpaint(masked, mask: MaskSpec, iterations: int = 200,
               step: float = 0.1) -> np.ndarray:
    """Projected gradient descent on the TV objective, starting from the
    linear-interpolation fill; returns the iterate with the lowest
    objective."""
    if iterations < 1:
        raise ContractViolation(f"iterations must be >= 1, got {iterations}")
    s = np.asarray(masked, dtype=np.float64)
    known_rows = [i for i in range(s.shape[0]) if i not in set(mask.masked)]
    u = linear_interp_inpaint(s, mask)
    best = u.copy()
    best_obj = tv_objective(u)
    for it in range(iterations):
        u = u - step * _tv_gradient(u)
        u[known_rows] = s[known_rows]
        obj = tv_objective(u)
        if not np.isfinite(obj):
            raise RuntimeError(f"TV objective became non-finite at iteration {it}")
        if obj < best_obj:
            best_obj = obj
            best = u.copy()
    best[known_rows] = s[known_rows]
    return best
