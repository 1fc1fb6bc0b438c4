"""Minimal dense tensor with reverse-mode automatic differentiation.

The engine is deliberately small: a fixed set of primitives (dense
arithmetic, reductions, strided 2-d convolutions, real FFTs along one
axis, complex Hadamard products) with hand-written vector-Jacobian
products, recorded on an explicit tape.  Values are immutable numpy
arrays; every primitive returns a fresh Tensor.

FFT convention used throughout the package: the forward transform is
unnormalized and the inverse divides by the transform length, so
Parseval's identity holds in the exact form ``sum |X|^2 == N * sum x^2``.
"""

from __future__ import annotations

import math
import os
from contextlib import contextmanager

import numpy as np

__all__ = [
    "ContractViolation",
    "Tensor",
    "Tape",
    "Rng",
    "tensor",
    "apply_primitive",
    "register_primitive",
    "backward",
    "gradcheck",
    "record",
    "set_debug_checks",
    "debug_checks_enabled",
    "add",
    "sub",
    "mul",
    "scale",
    "tsum",
    "tmean",
    "square",
    "matvec",
    "conv2d",
    "conv2d_transpose",
    "gelu",
    "sigmoid",
    "concat_channels",
    "split_channels",
    "slice_rows",
    "pad_rows",
    "rfft_axis",
    "irfft_axis",
    "complex_hadamard",
]

_DTYPES = {"f32": np.float32, "f64": np.float64}
_MASK64 = (1 << 64) - 1


class ContractViolation(ValueError):
    """An operation was called outside its documented contract."""


_debug_checks = os.environ.get("SINOFILL_DEBUG", "") not in ("", "0")


def set_debug_checks(on: bool) -> None:
    """Enable per-primitive finiteness checks (slow; for tests/debugging)."""
    global _debug_checks
    _debug_checks = bool(on)


def debug_checks_enabled() -> bool:
    return _debug_checks


# ---------------------------------------------------------------------------
# Deterministic RNG
# ---------------------------------------------------------------------------


class Rng:
    """splitmix64 generator; the single source of randomness in the package.

    Pure 64-bit integer arithmetic, so identical seeds give identical
    streams on every platform.  Constants are the standard splitmix64
    ones (Steele, Lea, Flood 2014).
    """

    def __init__(self, seed: int):
        self._state = int(seed) & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        # 53 random mantissa bits -> double in [0, 1)
        u = self.next_u64() >> 11
        return lo + (hi - lo) * (u * (2.0 ** -53))

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n); rejection sampling, no modulo bias."""
        if n <= 0:
            raise ContractViolation(f"randint needs n >= 1, got {n}")
        limit = _MASK64 + 1 - ((_MASK64 + 1) % n)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n

    def normal(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        # Box-Muller; the spare value is discarded so the generator state
        # stays exactly one 64-bit word.
        u1 = 1.0 - self.uniform()  # (0, 1]
        u2 = self.uniform()
        return mu + sigma * math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def normals(self, shape, mu: float = 0.0, sigma: float = 1.0) -> np.ndarray:
        out = np.empty(int(np.prod(shape)), dtype=np.float64)
        for i in range(out.size):
            out[i] = self.normal(mu, sigma)
        return out.reshape(shape)

    def uniforms(self, shape, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
        out = np.empty(int(np.prod(shape)), dtype=np.float64)
        for i in range(out.size):
            out[i] = self.uniform(lo, hi)
        return out.reshape(shape)

    def sample(self, n: int, k: int) -> list[int]:
        """k distinct integers from [0, n), uniform, via partial Fisher-Yates."""
        if not 0 <= k <= n:
            raise ContractViolation(f"cannot sample {k} of {n}")
        pool = list(range(n))
        for i in range(k):
            j = i + self.randint(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]


# ---------------------------------------------------------------------------
# Tensor and tape
# ---------------------------------------------------------------------------


def _contiguous(arr: np.ndarray, dtype: str) -> np.ndarray:
    # ascontiguousarray promotes 0-d to 1-d, so guard the scalar case
    arr = np.asarray(arr, dtype=_DTYPES[dtype])
    if arr.ndim > 0 and not arr.flags.c_contiguous:
        arr = np.ascontiguousarray(arr)
    return arr


class Tensor:
    """Immutable dense array, optionally participating in the active tape."""

    __slots__ = ("data", "dtype", "requires_grad", "node")

    def __init__(self, data, dtype: str | None = None, requires_grad: bool = False):
        arr = np.asarray(data)
        if dtype is None:
            dtype = "f32" if arr.dtype == np.float32 else "f64"
        if dtype not in _DTYPES:
            raise ContractViolation(f"unknown dtype {dtype!r}; expected 'f32' or 'f64'")
        arr = _contiguous(arr, dtype).copy()
        arr.flags.writeable = False
        self.data = arr
        self.dtype = dtype
        self.requires_grad = bool(requires_grad)
        self.node = None

    @classmethod
    def _wrap(cls, arr: np.ndarray, dtype: str) -> "Tensor":
        # internal fast path: takes ownership of arr, no copy
        t = cls.__new__(cls)
        arr = _contiguous(arr, dtype)
        if not arr.flags.owndata:
            arr = arr.copy()
        arr.flags.writeable = False
        t.data = arr
        t.dtype = dtype
        t.requires_grad = False
        t.node = None
        return t

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        """Read-only view of the underlying array."""
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractViolation(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def _live(self) -> bool:
        return self.requires_grad or self.node is not None

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    def __rmul__(self, other):
        return scale(self, float(other))

    def __neg__(self):
        return scale(self, -1.0)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"


def tensor(data, dtype: str = "f64", requires_grad: bool = False) -> Tensor:
    return Tensor(data, dtype=dtype, requires_grad=requires_grad)


class Node:
    __slots__ = ("prim", "inputs", "attrs", "out", "tape")

    def __init__(self, prim, inputs, attrs, out, tape):
        self.prim = prim
        self.inputs = inputs
        self.attrs = attrs
        self.out = out
        self.tape = tape


class Tape:
    """Ordered record of primitive applications; inputs precede outputs."""

    def __init__(self):
        self.nodes: list[Node] = []
        self.leaves: list[Tensor] = []
        self._leaf_ids: set[int] = set()
        self._consumed = False

    def _record(self, node: Node) -> None:
        self.nodes.append(node)
        for t in node.inputs:
            if t.requires_grad and id(t) not in self._leaf_ids:
                self._leaf_ids.add(id(t))
                self.leaves.append(t)


_TAPE_STACK: list[Tape] = []


@contextmanager
def record():
    """Open a tape; primitives applied to live tensors inside are recorded."""
    tape = Tape()
    _TAPE_STACK.append(tape)
    try:
        yield tape
    finally:
        _TAPE_STACK.pop()


def _active_tape() -> Tape | None:
    return _TAPE_STACK[-1] if _TAPE_STACK else None


# ---------------------------------------------------------------------------
# Primitive registry
# ---------------------------------------------------------------------------

# name -> (forward, vjp)
#   forward(arrays, attrs) -> array
#   vjp(g, arrays, out_array, attrs) -> tuple of per-input gradient arrays
#                                       (None for inputs with no gradient)
_PRIMITIVES: dict[str, tuple] = {}


def register_primitive(name: str, forward, vjp) -> None:
    """Extend the primitive set (used by radon to register its fbp operator)."""
    _PRIMITIVES[name] = (forward, vjp)


def apply_primitive(name: str, inputs, attrs: dict | None = None) -> Tensor:
    """Apply a named primitive to input tensors, recording it if a tape is open."""
    if name not in _PRIMITIVES:
        raise ContractViolation(f"unknown primitive id {name!r}")
    if isinstance(inputs, Tensor):
        inputs = (inputs,)
    inputs = tuple(inputs)
    for t in inputs:
        if not isinstance(t, Tensor):
            raise ContractViolation(f"{name}: inputs must be Tensors, got {type(t).__name__}")
    attrs = dict(attrs or {})
    dtypes = {t.dtype for t in inputs}
    if len(dtypes) > 1:
        raise ContractViolation(f"{name}: mixed dtypes {sorted(dtypes)}")
    dtype = inputs[0].dtype if inputs else "f64"

    forward, _ = _PRIMITIVES[name]
    out_data = forward(tuple(t.data for t in inputs), attrs)
    if _debug_checks and not np.all(np.isfinite(out_data)):
        raise ContractViolation(f"{name}: non-finite output from finite inputs")
    out = Tensor._wrap(out_data, dtype)

    tape = _active_tape()
    if tape is not None and any(t._live() for t in inputs):
        node = Node(name, inputs, attrs, out, tape)
        out.node = node
        tape._record(node)
    return out


def backward(loss: Tensor) -> dict:
    """Reverse pass from a recorded scalar; returns {leaf Tensor: grad Tensor}.

    Leaves that do not influence the loss get zero gradients.  A tape can
    be swept once.
    """
    if loss.shape != ():
        raise ContractViolation(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss.node is None:
        raise ContractViolation("loss was not recorded on an active tape")
    tape = loss.node.tape
    if tape._consumed:
        raise ContractViolation("tape already swept; record a fresh forward pass")
    tape._consumed = True

    grads: dict[int, np.ndarray] = {id(loss): np.ones((), dtype=loss.data.dtype)}
    for node in reversed(tape.nodes):
        g = grads.pop(id(node.out), None)
        if g is None:
            continue
        _, vjp = _PRIMITIVES[node.prim]
        partials = vjp(g, tuple(t.data for t in node.inputs), node.out.data, node.attrs)
        for t, p in zip(node.inputs, partials):
            if p is None or not t._live():
                continue
            if id(t) in grads:
                grads[id(t)] = grads[id(t)] + p
            else:
                grads[id(t)] = p

    result = {}
    for leaf in tape.leaves:
        g = grads.get(id(leaf))
        if g is None:
            g = np.zeros(leaf.shape, dtype=leaf.data.dtype)
        result[leaf] = Tensor._wrap(np.asarray(g, dtype=leaf.data.dtype), leaf.dtype)
    return result


def gradcheck(f, x: Tensor, eps: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``f`` must map one tensor to a scalar tensor and be finite near ``x``
    (f64).  Error is ``|a - n| / max(|a|, |n|, 1e-8)`` per coordinate,
    maximized over coordinates.
    """
    if x.dtype != "f64":
        raise ContractViolation("gradcheck requires an f64 input")
    leaf = Tensor(x.data, dtype="f64", requires_grad=True)
    with record():
        y = f(leaf)
        if y.shape != ():
            raise ContractViolation(f"gradcheck function must be scalar-valued, got {y.shape}")
        analytic = backward(y)[leaf].data

    flat = x.data.reshape(-1)
    worst = 0.0
    for i in range(flat.size):
        bumped = flat.copy()
        bumped[i] = flat[i] + eps
        yp = f(Tensor(bumped.reshape(x.shape), dtype="f64")).item()
        bumped[i] = flat[i] - eps
        ym = f(Tensor(bumped.reshape(x.shape), dtype="f64")).item()
        if not (math.isfinite(yp) and math.isfinite(ym)):
            raise ContractViolation(f"gradcheck: non-finite evaluation at coordinate {i}")
        numeric = (yp - ym) / (2.0 * eps)
        a = analytic.reshape(-1)[i]
        err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
        worst = max(worst, err)
    return worst


# ---------------------------------------------------------------------------
# Primitive implementations
# ---------------------------------------------------------------------------


def _same_shape(name, xs):
    if xs[0].shape != xs[1].shape:
        raise ContractViolation(f"{name}: shape mismatch {xs[0].shape} vs {xs[1].shape}")


def _add_fwd(xs, attrs):
    _same_shape("add", xs)
    return xs[0] + xs[1]


def _sub_fwd(xs, attrs):
    _same_shape("sub", xs)
    return xs[0] - xs[1]


def _mul_fwd(xs, attrs):
    _same_shape("mul", xs)
    return xs[0] * xs[1]


def _scale_fwd(xs, attrs):
    return xs[0] * attrs["c"]


def _sum_fwd(xs, attrs):
    return np.sum(xs[0], axis=attrs.get("axis"))


def _sum_vjp(g, xs, out, attrs):
    axis = attrs.get("axis")
    x = xs[0]
    if axis is None:
        return (np.broadcast_to(g, x.shape).copy(),)
    return (np.broadcast_to(np.expand_dims(g, axis), x.shape).copy(),)


def _mean_fwd(xs, attrs):
    return np.mean(xs[0])


def _mean_vjp(g, xs, out, attrs):
    x = xs[0]
    return (np.broadcast_to(g / x.size, x.shape).copy(),)


_GELU_C = math.sqrt(2.0 / math.pi)  # 0.7978845608028654
_GELU_A = 0.044715


def _gelu_fwd(xs, attrs):
    # tanh approximation: 0.5*x*(1 + tanh(c*(x + a*x^3))) with the
    # constants above, fixed so all platforms agree bitwise per dtype.
    x = xs[0]
    return 0.5 * x * (1.0 + np.tanh(_GELU_C * (x + _GELU_A * x ** 3)))


def _gelu_vjp(g, xs, out, attrs):
    x = xs[0]
    t = np.tanh(_GELU_C * (x + _GELU_A * x ** 3))
    d = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t ** 2) * _GELU_C * (1.0 + 3.0 * _GELU_A * x ** 2)
    return (g * d,)


def _sigmoid_fwd(xs, attrs):
    x = xs[0]
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _matvec_fwd(xs, attrs):
    a, v = xs
    if a.ndim != 2 or v.ndim != 1 or a.shape[1] != v.shape[0]:
        raise ContractViolation(f"matvec: incompatible shapes {a.shape} and {v.shape}")
    return a @ v


def _matvec_vjp(g, xs, out, attrs):
    a, v = xs
    return (np.outer(g, v), a.T @ g)


def _slice_rows_fwd(xs, attrs):
    x = xs[0]
    start, stop = attrs["start"], attrs["stop"]
    if not (0 <= start <= stop <= x.shape[0]):
        raise ContractViolation(f"slice_rows: [{start}, {stop}) out of range for {x.shape}")
    return x[start:stop].copy()


def _slice_rows_vjp(g, xs, out, attrs):
    x = xs[0]
    dx = np.zeros_like(x)
    dx[attrs["start"]:attrs["stop"]] = g
    return (dx,)


def _pad_rows_fwd(xs, attrs):
    x = xs[0]
    before, after = attrs["before"], attrs["after"]
    pad = [(before, after)] + [(0, 0)] * (x.ndim - 1)
    return np.pad(x, pad)


def _pad_rows_vjp(g, xs, out, attrs):
    n = xs[0].shape[0]
    before = attrs["before"]
    return (g[before:before + n].copy(),)


def _as_chw(x):
    if x.ndim == 2:
        return x[None], True
    if x.ndim == 3:
        return x, False
    raise ContractViolation(f"expected (H,W) or (C,H,W), got shape {x.shape}")


def _concat_fwd(xs, attrs):
    parts = [_as_chw(x)[0] for x in xs]
    hw = parts[0].shape[1:]
    for p in parts[1:]:
        if p.shape[1:] != hw:
            raise ContractViolation(f"concat_channels: spatial mismatch {p.shape[1:]} vs {hw}")
    return np.concatenate(parts, axis=0)


def _concat_vjp(g, xs, out, attrs):
    grads = []
    c0 = 0
    for x in xs:
        c = 1 if x.ndim == 2 else x.shape[0]
        piece = g[c0:c0 + c]
        grads.append(piece[0] if x.ndim == 2 else piece)
        c0 += c
    return tuple(grads)


def _split_fwd(xs, attrs):
    x = xs[0]
    if x.ndim < 1:
        raise ContractViolation("split_channels: needs at least 1 dimension")
    start, stop = attrs["start"], attrs["stop"]
    if not (0 <= start < stop <= x.shape[0]):
        raise ContractViolation(f"split_channels: [{start}, {stop}) out of range for {x.shape}")
    return x[start:stop].copy()


def _split_vjp(g, xs, out, attrs):
    dx = np.zeros_like(xs[0])
    dx[attrs["start"]:attrs["stop"]] = g
    return (dx,)


# -- convolutions -----------------------------------------------------------


def _gather_cols(xp, kh, kw, stride, ho, wo):
    # (C, kh, kw, Ho, Wo) patch tensor from a padded (C, Hp, Wp) input
    c = xp.shape[0]
    cols = np.empty((c, kh, kw, ho, wo), dtype=xp.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, i, j] = xp[:, i:i + stride * ho:stride, j:j + stride * wo:stride]
    return cols


def _scatter_cols(cols, hp, wp, stride):
    c, kh, kw, ho, wo = cols.shape
    xp = np.zeros((c, hp, wp), dtype=cols.dtype)
    for i in range(kh):
        for j in range(kw):
            xp[:, i:i + stride * ho:stride, j:j + stride * wo:stride] += cols[:, i, j]
    return xp


def _conv2d_fwd(xs, attrs):
    x, w = xs[0], xs[1]
    stride, pad = attrs.get("stride", 1), attrs.get("pad", 0)
    if x.ndim != 3 or w.ndim != 4 or w.shape[1] != x.shape[0]:
        raise ContractViolation(f"conv2d: incompatible shapes x={x.shape} w={w.shape}")
    f, c, kh, kw = w.shape
    _, h, wd = x.shape
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (wd + 2 * pad - kw) // stride + 1
    if ho < 1 or wo < 1:
        raise ContractViolation(f"conv2d: kernel {kh}x{kw} too large for input {x.shape}")
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    cols = _gather_cols(xp, kh, kw, stride, ho, wo).reshape(c * kh * kw, ho * wo)
    out = (w.reshape(f, -1) @ cols).reshape(f, ho, wo)
    if len(xs) == 3:
        b = xs[2]
        if b.shape != (f,):
            raise ContractViolation(f"conv2d: bias shape {b.shape} != ({f},)")
        out = out + b[:, None, None]
    return out


def _conv2d_vjp(g, xs, out, attrs):
    x, w = xs[0], xs[1]
    stride, pad = attrs.get("stride", 1), attrs.get("pad", 0)
    f, c, kh, kw = w.shape
    _, h, wd = x.shape
    _, ho, wo = g.shape
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    cols = _gather_cols(xp, kh, kw, stride, ho, wo).reshape(c * kh * kw, ho * wo)
    gm = g.reshape(f, -1)
    dw = (gm @ cols.T).reshape(w.shape)
    dcols = (w.reshape(f, -1).T @ gm).reshape(c, kh, kw, ho, wo)
    dxp = _scatter_cols(dcols, h + 2 * pad, wd + 2 * pad, stride)
    dx = dxp[:, pad:pad + h, pad:pad + wd].copy() if pad else dxp
    if len(xs) == 3:
        return (dx, dw, g.sum(axis=(1, 2)))
    return (dx, dw)


def _conv2dT_fwd(xs, attrs):
    x, w = xs[0], xs[1]
    stride = attrs.get("stride", 1)
    pad = attrs.get("pad", 0)
    out_pad = attrs.get("out_pad", 0)
    if x.ndim != 3 or w.ndim != 4 or w.shape[0] != x.shape[0]:
        raise ContractViolation(f"conv2d_transpose: incompatible shapes x={x.shape} w={w.shape}")
    if not 0 <= out_pad < stride and not (out_pad == 0 and stride == 1):
        raise ContractViolation(f"conv2d_transpose: out_pad {out_pad} must be < stride {stride}")
    f, c, kh, kw = w.shape
    _, h, wd = x.shape
    ho = (h - 1) * stride - 2 * pad + kh + out_pad
    wo = (wd - 1) * stride - 2 * pad + kw + out_pad
    cols = (w.reshape(f, -1).T @ x.reshape(f, -1)).reshape(c, kh, kw, h, wd)
    yp = _scatter_cols(cols, ho + 2 * pad, wo + 2 * pad, stride)
    out = yp[:, pad:pad + ho, pad:pad + wo].copy() if pad else yp[:, :ho, :wo].copy()
    if len(xs) == 3:
        b = xs[2]
        if b.shape != (c,):
            raise ContractViolation(f"conv2d_transpose: bias shape {b.shape} != ({c},)")
        out = out + b[:, None, None]
    return out


def _conv2dT_vjp(g, xs, out, attrs):
    x, w = xs[0], xs[1]
    stride = attrs.get("stride", 1)
    pad = attrs.get("pad", 0)
    f, c, kh, kw = w.shape
    _, h, wd = x.shape
    gp = np.pad(g, ((0, 0), (pad, pad), (pad, pad)))
    # pad so the strided gather covers the full scatter footprint
    need_h = kh + stride * (h - 1) + 1
    need_w = kw + stride * (wd - 1) + 1
    extra_h = max(0, need_h - gp.shape[1])
    extra_w = max(0, need_w - gp.shape[2])
    if extra_h or extra_w:
        gp = np.pad(gp, ((0, 0), (0, extra_h), (0, extra_w)))
    cols = _gather_cols(gp, kh, kw, stride, h, wd).reshape(c * kh * kw, h * wd)
    dx = (w.reshape(f, -1) @ cols).reshape(f, h, wd)
    dw = (x.reshape(f, -1) @ cols.T).reshape(w.shape)
    if len(xs) == 3:
        return (dx, dw, g.sum(axis=(1, 2)))
    return (dx, dw)


# -- real FFTs --------------------------------------------------------------


def _rfft_fwd(xs, attrs):
    x = xs[0]
    axis = attrs["axis"] % x.ndim
    spec = np.fft.rfft(x, axis=axis)  # unnormalized forward
    return np.stack([spec.real, spec.imag], axis=0)


def _rfft_vjp(g, xs, out, attrs):
    x = xs[0]
    axis = attrs["axis"] % x.ndim
    n = x.shape[axis]
    gc = g[0] + 1j * g[1]
    bins = gc.shape[axis]
    pad = [(0, 0)] * gc.ndim
    pad[axis] = (0, n - bins)
    # transpose of the real-to-complex DFT: sum only over the stored bins
    dx = np.real(np.fft.ifft(np.pad(gc, pad), axis=axis) * n)
    return (dx.astype(x.dtype, copy=False),)


def _irfft_fwd(xs, attrs):
    x = xs[0]
    if x.ndim < 2 or x.shape[0] != 2:
        raise ContractViolation(f"irfft_axis: expected leading real/imag axis of size 2, got {x.shape}")
    n = attrs["len"]
    axis = attrs["axis"] % (x.ndim - 1)
    if x.shape[1 + axis] != n // 2 + 1:
        raise ContractViolation(
            f"irfft_axis: {x.shape[1 + axis]} bins along axis {axis} inconsistent with len {n}")
    z = x[0] + 1j * x[1]
    return np.fft.irfft(z, n=n, axis=axis)  # inverse divides by n


def _irfft_vjp(g, xs, out, attrs):
    n = attrs["len"]
    axis = attrs["axis"] % g.ndim
    spec = np.fft.rfft(g, axis=axis)
    bins = spec.shape[axis]
    shape = [1] * spec.ndim
    shape[axis] = bins
    sr = np.full(bins, 2.0)
    si = np.full(bins, 2.0)
    sr[0] = 1.0
    si[0] = 0.0
    if n % 2 == 0:
        sr[-1] = 1.0
        si[-1] = 0.0
    dr = spec.real * sr.reshape(shape) / n
    di = spec.imag * si.reshape(shape) / n
    return (np.stack([dr, di], axis=0).astype(xs[0].dtype, copy=False),)


def _hadamard_views(x, k, attrs):
    if k.shape == x.shape:
        return k, None
    if x.ndim == 4 and k.ndim == 3 and k.shape[:2] == (2, x.shape[1]):
        axis = attrs.get("axis")
        if axis == 2 and k.shape[2] == x.shape[3]:  # kernel along last spatial axis
            return k[:, :, None, :], 2
        if axis == 1 and k.shape[2] == x.shape[2]:  # kernel along first spatial axis
            return k[:, :, :, None], 3
    raise ContractViolation(
        f"complex_hadamard: kernel shape {k.shape} incompatible with input {x.shape} "
        f"(axis={attrs.get('axis')})")


def _hadamard_fwd(xs, attrs):
    x, k = xs
    if x.ndim < 1 or x.shape[0] != 2:
        raise ContractViolation(f"complex_hadamard: input must stack real/imag first, got {x.shape}")
    kb, _ = _hadamard_views(x, k, attrs)
    xr, xi = x[0], x[1]
    kr, ki = kb[0], kb[1]
    return np.stack([xr * kr - xi * ki, xr * ki + xi * kr], axis=0)


def _hadamard_vjp(g, xs, out, attrs):
    x, k = xs
    kb, sum_axis = _hadamard_views(x, k, attrs)
    xr, xi = x[0], x[1]
    kr, ki = kb[0], kb[1]
    gr, gi = g[0], g[1]
    # dL/dx = g * conj(k), dL/dk = g * conj(x), in stacked-real form
    dx = np.stack([gr * kr + gi * ki, -gr * ki + gi * kr], axis=0)
    dk_full = np.stack([gr * xr + gi * xi, -gr * xi + gi * xr], axis=0)
    if sum_axis is None:
        dk = dk_full
    else:
        dk = dk_full.sum(axis=sum_axis)
    return (dx, dk)


register_primitive("add", _add_fwd, lambda g, xs, out, a: (g, g))
register_primitive("sub", _sub_fwd, lambda g, xs, out, a: (g, -g))
register_primitive("mul", _mul_fwd, lambda g, xs, out, a: (g * xs[1], g * xs[0]))
register_primitive("scale", _scale_fwd, lambda g, xs, out, a: (g * a["c"],))
register_primitive("sum", _sum_fwd, _sum_vjp)
register_primitive("mean", _mean_fwd, _mean_vjp)
register_primitive("square", lambda xs, a: xs[0] ** 2, lambda g, xs, out, a: (2.0 * xs[0] * g,))
register_primitive("matvec", _matvec_fwd, _matvec_vjp)
register_primitive("conv2d", _conv2d_fwd, _conv2d_vjp)
register_primitive("conv2d_transpose", _conv2dT_fwd, _conv2dT_vjp)
register_primitive("gelu", _gelu_fwd, _gelu_vjp)
register_primitive("sigmoid", _sigmoid_fwd, lambda g, xs, out, a: (g * out * (1.0 - out),))
register_primitive("concat_channels", _concat_fwd, _concat_vjp)
register_primitive("split_channels", _split_fwd, _split_vjp)
register_primitive("slice_rows", _slice_rows_fwd, _slice_rows_vjp)
register_primitive("pad_rows", _pad_rows_fwd, _pad_rows_vjp)
register_primitive("rfft_axis", _rfft_fwd, _rfft_vjp)
register_primitive("irfft_axis", _irfft_fwd, _irfft_vjp)
register_primitive("complex_hadamard", _hadamard_fwd, _hadamard_vjp)


# ---------------------------------------------------------------------------
# Convenience wrappers
# ---------------------------------------------------------------------------


def add(a, b):
    return apply_primitive("add", (a, b))


def sub(a, b):
    return apply_primitive("sub", (a, b))


def mul(a, b):
    return apply_primitive("mul", (a, b))


def scale(x, c: float):
    return apply_primitive("scale", (x,), {"c": float(c)})


def tsum(x, axis: int | None = None):
    return apply_primitive("sum", (x,), {"axis": axis})


def tmean(x):
    return apply_primitive("mean", (x,))


def square(x):
    return apply_primitive("square", (x,))


def matvec(a, v):
    return apply_primitive("matvec", (a, v))


def conv2d(x, w, b=None, stride: int = 1, pad: int = 0):
    inputs = (x, w) if b is None else (x, w, b)
    return apply_primitive("conv2d", inputs, {"stride": stride, "pad": pad})


def conv2d_transpose(x, w, b=None, stride: int = 1, pad: int = 0, out_pad: int = 0):
    inputs = (x, w) if b is None else (x, w, b)
    return apply_primitive("conv2d_transpose", inputs,
                           {"stride": stride, "pad": pad, "out_pad": out_pad})


def gelu(x):
    return apply_primitive("gelu", (x,))


def sigmoid(x):
    return apply_primitive("sigmoid", (x,))


def concat_channels(*xs):
    return apply_primitive("concat_channels", xs)


def split_channels(x, start: int, stop: int):
    return apply_primitive("split_channels", (x,), {"start": start, "stop": stop})


def slice_rows(x, start: int, stop: int):
    return apply_primitive("slice_rows", (x,), {"start": start, "stop": stop})


def pad_rows(x, before: int, after: int):
    return apply_primitive("pad_rows", (x,), {"before": before, "after": after})


def rfft_axis(x, axis: int):
    return apply_primitive("rfft_axis", (x,), {"axis": axis})


def irfft_axis(x, axis: int, length: int):
    return apply_primitive("irfft_axis", (x,), {"axis": axis, "len": length})


def complex_hadamard(x, k, axis: int | None = None):
    return apply_primitive("complex_hadamard", (x, k), {"axis": axis})
