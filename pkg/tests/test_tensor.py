"""Autodiff engine: primitive semantics, VJPs, tape behavior, RNG."""

import numpy as np
import pytest

import sinofill.tensor as T
from sinofill.tensor import ContractViolation, Rng, Tensor


def rand(shape, seed=0):
    return np.random.default_rng(seed).standard_normal(shape)


# ---------------------------------------------------------------------------
# forward semantics
# ---------------------------------------------------------------------------


def test_add_componentwise():
    out = T.add(Tensor([1.0, 2.0]), Tensor([3.0, 4.0]))
    np.testing.assert_array_equal(out.numpy(), [4.0, 6.0])


def test_conv2d_identity_kernel():
    img = Tensor(rand((1, 6, 6)))
    kernel = Tensor(np.ones((1, 1, 1, 1)))
    out = T.conv2d(img, kernel, stride=1, pad=0)
    np.testing.assert_allclose(out.numpy(), img.numpy())


@pytest.mark.parametrize("length", [8, 9, 16])
@pytest.mark.parametrize("axis", [0, 1])
def test_rfft_roundtrip(length, axis):
    shape = (length, 5) if axis == 0 else (5, length)
    x = Tensor(rand(shape, seed=length + axis))
    back = T.irfft_axis(T.rfft_axis(x, axis=axis), axis=axis, length=length)
    np.testing.assert_allclose(back.numpy(), x.numpy(), rtol=1e-6, atol=1e-9)


def test_rfft_roundtrip_f32():
    x = Tensor(rand((4, 16)).astype(np.float32), dtype="f32")
    back = T.irfft_axis(T.rfft_axis(x, axis=1), axis=1, length=16)
    np.testing.assert_allclose(back.numpy(), x.numpy(), rtol=1e-4, atol=1e-5)


def test_rfft_linearity():
    x, y = rand((3, 8), 1), rand((3, 8), 2)
    lhs = T.rfft_axis(Tensor(2.0 * x + 3.0 * y), axis=1).numpy()
    rhs = 2.0 * T.rfft_axis(Tensor(x), axis=1).numpy() + 3.0 * T.rfft_axis(Tensor(y), axis=1).numpy()
    np.testing.assert_allclose(lhs, rhs, rtol=1e-6, atol=1e-9)


def test_rfft_bin_count():
    # full real-transform size: N//2 + 1 complex bins
    out = T.rfft_axis(Tensor(rand((3, 16))), axis=1)
    assert out.shape == (2, 3, 9)


def test_unknown_primitive_rejected():
    with pytest.raises(ContractViolation, match="unknown primitive"):
        T.apply_primitive("transmogrify", (Tensor([1.0]),))


def test_shape_mismatch_rejected():
    with pytest.raises(ContractViolation, match="shape mismatch"):
        T.add(Tensor([1.0, 2.0]), Tensor([1.0, 2.0, 3.0]))


def test_mixed_dtypes_rejected():
    with pytest.raises(ContractViolation, match="mixed dtypes"):
        T.add(Tensor([1.0], dtype="f32"), Tensor([1.0], dtype="f64"))


def test_tensor_immutable():
    t = Tensor([1.0, 2.0])
    with pytest.raises(ValueError):
        t.numpy()[0] = 5.0


def test_gelu_constants():
    # tanh approximation evaluated directly
    x = np.array([-1.0, 0.0, 0.5, 2.0])
    c, a = 0.7978845608028654, 0.044715
    expect = 0.5 * x * (1 + np.tanh(c * (x + a * x ** 3)))
    np.testing.assert_allclose(T.gelu(Tensor(x)).numpy(), expect, rtol=1e-15)


def test_concat_and_split_channels():
    a, b = rand((4, 5), 1), rand((2, 4, 5), 2)
    cat = T.concat_channels(Tensor(a), Tensor(b))
    assert cat.shape == (3, 4, 5)
    np.testing.assert_array_equal(T.split_channels(cat, 0, 1).numpy()[0], a)
    np.testing.assert_array_equal(T.split_channels(cat, 1, 3).numpy(), b)


def test_slice_pad_rows():
    x = rand((6, 3))
    sliced = T.slice_rows(Tensor(x), 2, 5)
    np.testing.assert_array_equal(sliced.numpy(), x[2:5])
    padded = T.pad_rows(Tensor(x), 1, 2)
    assert padded.shape == (9, 3)
    np.testing.assert_array_equal(padded.numpy()[1:7], x)
    assert np.all(padded.numpy()[0] == 0) and np.all(padded.numpy()[7:] == 0)


def test_conv2d_transpose_shape():
    x = Tensor(rand((3, 8, 8)))
    w = Tensor(rand((3, 2, 3, 3)))
    out = T.conv2d_transpose(x, w, stride=2, pad=1, out_pad=1)
    assert out.shape == (2, 16, 16)


# ---------------------------------------------------------------------------
# backward / tape
# ---------------------------------------------------------------------------


def test_backward_sum():
    x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
    with T.record():
        grads = T.backward(T.tsum(x))
    np.testing.assert_array_equal(grads[x].numpy(), [1.0, 1.0, 1.0])


def test_backward_sum_of_squares():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with T.record():
        grads = T.backward(T.tsum(T.square(x)))
    np.testing.assert_array_equal(grads[x].numpy(), [2.0, 4.0])


def test_backward_fanout_accumulates():
    x = Tensor([3.0], requires_grad=True)
    with T.record():
        y = T.add(x, x)
        grads = T.backward(T.tsum(y))
    np.testing.assert_array_equal(grads[x].numpy(), [2.0])


def test_backward_unreached_leaf_zero():
    x = Tensor([1.0, 2.0], requires_grad=True)
    y = Tensor([5.0], requires_grad=True)
    with T.record():
        loss = T.tsum(T.square(x))
        _ = T.square(y)  # recorded but not part of the loss
        grads = T.backward(loss)
    np.testing.assert_array_equal(grads[y].numpy(), [0.0])


def test_backward_requires_scalar():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with T.record():
        y = T.square(x)
        with pytest.raises(ContractViolation, match="scalar"):
            T.backward(y)


def test_tape_single_sweep():
    x = Tensor([1.0], requires_grad=True)
    with T.record():
        loss = T.tsum(x)
        T.backward(loss)
        with pytest.raises(ContractViolation, match="already swept"):
            T.backward(loss)


def test_gradients_deterministic():
    def run():
        x = Tensor(rand(12, seed=9), requires_grad=True)
        with T.record():
            loss = T.tsum(T.square(T.gelu(x)))
            return T.backward(loss)[x].numpy().copy()

    np.testing.assert_array_equal(run(), run())


# ---------------------------------------------------------------------------
# gradcheck: every primitive
# ---------------------------------------------------------------------------


def test_gradcheck_quadratic_tight():
    err = T.gradcheck(lambda t: T.tsum(T.square(t)), Tensor(rand(8, 3)))
    assert err <= 1e-7


def test_gradcheck_gelu():
    err = T.gradcheck(lambda t: T.tsum(T.gelu(t)), Tensor(rand(8, 4)))
    assert err <= 1e-4


_X2 = Tensor(rand((5, 4), 11))
_X3 = Tensor(rand((2, 4, 6), 12))
_X4 = Tensor(rand((2, 2, 4, 6), 13))
_W = Tensor(rand((3, 2, 3, 3), 14))
_WT = Tensor(rand((2, 3, 3, 3), 15))
_B3 = Tensor(rand(3, 16))
_BT = Tensor(rand(3, 17))
_MAT = Tensor(rand((4, 6), 18))
_VEC = Tensor(rand(6, 19))
_KW = Tensor(rand((2, 2, 6), 20))
_KH = Tensor(rand((2, 2, 4), 21))
_K4 = Tensor(rand((2, 2, 4, 6), 22))

PRIMITIVE_CASES = [
    ("add", lambda t: T.tsum(T.square(T.add(t, _X2))), _X2),
    ("sub", lambda t: T.tsum(T.square(T.sub(_X2, t))), _X2),
    ("mul", lambda t: T.tsum(T.square(T.mul(t, _X2))), _X2),
    ("scale", lambda t: T.tsum(T.square(T.scale(t, -2.5))), _X2),
    ("sum", lambda t: T.square(T.tsum(t)), _X2),
    ("sum_axis", lambda t: T.tsum(T.square(T.tsum(t, axis=1))), _X2),
    ("mean", lambda t: T.square(T.tmean(t)), _X2),
    ("square", lambda t: T.tsum(T.square(t)), _X2),
    ("matvec_a", lambda t: T.tsum(T.square(T.matvec(t, _VEC))), _MAT),
    ("matvec_v", lambda t: T.tsum(T.square(T.matvec(_MAT, t))), _VEC),
    ("conv2d_x", lambda t: T.tsum(T.square(T.conv2d(t, _W, _B3, stride=2, pad=1))), _X3),
    ("conv2d_w", lambda t: T.tsum(T.square(T.conv2d(_X3, t, _B3, stride=2, pad=1))), _W),
    ("conv2d_b", lambda t: T.tsum(T.square(T.conv2d(_X3, _W, t, stride=2, pad=1))), _B3),
    ("convT_x", lambda t: T.tsum(T.square(T.conv2d_transpose(t, _WT, _BT, stride=2, pad=1, out_pad=1))), _X3),
    ("convT_w", lambda t: T.tsum(T.square(T.conv2d_transpose(_X3, t, _BT, stride=2, pad=1, out_pad=1))), _WT),
    ("convT_b", lambda t: T.tsum(T.square(T.conv2d_transpose(_X3, _WT, t, stride=2, pad=1, out_pad=1))), _BT),
    ("gelu", lambda t: T.tsum(T.square(T.gelu(t))), _X2),
    ("sigmoid", lambda t: T.tsum(T.square(T.sigmoid(t))), _X2),
    ("concat", lambda t: T.tsum(T.square(T.concat_channels(t, _X3))), Tensor(rand((4, 6), 23))),
    ("split", lambda t: T.tsum(T.square(T.split_channels(t, 1, 2))), _X3),
    ("slice_rows", lambda t: T.tsum(T.square(T.slice_rows(t, 1, 4))), _X2),
    ("pad_rows", lambda t: T.tsum(T.square(T.pad_rows(t, 2, 1))), _X2),
    ("rfft", lambda t: T.tsum(T.square(T.rfft_axis(t, axis=1))), _X2),
    ("irfft", lambda t: T.tsum(T.square(T.irfft_axis(t, axis=0, length=8))), Tensor(rand((2, 5), 24))),
    ("irfft_odd", lambda t: T.tsum(T.square(T.irfft_axis(t, axis=0, length=9))), Tensor(rand((2, 5), 25))),
    ("hadamard_x", lambda t: T.tsum(T.square(T.complex_hadamard(t, _KW, axis=2))), _X4),
    ("hadamard_kw", lambda t: T.tsum(T.square(T.complex_hadamard(_X4, t, axis=2))), _KW),
    ("hadamard_kh", lambda t: T.tsum(T.square(T.complex_hadamard(_X4, t, axis=1))), _KH),
    ("hadamard_full", lambda t: T.tsum(T.square(T.complex_hadamard(_X4, t))), _K4),
]


@pytest.mark.parametrize("name,f,x", PRIMITIVE_CASES, ids=[c[0] for c in PRIMITIVE_CASES])
def test_gradcheck_primitive(name, f, x):
    assert T.gradcheck(f, x) <= 1e-4


def test_gradcheck_reports_nonfinite():
    def bad(t):
        return T.tmean(T.scale(t, float("inf")))

    with pytest.raises(ContractViolation):
        T.gradcheck(bad, Tensor([1.0]))


# ---------------------------------------------------------------------------
# Rng
# ---------------------------------------------------------------------------


def test_rng_reproducible():
    a = [Rng(123).next_u64() for _ in range(4)]
    b = [Rng(123).next_u64() for _ in range(4)]
    assert a == b


def test_rng_known_stream():
    # splitmix64 reference values for seed 1234567
    r = Rng(1234567)
    assert [r.next_u64() for _ in range(3)] == [
        6457827717110365317,
        3203168211198807973,
        9817491932198370423,
    ]


def test_rng_sample_range_and_uniqueness():
    got = Rng(5).sample(20, 10)
    assert len(set(got)) == 10
    assert all(0 <= v < 20 for v in got)


def test_rng_uniform_bounds():
    r = Rng(9)
    vals = [r.uniform(-2.0, 3.0) for _ in range(1000)]
    assert all(-2.0 <= v < 3.0 for v in vals)
