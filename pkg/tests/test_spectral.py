"""Frequency convolution against direct circular-convolution oracles."""

import numpy as np
import pytest

import sinofill.tensor as T
from sinofill import spectral
from sinofill.spectral import FreqConvParams, delta_kernel, freq_conv_axis, freq_conv_block
from sinofill.tensor import ContractViolation, Tensor


def circular_conv_reference(x, kern, axis):
    """O(N^2) per-channel circular convolution, summed tap by tap."""
    out = np.zeros_like(x)
    length = x.shape[axis]
    for c in range(x.shape[0]):
        for n in range(length):
            acc = 0.0 * x[(c,) + (0,) * (x.ndim - 1)]
            for m in range(length):
                if axis == 2:
                    acc = acc + x[c, :, m] * kern[c, (n - m) % length]
                else:
                    acc = acc + x[c, m, :] * kern[c, (n - m) % length]
            if axis == 2:
                out[c, :, n] = acc
            else:
                out[c, n, :] = acc
    return out


def test_delta_kernel_is_identity():
    x = Tensor(np.random.default_rng(0).standard_normal((4, 8, 16)))
    out = freq_conv_axis(x, delta_kernel(4, 16), "width", "identity")
    np.testing.assert_allclose(out.numpy(), x.numpy(), rtol=1e-6, atol=1e-12)


def test_shift_kernel_shifts():
    x = np.random.default_rng(1).standard_normal((3, 4, 8))
    shift = np.zeros((3, 8))
    shift[:, 1] = 1.0
    out = freq_conv_axis(Tensor(x), spectral.spatial_to_freq_kernel(shift), "width", "identity")
    np.testing.assert_allclose(out.numpy(), np.roll(x, 1, axis=2), atol=1e-5)


@pytest.mark.parametrize("axis_name,axis", [("width", 2), ("height", 1)])
def test_convolution_theorem(axis_name, axis):
    rng = np.random.default_rng(2)
    x = rng.standard_normal((2, 6, 8))
    kern = rng.standard_normal((2, x.shape[axis]))
    got = freq_conv_axis(Tensor(x), spectral.spatial_to_freq_kernel(kern),
                         axis_name, "identity").numpy()
    want = circular_conv_reference(x, kern, axis)
    assert np.abs(got - want).max() / np.abs(want).max() <= 1e-5


def test_kernel_shape_mismatch():
    x = Tensor(np.zeros((2, 4, 8)))
    with pytest.raises(ContractViolation):
        freq_conv_axis(x, delta_kernel(2, 6), "width")
    with pytest.raises(ContractViolation):
        freq_conv_axis(x, delta_kernel(3, 8), "width")


def test_block_convex_combination_of_identities():
    x = Tensor(np.random.default_rng(3).standard_normal((2, 4, 8)))
    params = FreqConvParams(k_w=delta_kernel(2, 8), k_h=delta_kernel(2, 4),
                            alpha_w=0.5, alpha_h=0.5, activation="identity")
    np.testing.assert_allclose(freq_conv_block(x, params).numpy(), x.numpy(),
                               rtol=1e-6, atol=1e-12)


def test_block_default_weights():
    params = FreqConvParams(k_w=delta_kernel(1, 8), k_h=delta_kernel(1, 4))
    assert params.alpha_h == 0.55 and params.alpha_w == 0.45


def test_block_shape_preserved():
    x = Tensor(np.random.default_rng(4).standard_normal((3, 8, 12)))
    params = FreqConvParams(k_w=delta_kernel(3, 12), k_h=delta_kernel(3, 8),
                            activation="gelu")
    assert freq_conv_block(x, params).shape == x.shape


def test_block_linear_in_input_with_identity_activation():
    rng = np.random.default_rng(5)
    kw = Tensor(rng.standard_normal((2, 2, 5)))
    kh = Tensor(rng.standard_normal((2, 2, 3)))
    params = FreqConvParams(k_w=kw, k_h=kh, activation="identity")
    x, y = rng.standard_normal((2, 4, 8)), rng.standard_normal((2, 4, 8))
    lhs = freq_conv_block(Tensor(2.0 * x + 3.0 * y), params).numpy()
    rhs = 2.0 * freq_conv_block(Tensor(x), params).numpy() + \
        3.0 * freq_conv_block(Tensor(y), params).numpy()
    np.testing.assert_allclose(lhs, rhs, rtol=1e-6, atol=1e-9)


def test_block_gradcheck():
    rng = np.random.default_rng(6)
    x = Tensor(rng.standard_normal((2, 4, 6)))
    kw = Tensor(rng.standard_normal((2, 2, 4)))
    kh = Tensor(rng.standard_normal((2, 2, 3)))

    def wrt_input(t):
        p = FreqConvParams(k_w=kw, k_h=kh, activation="gelu")
        return T.tsum(T.square(freq_conv_block(t, p)))

    def wrt_kw(t):
        p = FreqConvParams(k_w=t, k_h=kh, activation="gelu")
        return T.tsum(T.square(freq_conv_block(x, p)))

    def wrt_kh(t):
        p = FreqConvParams(k_w=kw, k_h=t, activation="gelu")
        return T.tsum(T.square(freq_conv_block(x, p)))

    assert T.gradcheck(wrt_input, x) <= 1e-4
    assert T.gradcheck(wrt_kw, kw) <= 1e-4
    assert T.gradcheck(wrt_kh, kh) <= 1e-4


def test_zero_height_weight_ignores_height_kernel():
    rng = np.random.default_rng(7)
    x = Tensor(rng.standard_normal((2, 4, 8)))
    kw = Tensor(rng.standard_normal((2, 2, 5)))
    out1 = freq_conv_block(x, FreqConvParams(k_w=kw, k_h=Tensor(rng.standard_normal((2, 2, 3))),
                                             alpha_w=1.0, alpha_h=0.0))
    out2 = freq_conv_block(x, FreqConvParams(k_w=kw, k_h=Tensor(rng.standard_normal((2, 2, 3))),
                                             alpha_w=1.0, alpha_h=0.0))
    np.testing.assert_array_equal(out1.numpy(), out2.numpy())


def test_bench_conv_report():
    rows = spectral.bench_conv([(1, 16, 16, 5), (2, 8, 8, 3)], repeats=2)
    assert len(rows) == 2
    for row in rows:
        assert row["t_direct_ms"] > 0 and row["t_fft_ms"] > 0
        assert set(row["o_terms"]) == {"o_down", "o_s", "o_f", "o_r", "o_e"}
    csv = spectral.bench_report_csv(rows)
    assert csv.splitlines()[0] == "C,H,W,k,t_direct_ms,t_fft_ms,o_terms"
    assert len(csv.splitlines()) == 3


def test_bench_conv_empty_rejected():
    with pytest.raises(ContractViolation):
        spectral.bench_conv([])
