"""Forward operators: hand-checked examples, adjointness, norms, file I/O."""

import numpy as np
import pytest

from pnpmap.exceptions import NumericError, ShapeMismatchError
from pnpmap.io import read_image, write_image
from pnpmap.operators import (CircularConvolution, Identity, Mask, MaskSplit,
                              as_grid, operator_norm_ata, uniform_kernel)

from conftest import circular_convolve_direct


class TestApply:
    def test_identity_returns_equal_copy(self, rng):
        x = rng.standard_normal((5, 7))
        op = Identity((5, 7))
        out = op(x)
        assert np.array_equal(out, x)
        out[0, 0] += 1.0
        assert out[0, 0] != x[0, 0]

    def test_uniform_kernel_preserves_constant(self):
        op = CircularConvolution(uniform_kernel(9), (16, 16))
        c = np.full((16, 16), 0.37)
        assert np.allclose(op(c), 0.37, atol=1e-12)

    def test_impulse_spreads_onto_wrapped_footprint(self):
        # hand-built expected image: nine pixels of 1/9 centred on the
        # impulse, wrapping periodically at the corner
        op = CircularConvolution(uniform_kernel(3), (8, 8))
        x = np.zeros((8, 8))
        x[0, 0] = 1.0
        expected = np.zeros((8, 8))
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                expected[dy % 8, dx % 8] = 1.0 / 9.0
        assert np.allclose(op(x), expected, atol=1e-14)

    def test_shape_mismatch_raises(self):
        op = CircularConvolution(uniform_kernel(3), (8, 8))
        with pytest.raises(ShapeMismatchError):
            op(np.zeros((4, 4)))


class TestAdjoint:
    def test_identity_adjoint(self, rng):
        v = rng.standard_normal((4, 4))
        assert np.array_equal(Identity().adjoint(v), v)

    def test_symmetric_kernel_is_self_adjoint(self, rng):
        op = CircularConvolution(uniform_kernel(5), (12, 12))
        v = rng.standard_normal((12, 12))
        assert np.allclose(op(v), op.adjoint(v), atol=1e-12)

    def test_mask_adjoint_scatters(self):
        split = MaskSplit(shape=(3, 3), observed=np.array([0]))
        op = Mask(split)
        out = op.adjoint(np.array([2.5]))
        expected = np.zeros((3, 3))
        expected[0, 0] = 2.5
        assert np.array_equal(out, expected)

    @pytest.mark.parametrize("make_op", [
        lambda: Identity((10, 11)),
        lambda: CircularConvolution(np.arange(9.0).reshape(3, 3) / 10, (10, 11)),
        lambda: Mask(MaskSplit(shape=(10, 11), observed=np.arange(0, 110, 3))),
    ], ids=["identity", "convolution", "mask"])
    def test_adjoint_identity_on_random_pairs(self, make_op, rng):
        # <A u, v> == <u, A* v> to 1e-10 relative, 100 pairs per kind
        op = make_op()
        for _ in range(100):
            u = rng.standard_normal((10, 11))
            v = rng.standard_normal(op(u).shape)
            lhs = float(np.vdot(op(u), v))
            rhs = float(np.vdot(u, op.adjoint(v)))
            assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), abs(rhs), 1e-30)


class TestOperatorNorm:
    def test_identity(self):
        assert operator_norm_ata(Identity((6, 6))) == pytest.approx(1.0, abs=1e-8)

    def test_unit_gain_blur(self):
        op = CircularConvolution(uniform_kernel(9), (32, 32))
        assert op.opnorm_AtA == pytest.approx(1.0, abs=1e-12)
        assert operator_norm_ata(op) == pytest.approx(1.0, abs=1e-6)

    def test_kernel_scaled_by_two(self):
        # the largest squared Fourier magnitude is the DC gain squared
        op = CircularConvolution(2.0 * uniform_kernel(9), (32, 32))
        assert op.opnorm_AtA == pytest.approx(4.0, abs=1e-12)
        assert operator_norm_ata(op) == pytest.approx(4.0, rel=1e-6)

    def test_mask(self):
        split = MaskSplit(shape=(5, 5), observed=np.array([1, 7, 13]))
        assert operator_norm_ata(Mask(split)) == pytest.approx(1.0, abs=1e-8)


class TestCircularConvolutionOracle:
    @pytest.mark.parametrize("shape,ksize", [((8, 8), 3), ((16, 16), 5),
                                             ((16, 12), 3)])
    def test_fft_matches_direct_spatial_convolution(self, shape, ksize, rng):
        kernel = rng.standard_normal((ksize, ksize))
        op = CircularConvolution(kernel, shape)
        x = rng.standard_normal(shape)
        assert np.allclose(op(x), circular_convolve_direct(x, kernel), atol=1e-10)


class TestMaskSplit:
    def test_partition_reassembles_exactly(self, rng):
        for _ in range(20):
            split = MaskSplit.random((9, 9), hidden_fraction=0.7, rng=rng)
            x = rng.standard_normal((9, 9))
            rebuilt = split.embed(split.hidden_values(x), split.observe(x))
            assert np.array_equal(rebuilt, x)
            scattered = split.scatter_hidden(split.hidden_values(x)) \
                + split.scatter_observed(split.observe(x))
            assert np.array_equal(scattered, x)

    def test_counts(self):
        rng = np.random.default_rng(0)
        split = MaskSplit.random((10, 10), hidden_fraction=0.8, rng=rng)
        assert split.m == 20
        assert split.hidden.size == 80
        assert split.d == 100

    def test_disjoint_and_complete(self, rng):
        split = MaskSplit.random((6, 6), hidden_fraction=0.5, rng=rng)
        merged = np.sort(np.concatenate([split.observed, split.hidden]))
        assert np.array_equal(merged, np.arange(36))


class TestGridValidation:
    def test_rejects_non_2d(self):
        with pytest.raises(ShapeMismatchError):
            as_grid(np.zeros(5))

    def test_rejects_nan(self):
        bad = np.zeros((3, 3))
        bad[1, 1] = np.nan
        with pytest.raises(NumericError):
            as_grid(bad)


class TestImageIO:
    @pytest.mark.parametrize("ext", ["png", "pgm"])
    def test_round_trip_quantization(self, ext, tmp_path, rng):
        img = rng.uniform(-0.1, 1.1, size=(13, 17))  # includes out-of-range
        path = tmp_path / f"img.{ext}"
        write_image(path, img)
        back = read_image(path)
        assert back.shape == img.shape
        assert np.max(np.abs(back - np.clip(img, 0, 1))) <= 1.0 / 255.0

    def test_half_rounds_to_even(self, tmp_path):
        # 0.5 * 255 = 127.5 exactly; half-to-even gives 128
        path = tmp_path / "half.png"
        write_image(path, np.full((2, 2), 0.5))
        assert np.all(read_image(path) == 128.0 / 255.0)
