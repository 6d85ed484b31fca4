import numpy as np
import pytest

from shufflesr.autodiff import Tensor, grad_check, tsum
from shufflesr.ops import (
    avg_pool,
    concat_channels,
    conv2d,
    cubic_kernel,
    max_pool,
    maxpool2,
    pad2d,
    relu,
    resize,
    resize_weights,
)

from helpers import conv2d_loops, resize_scalar


class TestConv2d:
    def test_identity_kernel(self, rng):
        x = Tensor(rng.standard_normal((2, 1, 7, 9)))
        w = np.zeros((1, 1, 3, 3))
        w[0, 0, 1, 1] = 1.0
        out = conv2d(x, Tensor(w), Tensor(np.zeros(1)), 1, 1)
        np.testing.assert_array_equal(out.data, x.data)

    def test_all_ones_on_constant(self):
        c = 0.37
        x = Tensor(np.full((1, 1, 5, 5), c))
        out = conv2d(x, Tensor(np.ones((1, 1, 3, 3))), Tensor(np.zeros(1)), 1, 0)
        np.testing.assert_allclose(out.data, 9 * c)
        assert out.shape == (1, 1, 3, 3)

    def test_full_resolution_shape(self, rng):
        x = Tensor(rng.random((1, 3, 224, 224)))
        w = Tensor(rng.standard_normal((64, 3, 3, 3)) * 0.01)
        out = conv2d(x, w, Tensor(np.zeros(64)), 1, 1)
        assert out.shape == (1, 64, 224, 224)

    @pytest.mark.parametrize("stride,padding", [(1, 0), (1, 1), (2, 0), (2, 1), (3, 2)])
    def test_matches_loop_oracle(self, rng, stride, padding):
        x = rng.standard_normal((2, 3, 7, 8))
        w = rng.standard_normal((4, 3, 3, 3))
        b = rng.standard_normal(4)
        got = conv2d(Tensor(x), Tensor(w), Tensor(b), stride, padding)
        want = conv2d_loops(x, w, b, stride, padding)
        np.testing.assert_allclose(got.data, want, atol=1e-12)

    def test_channel_mismatch(self, rng):
        with pytest.raises(ValueError, match="channel mismatch"):
            conv2d(Tensor(rng.random((1, 2, 4, 4))), Tensor(rng.random((1, 3, 3, 3))), Tensor(np.zeros(1)))

    def test_kernel_larger_than_padded_input(self, rng):
        with pytest.raises(ValueError, match="larger than padded input"):
            conv2d(Tensor(rng.random((1, 1, 2, 2))), Tensor(rng.random((1, 1, 3, 3))), Tensor(np.zeros(1)))

    @pytest.mark.parametrize("stride,padding", [(1, 1), (2, 0), (2, 1)])
    def test_gradients(self, rng, stride, padding):
        x = Tensor(rng.standard_normal((1, 2, 6, 6)))
        w = Tensor(rng.standard_normal((3, 2, 3, 3)))
        b = Tensor(rng.standard_normal(3))
        rep = grad_check(lambda a, k, c: conv2d(a, k, c, stride, padding), (x, w, b))
        assert rep.passed, rep


class TestRelu:
    def test_values(self):
        out = relu(Tensor(np.array([[-1.0, 0.0, 2.0]])))
        np.testing.assert_array_equal(out.data, [[0.0, 0.0, 2.0]])

    def test_nonnegative_unchanged(self, rng):
        x = rng.random((2, 5))
        np.testing.assert_array_equal(relu(Tensor(x)).data, x)

    def test_gradient_mask(self):
        x = Tensor(np.array([-1.0, 2.0]), requires_grad=True)
        tsum(relu(x)).backward()
        np.testing.assert_array_equal(x.grad, [0.0, 1.0])
        rep = grad_check(relu, Tensor(np.array([-1.0, 2.0, 0.5, -0.3])))
        assert rep.passed


class TestMaxPool:
    def test_single_window(self):
        x = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 1, 2, 2))
        assert maxpool2(x).item() == 4.0

    def test_constant_halves(self):
        x = Tensor(np.full((1, 2, 6, 6), 0.7))
        out = maxpool2(x)
        assert out.shape == (1, 2, 3, 3)
        np.testing.assert_array_equal(out.data, 0.7)

    def test_enumerated_windows(self):
        x = Tensor(np.arange(16.0).reshape(1, 1, 4, 4))
        np.testing.assert_array_equal(maxpool2(x).data[0, 0], [[5.0, 7.0], [13.0, 15.0]])

    def test_odd_dims_rejected(self):
        with pytest.raises(ValueError, match="not divisible"):
            maxpool2(Tensor(np.zeros((1, 1, 5, 4))))

    def test_tie_routes_to_first_row_major(self):
        x = Tensor(np.zeros((1, 1, 2, 2)), requires_grad=True)
        tsum(maxpool2(x)).backward()
        np.testing.assert_array_equal(x.grad[0, 0], [[1.0, 0.0], [0.0, 0.0]])

    @pytest.mark.parametrize("factor", [2, 4])
    def test_gradient(self, rng, factor):
        rep = grad_check(lambda t: max_pool(t, factor), Tensor(rng.standard_normal((1, 2, 8, 8))))
        assert rep.passed, rep


class TestAvgPoolPad:
    def test_avg_values(self):
        x = Tensor(np.arange(4.0).reshape(1, 1, 2, 2))
        assert avg_pool(x, 2).item() == 1.5

    def test_gradients(self, rng):
        assert grad_check(lambda t: avg_pool(t, 2), Tensor(rng.standard_normal((1, 2, 6, 6)))).passed
        assert grad_check(lambda t: pad2d(t, 0, 1, 0, 1), Tensor(rng.standard_normal((1, 2, 5, 5)))).passed

    def test_pad_trailing_edge(self):
        out = pad2d(Tensor(np.ones((1, 1, 2, 2))), 0, 1, 0, 1)
        assert out.shape == (1, 1, 3, 3)
        assert out.data[0, 0, 2, 2] == 0.0
        assert out.data[0, 0, 0, 0] == 1.0


class TestConcat:
    def test_channel_sum_and_order(self, rng):
        a, b = rng.random((1, 2, 4, 4)), rng.random((1, 3, 4, 4))
        out = concat_channels([Tensor(a), Tensor(b)])
        assert out.shape == (1, 5, 4, 4)
        np.testing.assert_array_equal(out.data[:, :2], a)
        np.testing.assert_array_equal(out.data[:, 2:], b)

    def test_single_input_identity(self, rng):
        a = rng.random((2, 3, 2, 2))
        np.testing.assert_array_equal(concat_channels([Tensor(a)]).data, a)

    def test_spatial_mismatch(self, rng):
        with pytest.raises(ValueError, match="mismatched shape"):
            concat_channels([Tensor(rng.random((1, 1, 4, 4))), Tensor(rng.random((1, 1, 3, 4)))])

    def test_gradient_splits_back(self, rng):
        a = Tensor(rng.standard_normal((1, 2, 3, 3)), requires_grad=True)
        b = Tensor(rng.standard_normal((1, 4, 3, 3)), requires_grad=True)
        tsum(concat_channels([a, b])).backward()
        assert a.grad.shape == a.shape and b.grad.shape == b.shape
        np.testing.assert_array_equal(a.grad, 1.0)


class TestResize:
    @pytest.mark.parametrize("mode", ["nearest", "bilinear", "bicubic"])
    def test_constant_preserved(self, mode):
        x = Tensor(np.full((1, 3, 224, 224), 0.413))
        out = resize(x, 112, 112, mode)
        np.testing.assert_allclose(out.data, 0.413, atol=1e-12)

    def test_table_of_scales(self):
        x = Tensor(np.random.default_rng(0).random((1, 3, 224, 224)))
        for scale, lr in ((2, 112), (4, 56), (8, 28)):
            out = resize(x, 224 // scale, 224 // scale, "bicubic")
            assert out.shape == (1, 3, lr, lr)

    def test_cubic_kernel_midpoint_weights(self):
        # The four taps at half-sample distance: (-0.0625, 0.5625, 0.5625, -0.0625).
        assert cubic_kernel(1.5) == -0.0625
        assert cubic_kernel(0.5) == 0.5625
        assert cubic_kernel(-0.5) == 0.5625
        assert cubic_kernel(-1.5) == -0.0625
        assert cubic_kernel(0.0) == 1.0
        assert cubic_kernel(2.0) == 0.0

    def test_interior_row_weights_at_2x_downscale(self):
        w = resize_weights(6, 3, "bicubic")
        np.testing.assert_allclose(w[1], [0.0, -0.0625, 0.5625, 0.5625, -0.0625, 0.0], atol=1e-15)

    def test_rows_sum_to_one(self):
        for mode in ("nearest", "bilinear", "bicubic"):
            for n_in, n_out in ((224, 112), (13, 29), (8, 8), (5, 16)):
                w = resize_weights(n_in, n_out, mode)
                np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-12)

    @pytest.mark.parametrize("mode", ["nearest", "bilinear", "bicubic"])
    @pytest.mark.parametrize("oh,ow", [(4, 6), (16, 10), (9, 9)])
    def test_matches_scalar_oracle(self, rng, mode, oh, ow):
        img = rng.random((8, 7))
        got = resize(Tensor(img[None, None]), oh, ow, mode)
        want = resize_scalar(img, oh, ow, mode)
        np.testing.assert_allclose(got.data[0, 0], want, atol=1e-12)

    def test_nearest_2x_duplicates(self, rng):
        img = rng.random((1, 1, 3, 3))
        out = resize(Tensor(img), 6, 6, "nearest")
        np.testing.assert_array_equal(out.data, img.repeat(2, axis=2).repeat(2, axis=3))

    def test_unknown_mode(self):
        with pytest.raises(ValueError, match="unknown mode"):
            resize(Tensor(np.zeros((1, 1, 4, 4))), 2, 2, "lanczos")

    @pytest.mark.parametrize("mode", ["nearest", "bilinear", "bicubic"])
    def test_gradients(self, rng, mode):
        x = Tensor(rng.standard_normal((1, 2, 5, 6)))
        rep = grad_check(lambda t: resize(t, 8, 4, mode), x)
        assert rep.passed, rep
