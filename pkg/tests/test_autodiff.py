import numpy as np
import pytest

from shufflesr.autodiff import (
    GradCheckError,
    Tensor,
    grad_check,
    mul,
    reshape,
    sqrt,
    tmean,
    tsum,
)
from shufflesr.ops import concat_channels


def test_tensor_basics():
    t = Tensor(np.zeros((1, 3, 4, 4)))
    assert t.shape == (1, 3, 4, 4)
    assert t.size == 48
    assert not t.requires_grad
    assert t.detach().requires_grad is False


def test_backward_requires_scalar():
    t = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ValueError, match="scalar"):
        (t * 2.0).backward()


def test_diamond_graph_visited_once():
    # z = x*x reused twice: a double-visit would double the gradient.
    x = Tensor(np.array([3.0]), requires_grad=True)
    z = mul(x, x)
    out = tsum(z + z)
    out.backward()
    np.testing.assert_allclose(x.grad, [12.0])


def test_gradient_accumulates_across_uses():
    x = Tensor(np.array([2.0, -1.0]), requires_grad=True)
    out = tsum(x * 3.0) + tsum(mul(x, x))
    out.backward()
    np.testing.assert_allclose(x.grad, 3.0 + 2.0 * x.data)


def test_same_shape_rule():
    a = Tensor(np.ones((2, 2)))
    b = Tensor(np.ones((2, 3)))
    with pytest.raises(ValueError, match="shape mismatch"):
        a + b


def test_sqrt_forward_exact_backward_finite():
    x = Tensor(np.array([64.0, 0.0]), requires_grad=True)
    y = sqrt(x)
    assert y.data[0] == 8.0  # bit-exact forward
    tsum(y).backward()
    assert np.all(np.isfinite(x.grad))


def test_mean_sum_reshape_grads(rng):
    x = Tensor(rng.standard_normal((2, 3, 4)))
    for fn in (tmean, tsum, lambda t: tsum(reshape(t, (6, 4)))):
        rep = grad_check(fn, x, seed=7)
        assert rep.passed, rep


def test_linear_op_near_machine_eps(rng):
    # concat is linear, so FD and the VJP agree to roundoff.
    a = Tensor(rng.standard_normal((1, 2, 3, 3)))
    b = Tensor(rng.standard_normal((1, 1, 3, 3)))
    rep = grad_check(lambda u, v: concat_channels([u, v]), (a, b))
    assert rep.max_rel_error < 1e-8


def test_grad_check_rejects_float32():
    x = Tensor(np.ones(4, dtype=np.float32))
    with pytest.raises(GradCheckError, match="float64"):
        grad_check(lambda t: tsum(t), x)


def test_grad_check_rejects_large_unsampled():
    x = Tensor(np.zeros(2048))
    with pytest.raises(GradCheckError, match="sample"):
        grad_check(lambda t: tsum(t), x)
    rep = grad_check(lambda t: tsum(t), x, sample=32)
    assert rep.passed and rep.n_checked == 32


def test_grad_check_catches_wrong_gradient():
    def bad_op(t):
        out = Tensor(t.data * 2.0, True, (t,), None)
        out._vjp = lambda g: (g * 3.0,)  # wrong on purpose
        return out

    rep = grad_check(bad_op, Tensor(np.ones(5)))
    assert not rep.passed
