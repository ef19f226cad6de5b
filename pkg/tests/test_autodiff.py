import numpy as np
import pytest

from dockgame import autodiff as ad
from dockgame.autodiff import Tensor


def _fd(f, x, step=1e-6):
    """Central finite difference of a scalar function of one array."""
    g = np.zeros_like(x)
    flat = x.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        up = f(x)
        flat[i] = orig - step
        down = f(x)
        flat[i] = orig
        g.ravel()[i] = (up - down) / (2 * step)
    return g


def _check_op(build, shape, rng, atol=1e-6):
    x = rng.standard_normal(shape)
    t = Tensor(x.copy(), requires_grad=True)
    t.zero_grad()
    ad.backward(build(t))
    fd = _fd(lambda arr: build(Tensor(arr)).item(), x.copy())
    np.testing.assert_allclose(t.grad, fd, atol=atol)


@pytest.mark.parametrize("build,shape", [
    (lambda t: (t * 3.0 + 1.0).sum(), (4, 3)),
    (lambda t: (t * t).sum(), (5,)),
    (lambda t: (t / 2.5).sum(), (4,)),
    (lambda t: (t @ Tensor(np.arange(6.0).reshape(3, 2))).sum(), (4, 3)),
    (lambda t: ad.sigmoid(t).sum(), (6,)),
    (lambda t: ad.tanh(t).sum(), (6,)),
    (lambda t: ad.silu(t).sum(), (6,)),
    (lambda t: ad.exp(t).sum(), (5,)),
    (lambda t: ad.square(t).sum(), (5,)),
    (lambda t: ad.softmax(t, axis=0).sum(axis=0).sum() + (ad.softmax(t, axis=0) * ad.softmax(t, axis=0)).sum(), (7,)),
    (lambda t: ad.huber_elem(t, 1.0).sum(), (8,)),
    (lambda t: ad.reshape(t, (6,)).sum(axis=0), (2, 3)),
    (lambda t: ad.concat([t, t * 2.0], axis=0).sum(), (3, 2)),
    (lambda t: ad.rows(t, np.array([0, 2, 0])).sum(), (4, 3)),
    (lambda t: ad.segment_sum(t, np.array([0, 1, 0, 1, 1]), 2).sum() * 2.0, (5, 2)),
    (lambda t: t.mean(), (4, 3)),
    (lambda t: t.sum(axis=1, keepdims=True).sum(), (3, 4)),
    (lambda t: ad.pairwise_distance(t, Tensor(np.ones((2, 3)))).sum(), (3, 3)),
])
def test_op_gradients_match_finite_differences(build, shape, rng):
    _check_op(build, shape, rng)


def test_log_sqrt_gradients(rng):
    x = np.abs(rng.standard_normal(5)) + 0.5
    t = Tensor(x.copy(), requires_grad=True)
    t.zero_grad()
    ad.backward((ad.log(t) + ad.sqrt(t)).sum())
    fd = _fd(lambda arr: (ad.log(Tensor(arr)) + ad.sqrt(Tensor(arr))).sum().item(),
             x.copy())
    np.testing.assert_allclose(t.grad, fd, atol=1e-6)


def test_repeated_parent_accumulates():
    t = Tensor(np.array([2.0]), requires_grad=True)
    t.zero_grad()
    ad.backward((t + t).sum())
    np.testing.assert_allclose(t.grad, [2.0])


def test_shared_gradient_buffers_not_aliased():
    # y = a + b feeds gradients to both parents; a gets a second
    # contribution via c = a * 3. If backward hands both parents the same
    # array object and then accumulates in place, b's gradient is corrupted.
    a = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    b = Tensor(np.array([3.0, 4.0]), requires_grad=True)
    a.zero_grad()
    b.zero_grad()
    y = a + b
    z = y.sum() + (a * 3.0).sum()
    ad.backward(z)
    np.testing.assert_allclose(a.grad, [4.0, 4.0])
    np.testing.assert_allclose(b.grad, [1.0, 1.0])


def test_deep_chain_does_not_hit_recursion_limit():
    t = Tensor(np.array([1.0]), requires_grad=True)
    t.zero_grad()
    x = t
    for _ in range(5000):
        x = x + 0.0
    ad.backward(x.sum())
    np.testing.assert_allclose(t.grad, [1.0])


def test_clip_blocks_gradient_outside_range():
    t = Tensor(np.array([-2.0, 0.5, 2.0]), requires_grad=True)
    t.zero_grad()
    ad.backward(ad.clip(t, 0.0, 1.0).sum())
    np.testing.assert_allclose(t.grad, [0.0, 1.0, 0.0])


def test_no_grad_disables_tape():
    t = Tensor(np.ones(3), requires_grad=True)
    with ad.no_grad():
        out = (t * 2.0).sum()
    assert out._parents == ()
    assert out._backward is None


def test_backward_rejects_non_scalar():
    t = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ValueError):
        ad.backward(t * 2.0)


def test_backward_rejects_non_finite():
    t = Tensor(np.array([np.inf]), requires_grad=True)
    with pytest.raises(FloatingPointError):
        ad.backward(t.sum())


def test_ndarray_tensor_arithmetic_returns_tensor():
    t = Tensor(np.ones(3), requires_grad=True)
    out = np.full(3, 2.0) * t
    assert isinstance(out, Tensor)
    np.testing.assert_allclose(out.data, [2.0, 2.0, 2.0])


def test_dropout_scaling_preserves_expectation(rng):
    t = Tensor(np.ones((200, 50)))
    out = ad.dropout(t, 0.3, rng)
    kept = out.data[out.data > 0]
    np.testing.assert_allclose(kept, 1.0 / 0.7)
    assert abs(out.data.mean() - 1.0) < 0.02
