"""Adam update, gradient clipping, and the finite-difference oracle."""

import numpy as np
import pytest

import scantext.tensor as T
from scantext.optim import (Parameter, adam_step, clip_grad_norm,
                            finite_diff_check, zero_grads)
from scantext.tensor import Tensor


def _param(value, grad=None):
    p = Parameter("p", np.asarray(value, dtype=np.float64))
    if grad is not None:
        p.tensor.grad = np.asarray(grad, dtype=np.float64)
    return p


class TestAdam:
    def test_zero_grad_zero_state_unchanged(self):
        p = _param([1.0, -2.0], grad=[0.0, 0.0])
        adam_step([p], lr=0.1)
        np.testing.assert_array_equal(p.data, [1.0, -2.0])

    def test_first_step_is_minus_lr(self):
        p = _param([1.0], grad=[1.0])
        adam_step([p], lr=0.01)
        # bias-corrected m_hat = v_hat = 1, so the update is lr/(1+eps)
        assert abs((p.data[0] - 1.0) + 0.01) < 1e-6
        assert p.step_count == 1

    def test_missing_grad_errors(self):
        with pytest.raises(ValueError):
            adam_step([_param([1.0])], lr=0.1)

    def test_matches_naive_reference_trajectory(self):
        """Dual route: compare against an independently coded update rule."""
        p = _param([1.0])
        x_ref, m_ref, v_ref = 1.0, 0.0, 0.0
        lr, b1, b2, eps = 0.05, 0.9, 0.999, 1e-8
        for t in range(1, 51):
            g = 2.0 * p.data[0]
            p.tensor.grad = np.array([g])
            adam_step([p], lr=lr, beta1=b1, beta2=b2, eps=eps)

            g_ref = 2.0 * x_ref
            m_ref = b1 * m_ref + (1 - b1) * g_ref
            v_ref = b2 * v_ref + (1 - b2) * g_ref ** 2
            x_ref -= lr * (m_ref / (1 - b1 ** t)) / (
                np.sqrt(v_ref / (1 - b2 ** t)) + eps)
            np.testing.assert_allclose(p.data[0], x_ref, rtol=1e-12)

    def test_200_steps_minimize_square(self):
        p = _param([1.0])
        for _ in range(200):
            p.tensor.grad = 2.0 * p.data
            adam_step([p], lr=0.05)
        assert abs(p.data[0]) < 0.1


class TestClipGradNorm:
    def test_below_threshold_unchanged(self):
        p = _param([3.0], grad=[0.03, ])
        q = _param([4.0], grad=[0.04])
        norm = clip_grad_norm([p, q], 0.1)
        assert abs(norm - 0.05) < 1e-15
        np.testing.assert_array_equal(p.grad, [0.03])

    def test_clips_to_max_norm(self, rng):
        params = [_param(rng.standard_normal(4), rng.standard_normal(4))
                  for _ in range(3)]
        norm = clip_grad_norm(params, 0.1)
        assert norm > 0.1
        post = np.sqrt(sum(np.sum(p.grad ** 2) for p in params))
        assert abs(post - 0.1) < 1e-12

    def test_zero_grads_return_zero(self):
        p = _param([1.0], grad=[0.0])
        assert clip_grad_norm([p], 0.1) == 0.0
        np.testing.assert_array_equal(p.grad, [0.0])

    def test_idempotent(self, rng):
        params = [_param(rng.standard_normal(5), rng.standard_normal(5))]
        clip_grad_norm(params, 0.1)
        once = params[0].grad.copy()
        clip_grad_norm(params, 0.1)
        np.testing.assert_allclose(params[0].grad, once, rtol=1e-12)


class TestFiniteDiffCheck:
    def test_square_at_three(self):
        p = _param([3.0])
        def f():
            return T.tsum(T.mul(p.tensor, p.tensor))
        assert finite_diff_check(f, [p], eps=1e-5) < 1e-8

    def test_linear_is_exact(self):
        p = _param([1.0, 2.0, -1.0])
        c = Tensor([2.0, -3.0, 0.5])
        def f():
            return T.tsum(T.mul(p.tensor, c))
        assert finite_diff_check(f, [p], eps=1e-5) < 1e-9

    def test_stochastic_f_rejected(self, rng):
        p = _param(rng.standard_normal(4))
        state = np.random.default_rng(0)
        def f():
            return T.tsum(T.dropout(p.tensor, 0.5, training=True, rng=state))
        with pytest.raises(ValueError):
            finite_diff_check(f, [p])

    def test_sampling_subset(self, rng):
        p = _param(rng.standard_normal(40))
        def f():
            return T.tsum(T.mul(p.tensor, p.tensor))
        err = finite_diff_check(f, [p], eps=1e-5, sample=10,
                                rng=np.random.default_rng(0))
        assert err < 1e-8


def test_zero_grads():
    p = _param([1.0], grad=[5.0])
    zero_grads([p])
    assert p.grad is None
