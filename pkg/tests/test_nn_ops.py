import math

import numpy as np
import pytest

from oracles import conv2d_bruteforce, finite_difference_gradient, max_relative_error
from trailgrade.errors import DegenerateBatch, EmptyBatch, LabelOutOfRange, ShapeMismatch
from trailgrade.nn import ops

FD_TOL = 1e-4


class TestConvForward:
    def test_1x1_kernel_is_pointwise_affine(self, rng):
        x = rng.normal(size=(2, 5, 4, 1))
        kernels = np.full((1, 1, 1, 1), 2.0)
        out, _ = ops.conv2d_forward(x, kernels, np.array([1.0]))
        assert np.allclose(out, 2.0 * x + 1.0)

    def test_zero_input_gives_bias(self, rng):
        x = np.zeros((1, 6, 4, 3))
        kernels = rng.normal(size=(3, 2, 3, 5))
        bias = rng.normal(size=5)
        out, _ = ops.conv2d_forward(x, kernels, bias)
        assert np.allclose(out, np.broadcast_to(bias, out.shape))

    def test_matches_bruteforce(self, rng):
        x = rng.normal(size=(1, 6, 4, 3))
        kernels = rng.normal(size=(3, 2, 3, 2))
        bias = rng.normal(size=2)
        out, _ = ops.conv2d_forward(x, kernels, bias)
        assert np.max(np.abs(out - conv2d_bruteforce(x, kernels, bias))) < 1e-10

    @pytest.mark.parametrize("kh", [1, 2, 3, 4, 5, 6])
    @pytest.mark.parametrize("kw", [1, 2, 3])
    def test_same_padding_keeps_dims(self, kh, kw, rng):
        x = rng.normal(size=(2, 7, 4, 3))
        kernels = rng.normal(size=(kh, kw, 3, 2))
        out, _ = ops.conv2d_forward(x, kernels, np.zeros(2))
        assert out.shape == (2, 7, 4, 2)
        assert np.max(np.abs(out - conv2d_bruteforce(x, kernels, np.zeros(2)))) < 1e-10

    def test_kernel_taller_than_input(self, rng):
        x = rng.normal(size=(1, 3, 4, 2))
        kernels = rng.normal(size=(5, 2, 2, 3))
        out, _ = ops.conv2d_forward(x, kernels, np.zeros(3))
        assert out.shape == (1, 3, 4, 3)
        assert np.max(np.abs(out - conv2d_bruteforce(x, kernels, np.zeros(3)))) < 1e-10

    def test_shape_mismatch(self, rng):
        with pytest.raises(ShapeMismatch):
            ops.conv2d_forward(rng.normal(size=(1, 4, 4, 3)), rng.normal(size=(3, 2, 2, 5)), np.zeros(5))


class TestConvBackward:
    def test_grad_bias_is_sum(self, rng):
        x = rng.normal(size=(2, 5, 4, 3))
        kernels = rng.normal(size=(3, 2, 3, 4))
        _, cache = ops.conv2d_forward(x, kernels, np.zeros(4))
        grad_out = rng.normal(size=(2, 5, 4, 4))
        _, _, grad_bias = ops.conv2d_backward(cache, grad_out)
        assert np.allclose(grad_bias, grad_out.sum(axis=(0, 1, 2)))

    def test_zero_grad_out(self, rng):
        x = rng.normal(size=(1, 4, 4, 2))
        kernels = rng.normal(size=(2, 2, 2, 2))
        _, cache = ops.conv2d_forward(x, kernels, np.zeros(2))
        gx, gk, gb = ops.conv2d_backward(cache, np.zeros((1, 4, 4, 2)))
        assert not gx.any() and not gk.any() and not gb.any()

    @pytest.mark.parametrize("seed", range(3))
    @pytest.mark.parametrize("kh,kw", [(3, 2), (4, 2), (2, 1)])
    def test_finite_differences(self, seed, kh, kw):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(2, 5, 3, 2))
        kernels = rng.normal(size=(kh, kw, 2, 3))
        bias = rng.normal(size=3)
        proj = rng.normal(size=(2, 5, 3, 3))

        def loss():
            out, _ = ops.conv2d_forward(x, kernels, bias)
            return float(np.sum(out * proj))

        _, cache = ops.conv2d_forward(x, kernels, bias)
        gx, gk, gb = ops.conv2d_backward(cache, proj)
        assert max_relative_error(gx, finite_difference_gradient(loss, x)) < FD_TOL
        assert max_relative_error(gk, finite_difference_gradient(loss, kernels)) < FD_TOL
        assert max_relative_error(gb, finite_difference_gradient(loss, bias)) < FD_TOL


class TestBatchNorm:
    def test_two_value_batch_by_hand(self):
        # values {1, 3}: mean 2, population variance 1 -> normalized {-1, +1}
        x = np.array([1.0, 3.0]).reshape(2, 1, 1, 1)
        out, _, _, _ = ops.batchnorm_forward(
            x, np.ones(1), np.zeros(1), np.zeros(1), np.ones(1), eps=1e-12
        )
        assert np.allclose(out.ravel(), [-1.0, 1.0], atol=1e-6)

    def test_standardized_input_is_fixed_point(self, rng):
        x = rng.normal(size=(8, 3, 2, 4))
        x = (x - x.mean(axis=(0, 1, 2))) / x.std(axis=(0, 1, 2))
        eps = 1e-3
        out, _, _, _ = ops.batchnorm_forward(
            x, np.ones(4), np.zeros(4), np.zeros(4), np.ones(4), eps=eps
        )
        assert np.max(np.abs(out - x)) < math.sqrt(eps)  # the eps-induced shrink

    def test_infer_affine_readthrough(self, rng):
        x = rng.normal(size=(2, 3, 2, 1))
        eps = 1e-3
        out, cache, rm, rv = ops.batchnorm_forward(
            x, np.full(1, 2.0), np.full(1, 5.0), np.zeros(1), np.ones(1), eps=eps, train=False
        )
        assert cache is None
        assert np.allclose(out, 2.0 * x / math.sqrt(1.0 + eps) + 5.0)

    def test_running_stats_update(self, rng):
        x = rng.normal(size=(4, 2, 2, 3)) + 7.0
        rm, rv = np.zeros(3), np.ones(3)
        _, _, new_mean, new_var = ops.batchnorm_forward(
            x, np.ones(3), np.zeros(3), rm, rv, momentum=0.9
        )
        assert np.allclose(new_mean, 0.9 * rm + 0.1 * x.mean(axis=(0, 1, 2)))
        assert np.allclose(new_var, 0.9 * rv + 0.1 * x.var(axis=(0, 1, 2)))
        assert rm.sum() == 0.0  # inputs untouched

    def test_degenerate_batch(self):
        with pytest.raises(DegenerateBatch):
            ops.batchnorm_forward(
                np.ones((1, 1, 1, 2)), np.ones(2), np.zeros(2), np.zeros(2), np.ones(2)
            )

    def test_grad_beta_is_sum(self, rng):
        x = rng.normal(size=(3, 2, 2, 2))
        _, cache, _, _ = ops.batchnorm_forward(x, np.ones(2), np.zeros(2), np.zeros(2), np.ones(2))
        grad_out = rng.normal(size=x.shape)
        _, _, grad_beta = ops.batchnorm_backward(cache, grad_out)
        assert np.allclose(grad_beta, grad_out.sum(axis=(0, 1, 2)))

    def test_grad_input_sums_to_zero_per_channel(self, rng):
        x = rng.normal(size=(4, 3, 2, 5))
        _, cache, _, _ = ops.batchnorm_forward(x, rng.normal(size=5), rng.normal(size=5), np.zeros(5), np.ones(5))
        gx, _, _ = ops.batchnorm_backward(cache, rng.normal(size=x.shape))
        assert np.max(np.abs(gx.sum(axis=(0, 1, 2)))) < 1e-9

    @pytest.mark.parametrize("seed", range(3))
    def test_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(3, 4, 2, 3))
        gamma = rng.normal(size=3)
        beta = rng.normal(size=3)
        proj = rng.normal(size=x.shape)

        def loss():
            out, _, _, _ = ops.batchnorm_forward(x, gamma, beta, np.zeros(3), np.ones(3))
            return float(np.sum(out * proj))

        _, cache, _, _ = ops.batchnorm_forward(x, gamma, beta, np.zeros(3), np.ones(3))
        gx, gg, gb = ops.batchnorm_backward(cache, proj)
        assert max_relative_error(gx, finite_difference_gradient(loss, x)) < FD_TOL
        assert max_relative_error(gg, finite_difference_gradient(loss, gamma)) < FD_TOL
        assert max_relative_error(gb, finite_difference_gradient(loss, beta)) < FD_TOL


class TestRelu:
    def test_table(self):
        out, _ = ops.relu(np.array([-1.0, 0.0, 2.0]))
        assert out.tolist() == [0.0, 0.0, 2.0]

    def test_identity_on_nonnegative(self, rng):
        x = np.abs(rng.normal(size=(3, 4)))
        out, _ = ops.relu(x)
        assert np.array_equal(out, x)

    def test_tie_at_zero_blocks_gradient(self):
        _, mask = ops.relu(np.array([0.0, 1.0]))
        grad = ops.relu_backward(mask, np.array([5.0, 5.0]))
        assert grad.tolist() == [0.0, 5.0]

    def test_finite_differences_away_from_zero(self, rng):
        x = rng.normal(size=(4, 5))
        x = x + np.sign(x) * 2e-3  # keep |x| > 1e-3
        proj = rng.normal(size=x.shape)

        def loss():
            out, _ = ops.relu(x)
            return float(np.sum(out * proj))

        _, mask = ops.relu(x)
        grad = ops.relu_backward(mask, proj)
        assert max_relative_error(grad, finite_difference_gradient(loss, x)) < FD_TOL


class TestMaxPool:
    def test_odd_column(self):
        x = np.array([1.0, 2.0, 3.0, 4.0, 5.0]).reshape(1, 5, 1, 1)
        out, _ = ops.maxpool_forward(x)
        assert out.ravel().tolist() == [2.0, 4.0, 5.0]

    def test_constant_input_ties_to_first(self):
        x = np.ones((1, 6, 2, 1))
        out, (mask, _) = ops.maxpool_forward(x)
        assert np.array_equal(out, np.ones((1, 3, 2, 1)))
        assert not mask.any()

    def test_chain_250_to_32(self, rng):
        x = rng.normal(size=(1, 250, 4, 1))
        lengths = []
        for _ in range(3):
            x, _ = ops.maxpool_forward(x)
            lengths.append(x.shape[1])
        assert lengths == [125, 63, 32]

    def test_pooling_length_law(self):
        for h in range(1, 1001):
            out, _ = ops.maxpool_forward(np.zeros((1, h, 1, 1)))
            assert out.shape[1] == (h + 1) // 2

    def test_backward_routes_to_argmax(self):
        x = np.array([1.0, 2.0, 3.0, 4.0]).reshape(1, 4, 1, 1)
        _, cache = ops.maxpool_forward(x)
        grad = ops.maxpool_backward(cache, np.array([10.0, 20.0]).reshape(1, 2, 1, 1))
        assert grad.ravel().tolist() == [0.0, 10.0, 0.0, 20.0]

    def test_mass_conservation(self, rng):
        x = rng.normal(size=(2, 7, 3, 2))
        _, cache = ops.maxpool_forward(x)
        grad_out = rng.normal(size=(2, 4, 3, 2))
        grad = ops.maxpool_backward(cache, grad_out)
        assert np.isclose(grad.sum(), grad_out.sum())

    def test_finite_differences_distinct_values(self, rng):
        x = rng.permutation(np.linspace(-1.0, 1.0, 2 * 7 * 3 * 2)).reshape(2, 7, 3, 2)
        proj = rng.normal(size=(2, 4, 3, 2))

        def loss():
            out, _ = ops.maxpool_forward(x)
            return float(np.sum(out * proj))

        _, cache = ops.maxpool_forward(x)
        grad = ops.maxpool_backward(cache, proj)
        assert max_relative_error(grad, finite_difference_gradient(loss, x)) < FD_TOL


class TestDropout:
    def test_rate_zero_identity(self, rng):
        x = rng.normal(size=(3, 4))
        out, mask = ops.dropout_forward(x, 0.0, rng)
        assert out is x and mask is None

    def test_infer_identity(self, rng):
        x = rng.normal(size=(3, 4))
        out, mask = ops.dropout_forward(x, 0.9, rng, train=False)
        assert out is x and mask is None

    def test_monte_carlo_survival_and_expectation(self):
        rng = np.random.default_rng(99)
        x = np.ones(100_000)
        out, mask = ops.dropout_forward(x, 0.3, rng)
        survivors = mask.mean()
        assert abs(survivors - 0.7) < 0.01
        assert abs(out.mean() - 1.0) < 0.02
        assert np.allclose(out[mask], 1.0 / 0.7)

    def test_backward_uses_same_mask(self, rng):
        x = rng.normal(size=(50,))
        out, mask = ops.dropout_forward(x, 0.3, rng)
        grad = ops.dropout_backward(mask, np.ones(50), 0.3)
        assert np.array_equal(grad != 0, out != 0)


class TestDense:
    def test_identity_weights(self, rng):
        x = rng.normal(size=(3, 4))
        out, _ = ops.dense_forward(x, np.eye(4), np.zeros(4))
        assert np.allclose(out, x)

    def test_dot_example(self):
        out, _ = ops.dense_forward(
            np.array([[1.0, 2.0]]), np.array([[3.0], [4.0]]), np.array([1.0])
        )
        assert out.item() == 12.0

    def test_shape_mismatch(self, rng):
        with pytest.raises(ShapeMismatch):
            ops.dense_forward(rng.normal(size=(2, 3)), rng.normal(size=(4, 5)), np.zeros(5))

    @pytest.mark.parametrize("seed", range(3))
    def test_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(3, 4))
        weights = rng.normal(size=(4, 2))
        bias = rng.normal(size=2)
        proj = rng.normal(size=(3, 2))

        def loss():
            out, _ = ops.dense_forward(x, weights, bias)
            return float(np.sum(out * proj))

        _, cache = ops.dense_forward(x, weights, bias)
        gx, gw, gb = ops.dense_backward(cache, proj)
        assert max_relative_error(gx, finite_difference_gradient(loss, x)) < FD_TOL
        assert max_relative_error(gw, finite_difference_gradient(loss, weights)) < FD_TOL
        assert max_relative_error(gb, finite_difference_gradient(loss, bias)) < FD_TOL


class TestSoftmax:
    def test_uniform(self):
        out = ops.softmax(np.zeros((1, 3)))
        assert np.allclose(out, 1.0 / 3.0)

    def test_direct_evaluation(self):
        out = ops.softmax(np.array([[1.0, 2.0, 3.0]]))
        from oracles import softmax_direct

        assert np.allclose(out[0], softmax_direct([1.0, 2.0, 3.0]), atol=1e-12)
        assert np.allclose(out[0], [0.09003057, 0.24472847, 0.66524096], atol=1e-7)

    def test_shift_invariance(self, rng):
        logits = rng.normal(size=(4, 3))
        shifted = ops.softmax(logits + 1000.0)
        assert np.max(np.abs(ops.softmax(logits) - shifted)) < 1e-12

    def test_rows_sum_to_one(self, rng):
        out = ops.softmax(rng.normal(size=(64, 3)) * 30)
        assert np.max(np.abs(out.sum(axis=1) - 1.0)) < 1e-12
        moderate = ops.softmax(rng.normal(size=(64, 3)) * 5)
        assert ((moderate > 0) & (moderate < 1)).all()


class TestCrossEntropy:
    def test_perfect_prediction(self):
        probs = np.array([[0.0, 1.0, 0.0]])
        loss, _ = ops.sparse_categorical_crossentropy(probs, np.array([1]))
        assert loss == 0.0

    def test_half_probability_is_ln2(self):
        probs = np.array([[0.25, 0.25, 0.5]])
        loss, _ = ops.sparse_categorical_crossentropy(probs, np.array([2]))
        assert loss == pytest.approx(math.log(2.0), rel=1e-12)

    def test_label_out_of_range(self):
        probs = np.full((2, 3), 1 / 3)
        with pytest.raises(LabelOutOfRange):
            ops.sparse_categorical_crossentropy(probs, np.array([0, 3]))
        with pytest.raises(LabelOutOfRange):
            ops.sparse_categorical_crossentropy(probs, np.array([-1, 0]))

    def test_empty_batch(self):
        with pytest.raises(EmptyBatch):
            ops.sparse_categorical_crossentropy(np.empty((0, 3)), np.empty(0, dtype=int))

    @pytest.mark.parametrize("seed", range(3))
    def test_combined_gradient_matches_fd_through_softmax(self, seed):
        rng = np.random.default_rng(seed)
        logits = rng.normal(size=(4, 3))
        labels = rng.integers(0, 3, size=4)

        def loss():
            probs = ops.softmax(logits)
            value, _ = ops.sparse_categorical_crossentropy(probs, labels)
            return value

        probs = ops.softmax(logits)
        _, grad_logits = ops.sparse_categorical_crossentropy(probs, labels)
        assert max_relative_error(grad_logits, finite_difference_gradient(loss, logits)) < FD_TOL


class TestL2Penalty:
    def test_zero_coeff(self, rng):
        penalty, grads = ops.l2_penalty([rng.normal(size=(3, 3))], 0.0)
        assert penalty == 0.0
        assert not grads[0].any()

    def test_single_weight_arithmetic(self):
        penalty, grads = ops.l2_penalty([np.array([3.0])], 0.01)
        assert penalty == pytest.approx(0.09)
        assert grads[0].item() == pytest.approx(0.06)

    def test_finite_differences(self, rng):
        w1 = rng.normal(size=(2, 3))
        w2 = rng.normal(size=(4,))

        def loss():
            penalty, _ = ops.l2_penalty([w1, w2], 0.05)
            return penalty

        _, grads = ops.l2_penalty([w1, w2], 0.05)
        assert max_relative_error(grads[0], finite_difference_gradient(loss, w1)) < FD_TOL
        assert max_relative_error(grads[1], finite_difference_gradient(loss, w2)) < FD_TOL
