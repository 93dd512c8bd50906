import numpy as np
import pytest

from conftest import check_grads, max_rel_err, numeric_grad
from emoseq import tensor as T
from emoseq.errors import ContractError, NumericError, ShapeError
from emoseq.tensor import Tape, Tensor, backward


class TestMatmul:
    def test_identity(self):
        a = Tensor(np.arange(9.0).reshape(3, 3))
        out = T.matmul(Tensor(np.eye(3)), a)
        assert np.array_equal(out.data, a.data)

    def test_hand_checked(self):
        out = T.matmul(Tensor([[1.0, 2.0], [3.0, 4.0]]), Tensor([[1.0], [1.0]]))
        assert np.array_equal(out.data, [[3.0], [7.0]])

    def test_shape_mismatch_names_both_shapes(self):
        with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 3\)"):
            T.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))

    def test_grad_of_sum_is_ones_times_bt(self):
        rng = np.random.default_rng(0)
        a = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
        b = Tensor(rng.normal(size=(4, 2)))
        with Tape():
            loss = T.sum_(T.matmul(a, b))
            backward(loss)
        expected = np.ones((3, 2)) @ b.data.T
        assert np.allclose(a.grad, expected)
        numeric = numeric_grad(lambda: float((a.data @ b.data).sum()), a.data)
        assert max_rel_err(a.grad, numeric) < 1e-6

    @pytest.mark.parametrize("shapes", [((3, 4), (4, 2)), ((2, 3, 4), (2, 4, 2)), ((2, 3, 4), (4, 2))])
    def test_fd_gradients(self, shapes):
        rng = np.random.default_rng(1)
        a = Tensor(rng.normal(size=shapes[0]), requires_grad=True)
        b = Tensor(rng.normal(size=shapes[1]), requires_grad=True)
        check_grads(lambda: T.sum_(T.tanh(T.matmul(a, b))), [a, b], tol=1e-6)


class TestSoftmax:
    def test_symmetry(self):
        out = T.softmax(Tensor([1.0, 1.0, 1.0]), axis=0)
        assert np.allclose(out.data, [1 / 3] * 3)

    def test_stability_no_overflow(self):
        out = T.softmax(Tensor([1000.0, 0.0]), axis=0)
        assert np.isfinite(out.data).all()
        assert out.data[0] == pytest.approx(1.0)
        assert out.data[1] == pytest.approx(0.0, abs=1e-300)

    def test_sums_to_one(self):
        rng = np.random.default_rng(2)
        x = Tensor(rng.normal(size=5) * 10)
        out = T.softmax(x, axis=0)
        assert abs(float(out.data.sum()) - 1.0) < 1e-12
        assert (out.data >= 0).all()

    def test_nan_input_raises(self):
        with pytest.raises(NumericError):
            T.softmax(Tensor([1.0, np.nan]), axis=0)

    def test_fd_gradient(self):
        rng = np.random.default_rng(3)
        x = Tensor(rng.normal(size=(2, 5)), requires_grad=True)
        w = Tensor(rng.normal(size=(5,)))

        def loss():
            return T.sum_(T.mul(T.softmax(x, axis=1), Tensor(np.outer([1.0, 2.0], w.data))))

        check_grads(loss, [x], tol=1e-6)


class TestPointwise:
    def test_tanh_sigmoid_at_zero(self):
        assert T.tanh(Tensor([0.0])).data[0] == 0.0
        assert T.sigmoid(Tensor([0.0])).data[0] == 0.5

    def test_sigmoid_extreme_inputs(self):
        out = T.sigmoid(Tensor([-1000.0, 1000.0]))
        assert out.data[0] == pytest.approx(0.0, abs=1e-300)
        assert out.data[1] == pytest.approx(1.0)

    def test_concat_order(self):
        a = Tensor(np.ones((2, 3)))
        b = Tensor(np.zeros((2, 2)))
        out = T.concat([a, b], axis=1)
        assert out.shape == (2, 5)
        assert np.array_equal(out.data[:, :3], a.data)
        assert np.array_equal(out.data[:, 3:], b.data)

    def test_concat_shape_mismatch(self):
        with pytest.raises(ShapeError):
            T.concat([Tensor(np.ones((2, 3))), Tensor(np.ones((3, 2)))], axis=1)

    def test_tanh_derivative_at_zero(self):
        x = Tensor([0.0], requires_grad=True)
        with Tape():
            y = T.sum_(T.tanh(x))
            backward(y)
        assert x.grad[0] == pytest.approx(1.0)

    @pytest.mark.parametrize("op", [T.tanh, T.sigmoid, T.neg])
    def test_unary_fd(self, op):
        x = Tensor(np.random.default_rng(4).normal(size=(3, 3)), requires_grad=True)
        check_grads(lambda: T.sum_(op(x)), [x], tol=1e-6)

    def test_add_mul_broadcast_fd(self):
        rng = np.random.default_rng(5)
        a = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
        b = Tensor(rng.normal(size=(4,)), requires_grad=True)
        check_grads(lambda: T.sum_(T.mul(T.add(a, b), a)), [a, b], tol=1e-6)

    def test_concat_take_rows_fd(self):
        rng = np.random.default_rng(6)
        a = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
        ids = np.array([0, 2, 2, 3])

        def loss():
            rows = T.take_rows(a, ids)
            both = T.concat([rows, rows], axis=1)
            return T.sum_(T.tanh(both))

        check_grads(loss, [a], tol=1e-6)

    def test_take_along_time_fd(self):
        rng = np.random.default_rng(7)
        a = Tensor(rng.normal(size=(2, 4, 3)), requires_grad=True)
        idx = np.array([[3, 2, 1, 0], [1, 0, 3, 2]])
        check_grads(lambda: T.sum_(T.tanh(T.take_along_time(a, idx))), [a], tol=1e-6)

    def test_cross_entropy_fd(self):
        rng = np.random.default_rng(8)
        logits = Tensor(rng.normal(size=(4, 7)), requires_grad=True)
        ids = np.array([0, 3, 6, 2])
        check_grads(lambda: T.sum_(T.cross_entropy(logits, ids)), [logits], tol=1e-6)


class TestBackward:
    def test_sum_gives_ones(self):
        x = Tensor(np.random.default_rng(9).normal(size=(2, 3)), requires_grad=True)
        with Tape():
            backward(T.sum_(x))
        assert np.array_equal(x.grad, np.ones((2, 3)))

    def test_elementwise_square(self):
        x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
        with Tape():
            backward(T.sum_(T.mul(x, x)))
        assert np.allclose(x.grad, [2.0, 4.0, 6.0])

    def test_non_scalar_loss_rejected(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        with Tape():
            y = T.mul(x, x)
            with pytest.raises(ContractError):
                backward(y)

    def test_grads_accumulate_across_uses(self):
        x = Tensor([2.0], requires_grad=True)
        with Tape():
            y = T.add(T.mul(x, x), T.mul(x, Tensor([3.0])))  # x^2 + 3x
            backward(T.sum_(y))
        assert x.grad[0] == pytest.approx(7.0)  # 2x + 3

    def test_no_tape_raises(self):
        x = Tensor([1.0], requires_grad=True)
        y = T.sum_(x)
        with pytest.raises(ContractError):
            backward(y)


class TestDropout:
    def test_inference_is_identity(self):
        x = Tensor(np.ones((10, 10)))
        out = T.dropout(x, 0.5, None, training=False)
        assert out is x

    def test_kept_fraction_within_3_sigma(self):
        n = 100_000
        p = 0.3
        rng = np.random.default_rng(10)
        x = Tensor(np.ones(n))
        out = T.dropout(x, p, rng, training=True)
        kept = float((out.data != 0).sum()) / n
        sigma = np.sqrt(p * (1 - p) / n)
        assert abs(kept - (1 - p)) < 3 * sigma

    def test_inverted_scaling(self):
        rng = np.random.default_rng(11)
        x = Tensor(np.ones(1000))
        out = T.dropout(x, 0.25, rng, training=True)
        kept_vals = out.data[out.data != 0]
        assert np.allclose(kept_vals, 1.0 / 0.75)

    def test_grad_matches_mask(self):
        rng = np.random.default_rng(12)
        x = Tensor(np.ones(100), requires_grad=True)
        with Tape():
            out = T.dropout(x, 0.5, rng, training=True)
            backward(T.sum_(out))
        assert np.array_equal(x.grad != 0, out.data != 0)


class TestTapeDeterminism:
    def test_identical_seed_inputs_bitwise_identical(self):
        def run():
            rng = np.random.default_rng(13)
            a = Tensor(rng.normal(size=(4, 4)))
            b = Tensor(rng.normal(size=(4, 4)))
            return T.softmax(T.matmul(T.tanh(a), T.sigmoid(b)), axis=1).data

        assert np.array_equal(run(), run())

    def test_reverse_order_single_visit(self):
        seen = []
        x = Tensor([1.0], requires_grad=True)
        with Tape() as tape:
            y = T.mul(x, x)
            z = T.add(y, x)
            loss = T.sum_(z)
        order = [id(out) for out, _, _ in tape._entries]
        assert order == [id(y), id(z), id(loss)]
        backward(loss)
        assert x.grad[0] == pytest.approx(3.0)
