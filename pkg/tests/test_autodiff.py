"""Tests for the tape, primitives, Adam and parameter plumbing."""

import numpy as np
import pytest

from src.autodiff import (
    AdamState, DenseNetwork, Tape, adam_step, evaluate_with_gradients, jacobian,
    lower_factor, lower_factor_inverse, ops, softplus_inverse,
)
from src.utils.errors import ContractViolation, DecompositionError, NumericError
from tests.conftest import finite_difference

pytestmark = pytest.mark.unit


class TestGradients:
    """Reverse-mode gradients against central differences."""

    def test_elementwise_chain(self, rng):
        """Gradient of a composition of element-wise primitives."""
        x0 = rng.normal(size=(3, 2))

        def expr(x):
            y = ops.mul(ops.tanh(x), ops.exp(ops.mul(0.3, x)))
            y = ops.add(y, ops.arcsinh(ops.square(x)))
            return ops.sum(ops.add(ops.softplus(y), ops.sinh(ops.mul(0.5, x))))

        _, grads = evaluate_with_gradients(lambda v: expr(v["x"]), {"x": x0})
        expected = finite_difference(lambda a: float(expr(a)), x0)
        assert np.allclose(grads["x"], expected, rtol=1e-5, atol=1e-7), "element-wise chain gradient mismatch"

    def test_broadcasting_and_reductions(self, rng):
        """Gradients flow back through broadcasting, sums and means."""
        a0 = rng.normal(size=(4, 3))
        b0 = rng.normal(size=3)

        def expr(a, b):
            return ops.add(ops.sum(ops.square(ops.sub(a, b)), axis=0).sum(), ops.mean(ops.mul(a, b)))

        _, grads = evaluate_with_gradients(lambda v: expr(v["a"], v["b"]), {"a": a0, "b": b0})
        assert np.allclose(grads["a"], finite_difference(lambda a: float(expr(a, b0)), a0), atol=1e-6)
        assert np.allclose(grads["b"], finite_difference(lambda b: float(expr(a0, b)), b0), atol=1e-6)

    def test_logsumexp(self, rng):
        """Gradient of logsumexp is the softmax, also far in the negative range."""
        x0 = rng.normal(size=(3, 4)) - 800.0

        def expr(x):
            return ops.sum(ops.mul(np.arange(1.0, 4.0), ops.logsumexp(x, axis=-1)))

        value, grads = evaluate_with_gradients(lambda v: expr(v["x"]), {"x": x0})
        assert np.isfinite(value)
        assert np.allclose(grads["x"], finite_difference(lambda a: float(expr(a)), x0), atol=1e-5)

    def test_clip_min(self):
        """Gradient passes where the value is above the bound and is zero elsewhere."""
        x0 = np.array([-0.5, 0.2, 1.5])
        value, grads = evaluate_with_gradients(lambda v: ops.sum(ops.clip_min(v["x"], 0.0)), {"x": x0})
        assert value == pytest.approx(1.7)
        assert np.array_equal(grads["x"], [0.0, 1.0, 1.0])

    def test_linear_algebra(self, rng):
        """Cholesky, triangular solves and matmul."""
        base = rng.normal(size=(3, 3))
        K0 = base @ base.T + 3.0 * np.eye(3)
        b0 = rng.normal(size=(3, 2))

        def expr(K):
            L = ops.cholesky(ops.mul(0.5, ops.add(K, ops.transpose(K))))
            solved = ops.solve_triangular(L, b0)
            return ops.add(ops.sum(ops.square(solved)), ops.sum(ops.log(ops.diagonal(L))))

        _, grads = evaluate_with_gradients(lambda v: expr(v["K"]), {"K": K0})
        expected = finite_difference(lambda K: float(expr(K)), K0)
        assert np.allclose(grads["K"], expected, rtol=1e-4, atol=1e-6)

    def test_getitem_concatenate_stack(self, rng):
        """Indexing and joining primitives route adjoints to the right slots."""
        x0 = rng.normal(size=5)

        def expr(x):
            head = ops.getitem(x, slice(0, 2))
            tail = ops.getitem(x, np.array([4, 3]))
            joined = ops.concatenate([head, tail], axis=-1)
            return ops.sum(ops.mul(ops.stack([joined, ops.square(joined)]), np.arange(8.0).reshape(2, 4)))

        _, grads = evaluate_with_gradients(lambda v: expr(v["x"]), {"x": x0})
        assert np.allclose(grads["x"], finite_difference(lambda x: float(expr(x)), x0), atol=1e-6)

    def test_unused_leaf_gets_zero_gradient(self):
        """Leaves the output does not depend on get zeros."""
        _, grads = evaluate_with_gradients(lambda v: ops.sum(ops.square(v["a"])), {"a": np.ones(2), "b": np.ones(3)})
        assert np.array_equal(grads["b"], np.zeros(3))
        assert np.allclose(grads["a"], 2.0 * np.ones(2))


class TestTapeContracts:
    """Errors raised by the tape and primitives."""

    def test_backward_needs_scalar(self):
        """A non-scalar output cannot seed the reverse sweep."""
        tape = Tape()
        x = tape.variable(np.ones(3))
        with pytest.raises(ContractViolation):
            tape.backward(ops.mul(x, 2.0))

    def test_mixed_tapes_rejected(self):
        """Combining variables from different tapes is an error."""
        a = Tape().variable(1.0)
        b = Tape().variable(2.0)
        with pytest.raises(ContractViolation):
            ops.add(a, b)

    def test_non_finite_value_raises(self):
        """log of a negative value is reported as a numeric failure."""
        with pytest.raises(NumericError):
            ops.log(np.array([-1.0]))

    def test_cholesky_of_indefinite_matrix(self):
        """An indefinite matrix raises DecompositionError."""
        with pytest.raises(DecompositionError):
            ops.cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_tape_free_evaluation(self):
        """Primitives on plain arrays return arrays."""
        out = ops.add(np.ones(2), 1.0)
        assert isinstance(out, np.ndarray)
        assert np.array_equal(out, [2.0, 2.0])


class TestJacobian:
    """Full Jacobians by repeated reverse sweeps."""

    def test_elementwise_square(self):
        """d(x*x)/dx is diag(2x)."""
        J = jacobian(lambda x: ops.mul(x, x), np.array([1.0, 2.0]))
        assert np.allclose(J, np.diag([2.0, 4.0]))

    def test_linear_map(self, rng):
        """The Jacobian of x -> A x is A."""
        A = rng.normal(size=(3, 2))
        J = jacobian(lambda x: ops.matmul(A, x), np.array([0.5, -1.0]))
        assert np.allclose(J, A)


class TestAdam:
    """Adam descent steps."""

    def test_first_step_moves_by_learning_rate(self):
        """With bias correction the first step is lr * sign(grad)."""
        state = AdamState(learning_rate=0.1)
        params = {"w": np.array([1.0, -2.0, 0.5])}
        grads = {"w": np.array([3.0, -0.01, 20.0])}
        updated, new_state = adam_step(state, grads, params)
        assert np.allclose(updated["w"], params["w"] - 0.1 * np.sign(grads["w"]), atol=1e-6)
        assert new_state.step_count == 1
        assert state.step_count == 0, "the input state must not be mutated"

    def test_group_learning_rates(self):
        """The longest matching prefix picks the step size."""
        state = AdamState(learning_rate=0.1, group_learning_rates={"vs.": 0.01, "vs.net.": 0.001})
        assert state.learning_rate_for("model.gp.Z") == 0.1
        assert state.learning_rate_for("vs.m0") == 0.01
        assert state.learning_rate_for("vs.net.head.layers.0.weight") == 0.001

    def test_minimises_quadratic(self):
        """Repeated steps approach the minimum of a convex quadratic."""
        state = AdamState(learning_rate=0.05)
        params = {"x": np.array([3.0, -2.0])}
        for _ in range(2000):
            _, grads = evaluate_with_gradients(lambda v: ops.sum(ops.square(ops.sub(v["x"], 1.0))), params)
            params, state = adam_step(state, grads, params)
        assert np.allclose(params["x"], 1.0, atol=1e-2)

    def test_shape_mismatch(self):
        """A gradient of the wrong shape is rejected."""
        with pytest.raises(ContractViolation):
            adam_step(AdamState(), {"w": np.ones(2)}, {"w": np.ones(3)})


class TestParametrized:
    """Named parameters, binding and constrained transforms."""

    def test_network_parameters_and_bind(self, rng):
        """bind swaps in new values without touching the original."""
        net = DenseNetwork([2, 4, 1], rng)
        names = set(net.parameter_values())
        assert names == {"layers.0.weight", "layers.0.bias", "layers.1.weight", "layers.1.bias"}
        zeros = {name: np.zeros_like(value) for name, value in net.parameter_values().items()}
        bound = net.bind(zeros)
        assert np.array_equal(bound(np.ones((3, 2))), np.zeros((3, 1)))
        assert not np.array_equal(net.layers[0].weight, zeros["layers.0.weight"])

    def test_zero_output_network(self, rng):
        """zero_output starts the network at 0 everywhere."""
        net = DenseNetwork([3, 5, 2], rng, zero_output=True)
        assert np.array_equal(net(rng.normal(size=(4, 3))), np.zeros((4, 2)))

    def test_lower_factor_round_trip(self, rng):
        """lower_factor inverts lower_factor_inverse."""
        L = np.tril(rng.normal(size=(3, 3)))
        L[np.diag_indices(3)] = np.abs(L[np.diag_indices(3)]) + 0.1
        assert np.allclose(lower_factor(lower_factor_inverse(L)), L)

    def test_softplus_inverse(self):
        """softplus(softplus_inverse(y)) == y."""
        y = np.array([1e-3, 0.5, 4.0])
        assert np.allclose(ops.softplus(softplus_inverse(y)), y)
