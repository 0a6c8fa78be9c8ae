"""Tests for the inference network, q(x_{0:T}) and the ELBO terms."""

import math

import numpy as np
import pytest
from numpy.polynomial.hermite_e import hermegauss
from scipy.stats import norm

from src.autodiff import evaluate_with_gradients, ops
from src.data import Dataset
from src.evaluation import kalman_filter
from src.flows import flow_forward
from src.gp import marginal_moments
from src.inference import (
    ElboNoise, VariationalState, as_batch, combine_terms, elbo, elbo_terms, infer_state_means,
    inference_step, log_q_trajectory, sample_q_trajectory, term_data_reconstruction, term_entropy, term_kl_x0,
    term_state_reconstruction,
)
from src.model import Trajectory, build_model
from src.schema import ElboBreakdown, TrainConfig
from src.training import bind_joint, joint_parameters, train
from src.utils.errors import ContractViolation


class TestVariationalFamily:
    """Sampling, means and log densities of q."""

    def test_fresh_network_is_a_random_walk(self, small_vs, rng):
        """The zero-initialised head gives omega_t = x_{t-1}, so the mean path stays at m0."""
        y = rng.normal(size=(2, 7, 1))
        means = infer_state_means(small_vs, y)
        assert means.shape == (2, 8, 1)
        assert np.allclose(means, 0.0)

    def test_initial_step_spread(self, small_vs):
        """Sigma_t starts at init_std^2."""
        dist = inference_step(small_vs.net, np.zeros(1), np.zeros(4))
        assert np.allclose(dist.variance, 0.3 ** 2)

    def test_sampling_is_seeded(self, small_vs, rng):
        y = rng.normal(size=(6, 1))
        a = sample_q_trajectory(small_vs, y, seed=11)
        b = sample_q_trajectory(small_vs, y, seed=11)
        assert np.array_equal(np.asarray(a.stacked_states()), np.asarray(b.stacked_states()))
        assert a.length == 6

    def test_log_q_of_fresh_network(self, small_vs, rng):
        """At initialisation q(x_0) = N(0, 1) and q(x_t | x_{t-1}) = N(x_{t-1}, 0.09)."""
        y = rng.normal(size=(4, 1))
        states = rng.normal(size=(5, 1))
        expected = norm(0.0, 1.0).logpdf(states[0, 0])
        expected += norm(states[:-1, 0], 0.3).logpdf(states[1:, 0]).sum()
        assert np.isclose(log_q_trajectory(small_vs, y, states)[0], expected)

    def test_as_batch_promotes_shapes(self):
        y, controls = as_batch(np.zeros(5), None)
        assert y.shape == (1, 5, 1) and controls is None

    def test_as_batch_checks_controls(self):
        with pytest.raises(ContractViolation):
            as_batch(np.zeros((1, 5, 1)), np.zeros((1, 4, 1)))

    def test_noise_draw_order(self):
        """eps0 first, then (eps_t, f_eps_t) per step."""
        noise = ElboNoise.draw(np.random.default_rng(0), 2, 3, 1, num_samples=2)
        rng = np.random.default_rng(0)
        assert np.array_equal(noise.eps0, rng.standard_normal((2, 1)))
        assert np.array_equal(noise.eps[0], rng.standard_normal((2, 1)))
        assert np.array_equal(noise.f_eps[0], rng.standard_normal((2, 2, 1)))


class TestElboTerms:
    """Individual terms against closed forms."""

    def test_kl_x0_zero_for_standard_normal(self, small_vs):
        assert abs(float(term_kl_x0(small_vs))) < 1e-12

    def test_kl_x0_closed_form(self):
        vs = VariationalState.create(1, 1, np.random.default_rng(0), hidden_units=2, head_units=(2,))
        vs = VariationalState(vs.net, m0=[1.0], L0=[[0.5]])
        expected = 0.5 * (1.0 + 0.25 - math.log(0.25) - 1.0)
        assert np.isclose(float(term_kl_x0(vs)), expected)

    def test_entropy_of_unit_variances(self):
        sigmas = np.ones((3, 2, 1))
        assert np.isclose(float(term_entropy(sigmas)), 6 * 0.5 * (math.log(2 * math.pi) + 1.0))

    def test_data_reconstruction_closed_form(self, small_tgpssm, rng):
        """log N(y | C omega, R) - 0.5 Sigma / r for d_x = d_y = 1."""
        omegas = rng.normal(size=(4, 2, 1))
        sigmas = rng.uniform(0.1, 0.5, size=(4, 2, 1))
        y = rng.normal(size=(2, 4, 1))
        r = float(np.diag(small_tgpssm.R)[0])
        y_tb = np.swapaxes(y, 0, 1)
        expected = norm(omegas, math.sqrt(r)).logpdf(y_tb).sum() - 0.5 * np.sum(sigmas) / r
        assert np.isclose(float(term_data_reconstruction(small_tgpssm, omegas, sigmas, y)), expected)

    def test_breakdown_total_is_signed_sum(self, small_tgpssm, small_vs, rng):
        breakdown = elbo(small_tgpssm, small_vs, rng.normal(size=(3, 8, 1)), seed=1)
        assert isinstance(breakdown, ElboBreakdown)
        expected = (breakdown.data_recon + breakdown.state_recon + breakdown.entropy
                    - breakdown.kl_x0 - breakdown.kl_u)
        assert np.isclose(breakdown.total, expected)
        assert breakdown.kl_u >= 0.0 and breakdown.kl_x0 >= 0.0

    def test_kl_x0_counted_per_sequence(self, small_tgpssm, small_vs, rng):
        """kl_x0 scales with the batch size; kl_u does not."""
        vs = VariationalState(small_vs.net, m0=[0.5])
        one = elbo(small_tgpssm, vs, rng.normal(size=(1, 5, 1)), seed=0)
        three = elbo(small_tgpssm, vs, rng.normal(size=(3, 5, 1)), seed=0)
        assert np.isclose(three.kl_x0, 3 * one.kl_x0)
        assert np.isclose(three.kl_u, one.kl_u)

    def test_elbo_is_seeded(self, small_tgpssm, small_vs, rng):
        y = rng.normal(size=(2, 6, 1))
        assert elbo(small_tgpssm, small_vs, y, seed=5).total == elbo(small_tgpssm, small_vs, y, seed=5).total

    def test_several_f_samples_per_step(self, small_tgpssm, small_vs, rng):
        """The state term averages its n samples of f."""
        y = rng.normal(size=(1, 6, 1))
        noise = ElboNoise.draw(np.random.default_rng(0), 1, 6, 1, num_samples=4)
        terms = elbo_terms(small_tgpssm, small_vs, y, noise)
        assert np.isfinite(float(terms["state_recon"]))


class TestElboGradients:
    """Reverse-mode gradients of the full objective."""

    def test_directional_derivative(self, small_tgpssm, small_vs, rng):
        """grad . v matches a central difference along a random direction."""
        y = rng.normal(size=(2, 5, 1))
        noise = ElboNoise.draw(np.random.default_rng(1), 2, 5, 1)
        params = joint_parameters(small_tgpssm, small_vs)

        def objective(values):
            model, vs = bind_joint(small_tgpssm, small_vs, values)
            return combine_terms(elbo_terms(model, vs, y, noise), kl_weight=0.5)

        _, grads = evaluate_with_gradients(objective, params)
        direction = {name: rng.normal(size=value.shape) for name, value in params.items()}
        h = 1e-6
        plus = {name: params[name] + h * direction[name] for name in params}
        minus = {name: params[name] - h * direction[name] for name in params}
        numeric = (float(objective(plus)) - float(objective(minus))) / (2.0 * h)
        analytic = sum(float(np.sum(grads[name] * direction[name])) for name in params)
        assert np.isclose(analytic, numeric, rtol=1e-4, atol=1e-4)

    @pytest.mark.parametrize("name", ["model.log_r_diag", "model.log_q_diag", "vs.m0"])
    def test_single_parameter(self, name, small_gpssm, small_vs, rng):
        y = rng.normal(size=(1, 4, 1))
        noise = ElboNoise.draw(np.random.default_rng(2), 1, 4, 1)
        params = joint_parameters(small_gpssm, small_vs)

        def objective(values):
            model, vs = bind_joint(small_gpssm, small_vs, values)
            return ops.neg(combine_terms(elbo_terms(model, vs, y, noise)))

        _, grads = evaluate_with_gradients(objective, params)
        h = 1e-6
        numeric = (float(objective(dict(params, **{name: params[name] + h})))
                   - float(objective(dict(params, **{name: params[name] - h})))) / (2.0 * h)
        assert np.isclose(float(np.sum(grads[name])), numeric, rtol=1e-4, atol=1e-5)

    @pytest.mark.parametrize("name", [
        "model.gp.Z", "model.gp.q_mean", "model.gp.q_raw_factor", "model.gp.kernels.0.log_lengthscale",
        "model.gp.kernels.0.log_variance", "model.flow.layers.0.a", "model.flow.layers.2.b", "vs.raw_L0",
        "vs.net.encoder.w_in", "vs.net.head.layers.0.weight",
    ])
    def test_parameter_groups(self, name, small_tgpssm, small_vs, rng):
        """Every parameter group of a transformed model, with the noise held fixed."""
        y = rng.normal(size=(2, 4, 1))
        noise = ElboNoise.draw(np.random.default_rng(3), 2, 4, 1)
        params = joint_parameters(small_tgpssm, small_vs)

        def objective(values):
            model, vs = bind_joint(small_tgpssm, small_vs, values)
            return ops.neg(combine_terms(elbo_terms(model, vs, y, noise)))

        _, grads = evaluate_with_gradients(objective, params)
        direction = np.random.default_rng(4).normal(size=params[name].shape)
        h = 1e-6
        numeric = (float(objective(dict(params, **{name: params[name] + h * direction})))
                   - float(objective(dict(params, **{name: params[name] - h * direction})))) / (2.0 * h)
        assert np.isclose(float(np.sum(grads[name] * direction)), numeric, rtol=1e-4, atol=1e-5)


class TestMonteCarloAgreement:
    """Closed-form expectations against large-sample averages."""

    N = 1_000_000

    def test_entropy(self):
        omega, sigma = 0.4, 0.2
        x = np.random.default_rng(5).normal(omega, math.sqrt(sigma), size=self.N)
        samples = -norm(omega, math.sqrt(sigma)).logpdf(x)
        error = samples.std() / math.sqrt(self.N)
        closed = float(term_entropy(np.full((1, 1, 1), sigma)))
        assert abs(samples.mean() - closed) < 4.0 * error

    def test_expected_observation_log_likelihood(self, small_tgpssm):
        omega, sigma, y = -0.3, 0.15, 0.5
        r = float(np.diag(small_tgpssm.R)[0])
        x = np.random.default_rng(6).normal(omega, math.sqrt(sigma), size=self.N)
        samples = norm(x, math.sqrt(r)).logpdf(y)
        error = samples.std() / math.sqrt(self.N)
        closed = float(term_data_reconstruction(
            small_tgpssm, np.full((1, 1, 1), omega), np.full((1, 1, 1), sigma), np.full((1, 1, 1), y)
        ))
        assert abs(samples.mean() - closed) < 4.0 * error

    def test_state_reconstruction_pushforward(self, small_tgpssm):
        """Averaging log N(x_1 | G(f), Q) over f ~ q(f) equals the quadrature over q(f)."""
        n = 10_000
        states = np.array([[[0.3]], [[0.5]]])
        f_eps = np.random.default_rng(7).standard_normal((1, n, 1, 1))
        many = float(term_state_reconstruction(small_tgpssm, states, f_eps))
        # n = 1 over n identical sequences consumes the same draws
        single = float(term_state_reconstruction(
            small_tgpssm, np.repeat(states, n, axis=1), np.swapaxes(f_eps, 1, 2),
        )) / n
        assert single == pytest.approx(many, rel=1e-10)

        mean, var = marginal_moments(small_tgpssm.gp, np.array([[0.3]]))
        q = float(np.diag(small_tgpssm.Q)[0])

        def log_lik(f):
            g = flow_forward(small_tgpssm.flow, f)
            return -0.5 * np.log(2.0 * np.pi * q) - 0.5 * (0.5 - g) ** 2 / q

        nodes, weights = hermegauss(80)
        f_nodes = float(mean[0, 0]) + math.sqrt(float(var[0, 0])) * nodes
        exact = float(np.sum(weights * log_lik(f_nodes[:, None])[:, 0])) / math.sqrt(2.0 * math.pi)
        draws = log_lik(float(mean[0, 0]) + math.sqrt(float(var[0, 0])) * f_eps.reshape(n, 1))
        assert abs(many - exact) < 4.0 * draws.std() / math.sqrt(n)


class TestElboValidity:
    """The assembled ELBO stays below the exact evidence of linear-Gaussian data."""

    def test_bounded_by_kalman_evidence(self):
        """
        The untrained GPSSM has a near-identity transition, so its ELBO is
        compared with the Kalman evidence of the random-walk model with the
        same Q, C and R.
        """
        violations = []
        for instance in range(50):
            rng = np.random.default_rng(100 + instance)
            d_x = int(rng.integers(1, 3))
            d_y = int(rng.integers(1, d_x + 1))
            T = int(rng.integers(2, 11))
            model = build_model(d_x, d_y, rng, num_inducing=9, z_range=(-3.0, 3.0), inducing_init_std=1e-2)
            vs = VariationalState.create(d_x, d_y, rng, hidden_units=4, head_units=(8,))

            x = rng.normal(size=d_x)
            ys = []
            for _ in range(T):
                x = x + rng.normal(scale=np.sqrt(np.diag(model.Q)))
                ys.append(model.C @ x + rng.normal(scale=np.sqrt(np.diag(model.R))))
            y = np.array(ys)

            evidence = kalman_filter(np.eye(d_x), model.Q, model.C, model.R, y, np.zeros(d_x), np.eye(d_x)).log_evidence
            bound = elbo(model, vs, y[None], seed=instance).total
            if bound > evidence:
                violations.append((instance, bound, evidence))
        assert violations == []

    @pytest.mark.slow
    def test_trained_bound_close_to_kalman_evidence(self):
        """After optimisation the ELBO of random-walk data is within 10% of the exact evidence."""
        rng = np.random.default_rng(21)
        q, r = 0.2, 0.5
        sequences = []
        for _ in range(40):
            x = np.cumsum(np.concatenate([rng.normal(size=1), rng.normal(scale=math.sqrt(q), size=20)]))
            obs = x[1:] + rng.normal(scale=math.sqrt(r), size=20)
            sequences.append(Trajectory(states=x[:, None], observations=obs[:, None]))
        data = Dataset(sequences, name="random_walk")
        y = np.stack([seq.observations for seq in sequences])

        model = build_model(1, 1, np.random.default_rng(0), num_inducing=10, z_range=(-6.0, 6.0), lengthscale=2.0,
                            variance=4.0, process_noise=q, observation_noise=r, inducing_init_std=0.3,
                            train_noise=False)
        vs = VariationalState.create(1, 1, np.random.default_rng(1), hidden_units=8, head_units=(16,))
        result = train(model, vs, data, TrainConfig(mode="joint", epochs=500, learning_rate=0.01, seed=0))

        evidence = sum(
            kalman_filter(np.eye(1), model.Q, model.C, model.R, seq.observations, np.zeros(1), np.eye(1)).log_evidence
            for seq in sequences
        )
        bound = np.mean([elbo(result.model, result.vs, y, n=10, seed=s).total for s in range(5)])
        assert abs(evidence - bound) < 0.1 * abs(evidence)
