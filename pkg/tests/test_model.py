"""Tests for the generative model: construction, samplers, densities and trajectory files."""

import numpy as np
import pytest
from scipy.integrate import trapezoid

from src.model import (
    Trajectory, augmented_prior_log_density, build_model, emission_matrix, joint_log_density,
    joint_prior_log_density_direct, read_trajectory_csv, sample_inducing_values, sample_prior_exact,
    sample_prior_sparse, transformed_gp_log_density, write_trajectory_csv,
)
from src.schema import default_flow_specs
from src.utils.errors import ContractViolation

IDENTITY_FLOW = [{"kind": "Linear", "init": {"a": 0.0, "b": 1.0}}]


class TestModelConstruction:
    """Shapes, emission matrix and parameter bookkeeping."""

    def test_emission_matrix_is_canonical_projection(self):
        assert np.array_equal(emission_matrix(2, 3), np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))

    def test_obs_dim_cannot_exceed_state_dim(self):
        with pytest.raises(ContractViolation):
            emission_matrix(3, 2)

    def test_dimensions(self, rng):
        model = build_model(3, 2, rng, num_inducing=4, control_dim=1)
        assert (model.state_dim, model.obs_dim, model.control_dim) == (3, 2, 1)
        assert model.gp.input_dim == 4
        assert model.Q.shape == (3, 3) and model.R.shape == (2, 2)

    def test_gpssm_versus_tgpssm(self, small_gpssm, small_tgpssm):
        assert not small_gpssm.is_transformed
        assert small_tgpssm.is_transformed
        assert small_tgpssm.num_parameters() == small_gpssm.num_parameters() + 16

    def test_frozen_noise(self, rng):
        model = build_model(1, 1, rng, num_inducing=3, train_noise=False)
        trainable = model.parameter_values(trainable_only=True)
        assert "log_q_diag" not in trainable and "log_r_diag" not in trainable

    def test_controls_required(self, rng):
        model = build_model(1, 1, rng, num_inducing=3, control_dim=1)
        with pytest.raises(ContractViolation):
            model.gp_inputs(np.zeros((2, 1)))


class TestSamplers:
    """Exact and sparse prior samplers."""

    @pytest.mark.parametrize("sampler", [sample_prior_exact, sample_prior_sparse])
    def test_same_seed_same_trajectory(self, sampler, small_tgpssm):
        first = sampler(small_tgpssm, 15, seed=4)
        second = sampler(small_tgpssm, 15, seed=4)
        assert np.array_equal(first.states, second.states)
        assert np.array_equal(first.observations, second.observations)

    @pytest.mark.parametrize("sampler", [sample_prior_exact, sample_prior_sparse])
    def test_shorter_run_is_prefix(self, sampler, small_tgpssm):
        """A length-t run with the same seed is a prefix of a length-T run."""
        short = sampler(small_tgpssm, 5, seed=9)
        long = sampler(small_tgpssm, 12, seed=9)
        assert np.allclose(long.states[:6], short.states)
        assert np.allclose(long.observations[:5], short.observations)

    @pytest.mark.parametrize("sampler", [sample_prior_exact, sample_prior_sparse])
    def test_identity_flow_matches_gpssm(self, sampler):
        """A TGPSSM whose flow is the identity samples exactly like the GPSSM."""
        gpssm = build_model(1, 1, np.random.default_rng(1), num_inducing=5, z_range=(-3.0, 1.0))
        tgpssm = build_model(1, 1, np.random.default_rng(1), num_inducing=5, z_range=(-3.0, 1.0),
                             flow_specs=IDENTITY_FLOW)
        a = sampler(gpssm, 10, seed=2)
        b = sampler(tgpssm, 10, seed=2)
        assert np.allclose(a.states, b.states, atol=1e-6)
        assert np.allclose(a.f_tilde, b.f_tilde, atol=1e-6)

    @pytest.mark.slow
    def test_dense_inducing_points_match_exact_sampler(self):
        """With inducing points packed densely, both samplers share the same state distribution."""
        model = build_model(1, 1, np.random.default_rng(5), num_inducing=50, z_range=(-5.0, 5.0),
                            flow_specs=default_flow_specs())
        seeds = range(10_000)
        exact = np.array([sample_prior_exact(model, 5, seed=s).states[1:, 0] for s in seeds])
        sparse = np.array([sample_prior_sparse(model, 5, seed=s).states[1:, 0] for s in seeds])
        scale = exact.std(axis=0)
        assert np.allclose(sparse.std(axis=0), scale, rtol=0.05)
        assert np.all(np.abs(sparse.mean(axis=0) - exact.mean(axis=0)) < 0.06 * scale)

    def test_sample_fields(self, small_tgpssm):
        trajectory = sample_prior_sparse(small_tgpssm, 8, seed=0)
        assert trajectory.states.shape == (9, 1)
        assert trajectory.observations.shape == (8, 1)
        assert trajectory.f.shape == trajectory.f_tilde.shape == (8, 1)
        assert np.allclose(trajectory.f_tilde, small_tgpssm.flow.forward(trajectory.f))

    def test_fixed_initial_state(self, small_gpssm):
        trajectory = sample_prior_exact(small_gpssm, 3, seed=0, x0=[0.7])
        assert trajectory.states[0, 0] == 0.7

    def test_controls_needed_when_model_has_them(self, rng):
        model = build_model(1, 1, rng, num_inducing=3, control_dim=1)
        with pytest.raises(ContractViolation):
            sample_prior_sparse(model, 4, seed=0)
        trajectory = sample_prior_sparse(model, 4, seed=0, controls=np.zeros((4, 1)))
        assert trajectory.control_dim == 1

    def test_posterior_draws_follow_q_u(self, rng):
        """With a near-deterministic q(U) the first f follows the q(U) means."""
        model = build_model(1, 1, rng, num_inducing=5, z_range=(-2.0, 2.0), inducing_init_std=1e-5)
        trajectory = sample_prior_sparse(model, 1, seed=3, from_posterior=True, x0=[1.0])
        # identity initialisation: q(U) means sit on the line f = z
        assert abs(trajectory.f[0, 0] - 1.0) < 0.05

    def test_inducing_values_shape(self, small_tgpssm, rng):
        assert sample_inducing_values(small_tgpssm, rng).shape == (5, 1)

    def test_length_checked(self, small_tgpssm):
        with pytest.raises(ContractViolation):
            sample_prior_sparse(small_tgpssm, 0, seed=0)


class TestDensities:
    """Joint and augmented-prior log densities."""

    def _points(self, rng):
        inputs = np.array([[-1.5], [0.3], [1.7]])
        return inputs, 0.5 * rng.normal(size=(3, 1)), 0.5 * rng.normal(size=(5, 1))

    @pytest.mark.parametrize("use_flow", [False, True])
    def test_augmented_equals_direct(self, use_flow, rng):
        """p(F~ | U~) p(U~) and the change of variables on p(F, U) agree."""
        specs = default_flow_specs() if use_flow else None
        model = build_model(1, 1, np.random.default_rng(0), num_inducing=5, z_range=(-2.0, 2.0), flow_specs=specs)
        inputs, f_tilde, u_tilde = self._points(rng)
        augmented = augmented_prior_log_density(model, inputs, f_tilde, u_tilde)
        direct = joint_prior_log_density_direct(model, inputs, f_tilde, u_tilde)
        assert np.isclose(augmented, direct, rtol=1e-6, atol=1e-6)

    @pytest.mark.parametrize("seed", range(20))
    def test_factorisation_on_random_pairs(self, seed):
        """Two function values and two inducing values under a random warping."""
        rng = np.random.default_rng(seed)
        specs = [
            {"kind": "SAL", "init": {"a": rng.normal(scale=0.5), "b": rng.uniform(0.7, 1.3),
                                     "c": rng.normal(scale=0.5), "d": rng.uniform(0.7, 1.3)}}
            for _ in range(2)
        ] + [{"kind": "Tanh"}]
        model = build_model(1, 1, rng, num_inducing=2, z_range=(-1.0, 1.0), flow_specs=specs)
        inputs = np.array([[rng.uniform(-3.0, -2.0)], [rng.uniform(2.0, 3.0)]])
        f_tilde, u_tilde = rng.normal(scale=0.8, size=(2, 1)), rng.normal(scale=0.8, size=(2, 1))
        augmented = augmented_prior_log_density(model, inputs, f_tilde, u_tilde)
        direct = joint_prior_log_density_direct(model, inputs, f_tilde, u_tilde)
        assert abs(augmented - direct) < 1e-8 * max(1.0, abs(direct))

    def test_change_of_variables_with_linear_flow(self, rng):
        """For G(f) = 2 f the warped density is the Gaussian one minus n log 2."""
        plain = build_model(1, 1, np.random.default_rng(0), num_inducing=3)
        scaled = build_model(1, 1, np.random.default_rng(0), num_inducing=3,
                             flow_specs=[{"kind": "Linear", "init": {"b": 2.0}}])
        inputs = np.array([[-1.0], [0.0], [1.0], [2.0]])
        f = rng.normal(size=(4, 1))
        expected = transformed_gp_log_density(plain, inputs, f) - 4 * np.log(2.0)
        assert np.isclose(transformed_gp_log_density(scaled, inputs, 2.0 * f), expected)

    def test_identity_flow_joint_density(self):
        """The identity flow leaves the joint density unchanged."""
        gpssm = build_model(1, 1, np.random.default_rng(1), num_inducing=5, z_range=(-3.0, 1.0))
        tgpssm = build_model(1, 1, np.random.default_rng(1), num_inducing=5, z_range=(-3.0, 1.0),
                             flow_specs=IDENTITY_FLOW)
        trajectory = sample_prior_exact(gpssm, 6, seed=1)
        assert np.isclose(joint_log_density(gpssm, trajectory), joint_log_density(tgpssm, trajectory))

    def test_joint_density_normalised_in_observation(self):
        """Integrating the joint over y_1 leaves the density of (x_{0:1}, f~_1)."""
        model = build_model(1, 1, np.random.default_rng(2), num_inducing=4, flow_specs=default_flow_specs())
        sample = sample_prior_exact(model, 1, seed=4)
        center = float(sample.states[1, 0])
        grid = np.linspace(center - 3.0, center + 3.0, 2001)

        def joint_at(y):
            return joint_log_density(model, Trajectory(states=sample.states, observations=[[y]], f_tilde=sample.f_tilde))

        log_joint = np.array([joint_at(y) for y in grid])
        r = float(np.diag(model.R)[0])
        # the y-free part: the joint at y = C x_1 minus the Gaussian peak height
        marginal = joint_at(center) + 0.5 * np.log(2.0 * np.pi * r)
        assert trapezoid(np.exp(log_joint - marginal), grid) == pytest.approx(1.0, abs=1e-6)

    def test_warped_prior_normalised(self):
        """The change of variables keeps p(f~) a density for a non-identity flow."""
        specs = [{"kind": "SAL", "init": {"a": 0.3, "b": 1.2, "c": 0.1, "d": 0.8}}, {"kind": "Tanh"}]
        model = build_model(1, 1, np.random.default_rng(3), num_inducing=3, flow_specs=specs)
        grid = np.linspace(-9.0, 9.0, 4001)
        density = [np.exp(transformed_gp_log_density(model, np.array([[0.4]]), np.array([[v]]))) for v in grid]
        assert trapezoid(density, grid) == pytest.approx(1.0, abs=1e-4)

    def test_joint_density_needs_complete_trajectory(self, small_tgpssm):
        with pytest.raises(ContractViolation):
            joint_log_density(small_tgpssm, Trajectory(observations=np.zeros((3, 1))))


class TestTrajectory:
    """Trajectory validation and CSV files."""

    def test_length_mismatch(self):
        with pytest.raises(ContractViolation):
            Trajectory(states=np.zeros((4, 1)), observations=np.zeros((4, 1)))

    def test_csv_round_trip_is_exact(self, small_tgpssm, tmp_path):
        """17 significant digits reproduce every float."""
        trajectory = sample_prior_sparse(small_tgpssm, 6, seed=3)
        path = write_trajectory_csv(trajectory, tmp_path / "sample.csv")
        restored = read_trajectory_csv(path)
        assert np.array_equal(restored.states, trajectory.states)
        assert np.array_equal(restored.observations, trajectory.observations)

    def test_csv_layout(self, tmp_path):
        trajectory = Trajectory(states=[[0.0], [1.0]], observations=[[1.5]], controls=[[2.0]])
        path = write_trajectory_csv(trajectory, tmp_path / "t.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == "t,x_1,y_1,u_1"
        assert lines[1] == "0,0,,"
        assert lines[2] == "1,1,1.5,2"
