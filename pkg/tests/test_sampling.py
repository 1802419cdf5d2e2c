from unittest import TestCase

import numpy as np

from baselines.baselines import Provenance, make_baseline, one_hot_features
from critic.compatible import fit_critic
from errors import CriticMismatchError, MissingCriticError
from evaluation.exact import solve_exact
from mdp.core import Mdp, make_random_mdp, make_two_arm_bandit
from mdp.policy import random_policy, zeros_policy
from sampling.episodes import (
    MAX_HORIZON,
    EpisodeSampler,
    default_horizon,
    episode_rng,
    simulate_episode,
)
from sampling.estimators import (
    EstimatorKind,
    EstimatorSpec,
    estimate_gradient,
    fit_baseline_from_episodes,
    returns_to_go,
    variance_report,
)


def _z_scores(estimate, reference):
    return np.abs(estimate.mean - reference) / estimate.standard_error


class TestEpisodes(TestCase):
    def test_default_horizon(self):
        """Test that the horizon is the first H with a negligible discount"""
        mdp = make_random_mdp(4, 2, 0.9, 0)
        horizon = default_horizon(mdp)
        self.assertLess(0.9**horizon, 1e-10)
        self.assertGreaterEqual(0.9 ** (horizon - 1), 1e-10)
        self.assertEqual(default_horizon(make_two_arm_bandit()), MAX_HORIZON)

    def test_horizon_grows_with_reward_scale(self):
        mdp = make_random_mdp(4, 2, 0.9, 0)
        scaled = Mdp(
            transition=mdp.transition,
            reward=1e3 * mdp.reward,
            gamma=mdp.gamma,
            initial=mdp.initial,
            terminal=mdp.terminal,
        )
        self.assertGreater(default_horizon(scaled), default_horizon(mdp))

    def test_episode_streams_are_reproducible(self):
        """Test that (seed, episode) fixes the stream and episodes differ"""
        self.assertEqual(episode_rng(3, 5).random(4).tolist(), episode_rng(3, 5).random(4).tolist())
        self.assertNotEqual(episode_rng(3, 5).random(), episode_rng(3, 6).random())
        self.assertNotEqual(episode_rng(3, 5).random(), episode_rng(4, 5).random())

    def test_bandit_episode(self):
        mdp = make_two_arm_bandit()
        trajectory = simulate_episode(mdp, zeros_policy(mdp), episode_rng(0, 0))
        self.assertEqual(trajectory.length, 1)
        self.assertEqual(trajectory.states.tolist(), [0])
        self.assertIn(trajectory.discounted_return, (0.0, 1.0))
        self.assertFalse(trajectory.truncated)
        self.assertEqual(trajectory.steps[0].t, 0)

    def test_horizon_cap_truncates(self):
        """Test that an episode stuck in a loop stops at the cap and is flagged"""
        transition = np.zeros((2, 2, 2))
        transition[0, :, 0] = 1.0
        transition[1, :, 1] = 1.0
        mdp = Mdp(
            transition=transition,
            reward=np.array([[1.0, 1.0], [0.0, 0.0]]),
            gamma=0.5,
            initial=np.array([1.0, 0.0]),
            terminal=np.array([False, True]),
        )
        trajectory = EpisodeSampler(mdp, zeros_policy(mdp), horizon=5).simulate(episode_rng(0, 0))
        self.assertTrue(trajectory.truncated)
        self.assertEqual(trajectory.length, 5)
        self.assertAlmostEqual(trajectory.discounted_return, 1.9375)

    def test_trajectories_end_at_terminal(self):
        mdp = make_random_mdp(5, 3, 0.9, 1)
        sampler = EpisodeSampler(mdp, random_policy(mdp, 1.0, 0))
        for i in range(50):
            trajectory = sampler.simulate(episode_rng(9, i))
            self.assertFalse(trajectory.truncated)
            self.assertFalse(mdp.terminal[trajectory.states].any())

    def test_returns_to_go(self):
        np.testing.assert_allclose(returns_to_go(np.array([1.0, 1.0, 1.0]), 0.5), [1.75, 1.5, 1.0])
        self.assertEqual(returns_to_go(np.zeros(0), 0.9).size, 0)


class TestBanditEstimators(TestCase):
    def setUp(self):
        self.mdp = make_two_arm_bandit()
        self.policy = zeros_policy(self.mdp)
        self.exact = solve_exact(self.mdp, self.policy)

    def test_reinforce_variance(self):
        """Test REINFORCE on the bandit: mean (1/4, -1/4), variance 1/16 per coordinate"""
        estimate = estimate_gradient(self.mdp, self.policy, EstimatorKind.REINFORCE, 20000, seed=1)
        self.assertTrue(np.all(_z_scores(estimate, self.exact.grad_rho) < 5))
        np.testing.assert_allclose(estimate.per_coordinate_variance, 0.0625, rtol=0.05)
        self.assertAlmostEqual(estimate.covariance_trace, estimate.per_coordinate_variance.sum())

    def test_state_value_baseline_removes_all_variance(self):
        """Test that b = v makes every episode contribute exactly the gradient"""
        estimate = estimate_gradient(
            self.mdp,
            self.policy,
            EstimatorKind.REINFORCE_STATE_BASELINE,
            500,
            seed=1,
            state_baseline=self.exact.v,
        )
        np.testing.assert_allclose(estimate.mean, [0.25, -0.25], atol=1e-15)
        np.testing.assert_allclose(estimate.per_coordinate_variance, 0.0, atol=1e-15)

    def test_thm1_estimator_is_unbiased(self):
        baseline = make_baseline(Provenance.RANDOM_SEEDED, self.mdp, self.policy, self.exact, seed=2)
        critic = fit_critic(self.mdp, self.policy, self.exact, baseline)
        estimate = estimate_gradient(
            self.mdp,
            self.policy,
            EstimatorKind.THM1_CRITIC,
            20000,
            seed=3,
            critic=critic,
            baseline=baseline,
        )
        self.assertTrue(np.all(_z_scores(estimate, self.exact.grad_rho) < 5))

    def test_single_episode_has_zero_variance(self):
        estimate = estimate_gradient(self.mdp, self.policy, "reinforce", 1, seed=0)
        np.testing.assert_array_equal(estimate.per_coordinate_variance, 0.0)


class TestEnsembleEstimators(TestCase):
    def test_estimators_are_unbiased(self):
        """Test reinforce and the critic estimator at 10^5 episodes over ten random MDPs"""
        z_all = []
        for seed in range(10):
            mdp = make_random_mdp(6, 3, 0.9, seed)
            policy = random_policy(mdp, 1.0, seed)
            exact = solve_exact(mdp, policy)
            baseline = make_baseline(Provenance.RANDOM_SEEDED, mdp, policy, exact, seed=seed)
            families = [
                EstimatorSpec(EstimatorKind.REINFORCE),
                EstimatorSpec(
                    EstimatorKind.THM1_CRITIC,
                    critic=fit_critic(mdp, policy, exact, baseline),
                    baseline=baseline,
                ),
            ]
            report = variance_report(mdp, policy, families, 100_000, seed=seed)
            for row in report.rows:
                self.assertEqual(row.estimate.truncated_episodes, 0)
                z_all.append(_z_scores(row.estimate, exact.grad_rho))
        z_all = np.concatenate(z_all)
        self.assertEqual(z_all.size, 10 * 2 * 15)
        self.assertGreaterEqual(np.mean(z_all < 3), 0.99)

    def test_state_baseline_is_unbiased(self):
        mdp = make_random_mdp(5, 3, 0.9, 3)
        policy = random_policy(mdp, 1.0, 3)
        exact = solve_exact(mdp, policy)
        estimate = estimate_gradient(
            mdp, policy, EstimatorKind.REINFORCE_STATE_BASELINE, 4000, seed=3, state_baseline=exact.v
        )
        self.assertTrue(np.all(_z_scores(estimate, exact.grad_rho) < 5))

    def test_common_random_numbers(self):
        """Test that a family sees the same trajectories alone or in a report"""
        mdp = make_random_mdp(4, 2, 0.9, 5)
        policy = random_policy(mdp, 1.0, 5)
        exact = solve_exact(mdp, policy)
        alone = estimate_gradient(mdp, policy, EstimatorKind.REINFORCE, 300, seed=11)
        report = variance_report(
            mdp,
            policy,
            [
                EstimatorSpec(EstimatorKind.REINFORCE_STATE_BASELINE, "state", state_baseline=exact.v),
                EstimatorSpec(EstimatorKind.REINFORCE, "plain"),
            ],
            300,
            seed=11,
        )
        self.assertEqual([row.label for row in report.rows], ["state", "plain"])
        np.testing.assert_array_equal(report.rows[1].estimate.mean, alone.mean)
        np.testing.assert_array_equal(
            report.rows[1].estimate.per_coordinate_variance, alone.per_coordinate_variance
        )

    def test_same_seed_same_estimate(self):
        mdp = make_random_mdp(4, 2, 0.9, 6)
        policy = random_policy(mdp, 1.0, 6)
        a = estimate_gradient(mdp, policy, EstimatorKind.REINFORCE, 200, seed=4)
        b = estimate_gradient(mdp, policy, EstimatorKind.REINFORCE, 200, seed=4)
        c = estimate_gradient(mdp, policy, EstimatorKind.REINFORCE, 200, seed=5)
        np.testing.assert_array_equal(a.mean, b.mean)
        self.assertFalse(np.array_equal(a.mean, c.mean))


class TestEstimatorErrors(TestCase):
    def setUp(self):
        self.mdp = make_random_mdp(4, 2, 0.9, 0)
        self.policy = random_policy(self.mdp, 1.0, 0)
        self.exact = solve_exact(self.mdp, self.policy)

    def test_missing_critic(self):
        with self.assertRaises(MissingCriticError):
            estimate_gradient(self.mdp, self.policy, EstimatorKind.THM1_CRITIC, 10, seed=0)

    def test_mismatched_critic(self):
        b1 = make_baseline(Provenance.RANDOM_SEEDED, self.mdp, self.policy, self.exact, seed=1)
        b2 = make_baseline(Provenance.RANDOM_SEEDED, self.mdp, self.policy, self.exact, seed=2)
        with self.assertRaises(CriticMismatchError):
            estimate_gradient(
                self.mdp,
                self.policy,
                EstimatorKind.THM1_CRITIC,
                10,
                seed=0,
                critic=fit_critic(self.mdp, self.policy, self.exact, b1),
                baseline=b2,
            )

    def test_missing_state_baseline(self):
        with self.assertRaises(ValueError):
            estimate_gradient(
                self.mdp, self.policy, EstimatorKind.REINFORCE_STATE_BASELINE, 10, seed=0
            )

    def test_episode_count(self):
        with self.assertRaises(ValueError):
            estimate_gradient(self.mdp, self.policy, EstimatorKind.REINFORCE, 0, seed=0)


class TestBaselineFromEpisodes(TestCase):
    def test_tabular_fit_on_bandit(self):
        """Test that one-hot regression of returns recovers q on visited pairs"""
        mdp = make_two_arm_bandit()
        param = fit_baseline_from_episodes(mdp, zeros_policy(mdp), one_hot_features(mdp), 200, seed=0)
        np.testing.assert_allclose(param.table, [[1.0, 0.0], [0.0, 0.0]], atol=1e-12)

    def test_fit_converges_towards_exact_fit(self):
        mdp = make_random_mdp(4, 2, 0.9, 3)
        policy = random_policy(mdp, 0.5, 3)
        exact = solve_exact(mdp, policy)
        param = fit_baseline_from_episodes(mdp, policy, one_hot_features(mdp), 3000, seed=2)
        # Visit-weighted squared error; rarely visited pairs are allowed to be noisy
        weights = exact.d[:, None] * policy.probabilities
        error = np.sum(weights * (param.table - exact.q) ** 2) / weights.sum()
        self.assertLess(error, 0.05)
