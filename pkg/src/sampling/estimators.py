"""Monte Carlo gradient estimators.

Every estimator is per-visit and discounted: an episode contributes
sum_t gamma^t psi(S_t, A_t) X_t, whose expectation is the d-weighted sum of
the exact forms. X_t is the return-to-go G_t (reinforce), G_t - b(S_t)
(reinforce_state_baseline) or f_w~(S_t, A_t) + b(S_t, A_t) (thm1_critic).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import StrEnum

import numpy as np

from baselines.baselines import Baseline, ParamBaseline, check_features
from critic.compatible import CriticFit, pairing_fingerprint
from critic.lstsq import min_norm_solve
from errors import CriticMismatchError, MissingCriticError
from mdp.core import Mdp
from mdp.policy import SoftmaxPolicy
from sampling.episodes import EpisodeSampler, Trajectory, episode_rng
from util.logging import logger


class EstimatorKind(StrEnum):
    REINFORCE = "reinforce"
    REINFORCE_STATE_BASELINE = "reinforce_state_baseline"
    THM1_CRITIC = "thm1_critic"


@dataclass(frozen=True, eq=False)
class EstimatorSpec:
    kind: EstimatorKind
    label: str = ""
    state_baseline: np.ndarray | None = None
    critic: CriticFit | None = None
    baseline: Baseline | None = None


@dataclass(frozen=True, eq=False)
class GradientEstimate:
    mean: np.ndarray
    per_coordinate_variance: np.ndarray
    num_episodes: int
    estimator_kind: EstimatorKind
    seed: int
    truncated_episodes: int = 0

    @property
    def standard_error(self) -> np.ndarray:
        return np.sqrt(self.per_coordinate_variance / self.num_episodes)

    @property
    def covariance_trace(self) -> float:
        return float(self.per_coordinate_variance.sum())


@dataclass(frozen=True, eq=False)
class VarianceRow:
    label: str
    estimate: GradientEstimate


@dataclass(frozen=True, eq=False)
class VarianceReport:
    rows: list[VarianceRow]
    num_episodes: int
    seed: int


def returns_to_go(rewards: np.ndarray, gamma: float) -> np.ndarray:
    """G_t = sum_{k >= t} gamma^(k - t) R_k."""
    returns = np.empty(rewards.shape, dtype=float)
    running = 0.0
    for t in reversed(range(rewards.size)):
        running = rewards[t] + gamma * running
        returns[t] = running
    return returns


def _per_visit_values(
    mdp: Mdp, policy: SoftmaxPolicy, spec: EstimatorSpec
) -> tuple[np.ndarray | None, np.ndarray | None]:
    """Validate a spec; returns (state baseline, thm1 table)."""
    match spec.kind:
        case EstimatorKind.REINFORCE:
            return None, None
        case EstimatorKind.REINFORCE_STATE_BASELINE:
            if spec.state_baseline is None:
                raise ValueError("reinforce_state_baseline needs a state baseline")
            b = np.asarray(spec.state_baseline, dtype=float)
            if b.shape != (mdp.num_states,):
                raise ValueError(f"state baseline must have shape ({mdp.num_states},)")
            return b, None
        case EstimatorKind.THM1_CRITIC:
            if spec.critic is None:
                logger.warning("thm1_critic estimator requested without a critic")
                raise MissingCriticError("thm1_critic estimator needs a residual critic")
            table = (
                spec.baseline.table
                if spec.baseline is not None
                else np.zeros((mdp.num_states, mdp.num_actions))
            )
            if spec.critic.fingerprint != pairing_fingerprint(mdp, policy, table):
                logger.warning("Critic and baseline passed to the sampler do not belong together")
                raise CriticMismatchError("critic was not fit against this baseline")
            return None, spec.critic.fitted + table
    raise ValueError(f"unknown estimator kind {spec.kind}")


def episode_gradient(
    trajectory: Trajectory,
    policy: SoftmaxPolicy,
    gamma: float,
    kind: EstimatorKind,
    state_baseline: np.ndarray | None = None,
    table: np.ndarray | None = None,
) -> np.ndarray:
    states, actions = trajectory.states, trajectory.actions
    discounts = gamma ** np.arange(trajectory.length)
    if kind is EstimatorKind.THM1_CRITIC:
        values = table[states, actions]
    else:
        values = returns_to_go(trajectory.rewards, gamma)
        if kind is EstimatorKind.REINFORCE_STATE_BASELINE:
            values = values - state_baseline[states]
    return (discounts * values) @ policy.score_tensor[states, actions]


def _run(
    mdp: Mdp,
    policy: SoftmaxPolicy,
    specs: list[EstimatorSpec],
    num_episodes: int,
    seed: int,
    horizon: int | None = None,
) -> list[GradientEstimate]:
    """Simulate once per episode and feed every estimator the same trajectory.

    Moments are accumulated in episode-index order (Welford), so results do
    not depend on anything but (config, seed).
    """
    if num_episodes < 1:
        raise ValueError(f"num_episodes must be at least 1, got {num_episodes}")
    prepared = [_per_visit_values(mdp, policy, spec) for spec in specs]
    sampler = EpisodeSampler(mdp, policy, horizon)
    n = policy.n_theta
    means = np.zeros((len(specs), n))
    m2 = np.zeros((len(specs), n))
    truncated = 0

    for i in range(num_episodes):
        trajectory = sampler.simulate(episode_rng(seed, i))
        truncated += trajectory.truncated
        for j, (spec, (state_baseline, table)) in enumerate(zip(specs, prepared)):
            g = episode_gradient(trajectory, policy, mdp.gamma, spec.kind, state_baseline, table)
            delta = g - means[j]
            means[j] += delta / (i + 1)
            m2[j] += delta * (g - means[j])

    if truncated:
        logger.warning(f"{truncated} of {num_episodes} episodes hit the horizon cap {sampler.horizon}")
    variance = m2 / (num_episodes - 1) if num_episodes > 1 else np.zeros_like(m2)
    return [
        GradientEstimate(
            mean=means[j],
            per_coordinate_variance=variance[j],
            num_episodes=num_episodes,
            estimator_kind=spec.kind,
            seed=seed,
            truncated_episodes=truncated,
        )
        for j, spec in enumerate(specs)
    ]


def estimate_gradient(
    mdp: Mdp,
    policy: SoftmaxPolicy,
    estimator_kind: EstimatorKind | str,
    num_episodes: int,
    seed: int,
    state_baseline: np.ndarray | None = None,
    critic: CriticFit | None = None,
    baseline: Baseline | None = None,
    horizon: int | None = None,
) -> GradientEstimate:
    spec = EstimatorSpec(
        kind=EstimatorKind(estimator_kind),
        state_baseline=state_baseline,
        critic=critic,
        baseline=baseline,
    )
    (estimate,) = _run(mdp, policy, [spec], num_episodes, seed, horizon)
    logger.info(
        f"Estimated {spec.kind} gradient from {num_episodes} episodes: "
        f"max SE={estimate.standard_error.max(initial=0.0):.3g}"
    )
    return estimate


def variance_report(
    mdp: Mdp,
    policy: SoftmaxPolicy,
    families: list[EstimatorSpec],
    num_episodes: int,
    seed: int,
    horizon: int | None = None,
) -> VarianceReport:
    """Variance of each estimator family on common random numbers."""
    estimates = _run(mdp, policy, families, num_episodes, seed, horizon)
    rows = [
        VarianceRow(label=spec.label or str(spec.kind), estimate=estimate)
        for spec, estimate in zip(families, estimates)
    ]
    for row in rows:
        logger.info(f"{row.label}: trace of covariance {row.estimate.covariance_trace:.6g}")
    return VarianceReport(rows=rows, num_episodes=num_episodes, seed=seed)


def fit_baseline_from_episodes(
    mdp: Mdp,
    policy: SoftmaxPolicy,
    features: np.ndarray,
    num_episodes: int,
    seed: int,
    horizon: int | None = None,
) -> ParamBaseline:
    """Estimate b_x from simulated data: regress G_t on phi(S_t, A_t) with weights gamma^t."""
    if num_episodes < 1:
        raise ValueError(f"num_episodes must be at least 1, got {num_episodes}")
    features = check_features(np.asarray(features, dtype=float), mdp)
    k = features.shape[2]
    gram = np.zeros((k, k))
    moment = np.zeros(k)
    sampler = EpisodeSampler(mdp, policy, horizon)
    for i in range(num_episodes):
        trajectory = sampler.simulate(episode_rng(seed, i))
        phi = features[trajectory.states, trajectory.actions]
        discounts = mdp.gamma ** np.arange(trajectory.length)
        gram += (phi * discounts[:, None]).T @ phi
        moment += (discounts * returns_to_go(trajectory.rewards, mdp.gamma)) @ phi
    solution = min_norm_solve(gram / num_episodes, moment / num_episodes)
    logger.debug(f"Baseline fit from {num_episodes} episodes: rank={solution.rank}")
    return ParamBaseline(x=solution.x, features=features)
