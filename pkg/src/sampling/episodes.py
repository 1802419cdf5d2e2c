from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from mdp.core import Mdp
from mdp.policy import SoftmaxPolicy, check_policy_matches
from util.logging import logger

MAX_HORIZON = 100_000
DISCOUNT_FLOOR = 1e-10
TRUNCATION_TOL = 1e-9


@dataclass(frozen=True)
class Step:
    t: int
    state: int
    action: int
    reward: float


@dataclass(frozen=True, eq=False)
class Trajectory:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    discounted_return: float
    # Horizon cap hit before reaching a terminal state
    truncated: bool

    @property
    def length(self) -> int:
        return int(self.states.size)

    @cached_property
    def steps(self) -> tuple[Step, ...]:
        return tuple(
            Step(t, int(s), int(a), float(r))
            for t, (s, a, r) in enumerate(zip(self.states, self.actions, self.rewards))
        )


def default_horizon(mdp: Mdp) -> int:
    """Smallest H with gamma^H < 1e-10 and gamma^H R_max / (1 - gamma) < 1e-9, capped."""
    gamma = mdp.gamma
    if gamma >= 1.0:
        return MAX_HORIZON
    r_max = float(np.abs(mdp.reward).max(initial=0.0))
    tol = DISCOUNT_FLOOR
    if r_max > 0.0:
        tol = min(tol, TRUNCATION_TOL * (1.0 - gamma) / r_max)
    horizon = math.floor(math.log(tol) / math.log(gamma)) + 1
    return int(min(max(horizon, 1), MAX_HORIZON))


def episode_rng(seed: int, episode: int) -> np.random.Generator:
    """Counter-based stream for one episode, derived from the root seed."""
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(seed, spawn_key=(episode,)))
    )


def _draw(cdf: np.ndarray, u: float) -> int:
    return min(int(np.searchsorted(cdf, u, side="right")), cdf.size - 1)


class EpisodeSampler:
    """Precomputed inverse-CDF tables for repeated simulation of one (MDP, policy)."""

    def __init__(self, mdp: Mdp, policy: SoftmaxPolicy, horizon: int | None = None):
        check_policy_matches(mdp, policy)
        self.mdp = mdp
        self.horizon = horizon if horizon is not None else default_horizon(mdp)
        if self.horizon < 1:
            raise ValueError(f"horizon must be at least 1, got {self.horizon}")
        self._cdf_initial = np.cumsum(mdp.initial)
        self._cdf_policy = np.cumsum(policy.probabilities, axis=1)
        self._cdf_transition = np.cumsum(mdp.transition, axis=2)
        self._discounts = mdp.gamma ** np.arange(self.horizon)
        logger.debug(f"Episode sampler ready: horizon={self.horizon}")

    def simulate(self, rng) -> Trajectory:
        reward, terminal = self.mdp.reward, self.mdp.terminal
        states, actions, rewards = [], [], []
        s = _draw(self._cdf_initial, rng.random())
        truncated = True
        for _ in range(self.horizon):
            a = _draw(self._cdf_policy[s], rng.random())
            states.append(s)
            actions.append(a)
            rewards.append(reward[s, a])
            s = _draw(self._cdf_transition[s, a], rng.random())
            if terminal[s]:
                truncated = False
                break
        rewards = np.array(rewards)
        return Trajectory(
            states=np.array(states, dtype=int),
            actions=np.array(actions, dtype=int),
            rewards=rewards,
            discounted_return=float(self._discounts[: rewards.size] @ rewards),
            truncated=truncated,
        )


def simulate_episode(
    mdp: Mdp, policy: SoftmaxPolicy, rng, horizon: int | None = None
) -> Trajectory:
    """S_0 ~ mu0, A_t ~ pi(S_t, .), S_{t+1} ~ P(. | S_t, A_t) until terminal or the cap."""
    return EpisodeSampler(mdp, policy, horizon).simulate(rng)
