from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from errors import PolicyError
from mdp.core import Mdp
from util.fingerprint import array_digest
from util.logging import logger

LOGIT_BOUND = 50.0


@dataclass(frozen=True, eq=False)
class SoftmaxPolicy:
    """Tabular softmax policy over the decision (non-terminal) states.

    ``theta`` is a full (num_states, num_actions) table; rows of terminal
    states carry no parameters and are held at zero. The flat parameter
    vector runs row-major over decision states only, so coordinate
    ``offset(s) + a`` belongs to (s, a).
    """

    theta: np.ndarray
    terminal: np.ndarray

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float)
        terminal = np.array(self.terminal, dtype=bool)
        if theta.ndim != 2 or theta.shape[0] != terminal.shape[0]:
            raise PolicyError(
                f"theta shape {theta.shape} does not match {terminal.shape[0]} states"
            )
        theta[terminal] = 0.0
        if not np.all(np.isfinite(theta)):
            raise PolicyError("theta contains non-finite logits")
        worst = float(np.abs(theta).max(initial=0.0))
        if worst > LOGIT_BOUND:
            logger.warning(f"Rejecting logits with magnitude {worst} > {LOGIT_BOUND}")
            raise PolicyError(f"logits must lie in [-{LOGIT_BOUND}, {LOGIT_BOUND}], got {worst}")
        theta.setflags(write=False)
        terminal.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "terminal", terminal)

    @property
    def num_actions(self) -> int:
        return int(self.theta.shape[1])

    @cached_property
    def decision_states(self) -> np.ndarray:
        return np.flatnonzero(~self.terminal)

    @property
    def n_theta(self) -> int:
        return int(self.decision_states.size * self.num_actions)

    @cached_property
    def offsets(self) -> np.ndarray:
        """Start of each state's parameter block; -1 for terminal states."""
        offsets = np.full(self.terminal.shape[0], -1, dtype=int)
        offsets[self.decision_states] = np.arange(self.decision_states.size) * self.num_actions
        return offsets

    @cached_property
    def probabilities(self) -> np.ndarray:
        """pi(s, a) for every state; rows of terminal states are zero."""
        probs = np.zeros_like(self.theta)
        logits = self.theta[self.decision_states]
        z = np.exp(logits - logits.max(axis=1, keepdims=True))
        probs[self.decision_states] = z / z.sum(axis=1, keepdims=True)
        probs.setflags(write=False)
        return probs

    @cached_property
    def score_tensor(self) -> np.ndarray:
        """psi(s, a) for every pair, shape (num_states, num_actions, n_theta)."""
        S, A = self.theta.shape
        psi = np.zeros((S, A, self.n_theta))
        eye = np.eye(A)
        for s in self.decision_states:
            o = self.offsets[s]
            psi[s, :, o : o + A] = eye - self.probabilities[s][None, :]
        psi.setflags(write=False)
        return psi

    @cached_property
    def fingerprint(self) -> str:
        return array_digest(self.theta, self.terminal, tag="policy")

    def flat(self) -> np.ndarray:
        return self.theta[self.decision_states].ravel()

    def with_flat(self, params: np.ndarray) -> "SoftmaxPolicy":
        params = np.asarray(params, dtype=float)
        if params.shape != (self.n_theta,):
            raise PolicyError(f"expected {self.n_theta} parameters, got shape {params.shape}")
        theta = np.zeros_like(self.theta)
        theta[self.decision_states] = params.reshape(-1, self.num_actions)
        return SoftmaxPolicy(theta=theta, terminal=self.terminal)


def zeros_policy(mdp: Mdp) -> SoftmaxPolicy:
    return SoftmaxPolicy(
        theta=np.zeros((mdp.num_states, mdp.num_actions)), terminal=mdp.terminal
    )


def random_policy(mdp: Mdp, scale: float, seed: int) -> SoftmaxPolicy:
    """Logits drawn i.i.d. N(0, scale^2), clipped to the accepted range."""
    rng = np.random.default_rng(seed)
    theta = rng.normal(0.0, scale, size=(mdp.num_states, mdp.num_actions))
    return SoftmaxPolicy(
        theta=np.clip(theta, -LOGIT_BOUND, LOGIT_BOUND), terminal=mdp.terminal
    )


def policy_from_theta(mdp: Mdp, theta: np.ndarray) -> SoftmaxPolicy:
    """Accept either a full (S, A) table or a flat vector of length n_theta."""
    theta = np.asarray(theta, dtype=float)
    template = zeros_policy(mdp)
    if theta.ndim == 1:
        return template.with_flat(theta)
    if theta.shape != (mdp.num_states, mdp.num_actions):
        raise PolicyError(
            f"theta shape {theta.shape} does not match MDP ({mdp.num_states}, {mdp.num_actions})"
        )
    return SoftmaxPolicy(theta=theta, terminal=mdp.terminal)


def check_policy_matches(mdp: Mdp, policy: SoftmaxPolicy) -> None:
    if policy.theta.shape != (mdp.num_states, mdp.num_actions) or not np.array_equal(
        policy.terminal, mdp.terminal
    ):
        raise PolicyError("policy was built for a different MDP layout")


def _require_decision_state(policy: SoftmaxPolicy, s: int) -> None:
    if not 0 <= s < policy.terminal.shape[0]:
        raise PolicyError(f"state {s} out of range")
    if policy.terminal[s]:
        raise PolicyError(f"policy is undefined at terminal state {s}")


def policy_probabilities(policy: SoftmaxPolicy, s: int) -> np.ndarray:
    _require_decision_state(policy, s)
    return np.array(policy.probabilities[s])


def score_features(policy: SoftmaxPolicy, s: int, a: int) -> np.ndarray:
    """d/dtheta ln pi(s, a, theta); only the block of state s is non-zero."""
    _require_decision_state(policy, s)
    if not 0 <= a < policy.num_actions:
        raise PolicyError(f"action {a} out of range")
    return np.array(policy.score_tensor[s, a])
