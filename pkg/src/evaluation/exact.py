from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import linalg

from errors import SingularSystemError
from mdp.core import Mdp
from mdp.policy import SoftmaxPolicy, check_policy_matches
from util.logging import logger

DEFAULT_FD_STEP = 1e-5
MAX_FD_STEP = 1e-2


class Values(NamedTuple):
    v: np.ndarray
    q: np.ndarray
    rho: float


@dataclass(frozen=True, eq=False)
class ExactSolution:
    """Every policy-dependent quantity, computed by direct linear solves.

    ``d`` is the unnormalized discounted occupancy, zero on terminal states.
    """

    d: np.ndarray
    v: np.ndarray
    q: np.ndarray
    rho: float
    grad_rho: np.ndarray


def _solve(matrix: np.ndarray, rhs: np.ndarray, what: str) -> np.ndarray:
    if matrix.size == 0:
        return np.zeros(0)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", linalg.LinAlgWarning)
            return linalg.solve(matrix, rhs, assume_a="gen", check_finite=True)
    except (linalg.LinAlgError, linalg.LinAlgWarning) as e:
        logger.warning(f"The {what} system is singular or ill-conditioned: {e}")
        raise SingularSystemError(
            f"{what} system (I - gamma P_pi) is singular; the MDP's termination guarantee does not hold"
        ) from e


def policy_kernel(mdp: Mdp, policy: SoftmaxPolicy) -> tuple[np.ndarray, np.ndarray]:
    """P_pi and r_pi restricted to decision states."""
    check_policy_matches(mdp, policy)
    pi = policy.probabilities
    n = mdp.decision_states
    p_pi = np.einsum("sa,sat->st", pi, mdp.transition)[np.ix_(n, n)]
    r_pi = (pi * mdp.reward).sum(axis=1)[n]
    return p_pi, r_pi


def solve_values(mdp: Mdp, policy: SoftmaxPolicy) -> Values:
    p_pi, r_pi = policy_kernel(mdp, policy)
    n = mdp.decision_states
    v = np.zeros(mdp.num_states)
    v[n] = _solve(np.eye(n.size) - mdp.gamma * p_pi, r_pi, "value")
    q = mdp.reward + mdp.gamma * mdp.transition @ v
    q[mdp.terminal] = 0.0
    rho = float(mdp.initial @ v)
    logger.debug(f"Solved values: rho={rho}, bellman residual={bellman_residual(mdp, policy, v, q):.3g}")
    return Values(v=v, q=q, rho=rho)


def solve_occupancy(mdp: Mdp, policy: SoftmaxPolicy) -> np.ndarray:
    """d(s) = sum_t gamma^t Pr(S_t = s), over decision states only."""
    p_pi, _ = policy_kernel(mdp, policy)
    n = mdp.decision_states
    d = np.zeros(mdp.num_states)
    d[n] = _solve(np.eye(n.size) - mdp.gamma * p_pi.T, mdp.initial[n], "occupancy")
    return d


def bellman_residual(mdp: Mdp, policy: SoftmaxPolicy, v: np.ndarray, q: np.ndarray) -> float:
    """Max-norm violation of v = sum_a pi q and q = R + gamma P v."""
    pi = policy.probabilities
    n = mdp.decision_states
    q_res = np.abs(q - (mdp.reward + mdp.gamma * mdp.transition @ v))[n]
    v_res = np.abs(v - (pi * q).sum(axis=1))[n]
    return float(max(q_res.max(initial=0.0), v_res.max(initial=0.0)))


def occupancy_residual(mdp: Mdp, policy: SoftmaxPolicy, d: np.ndarray) -> float:
    p_pi, _ = policy_kernel(mdp, policy)
    n = mdp.decision_states
    return float(np.abs(d[n] - mdp.initial[n] - mdp.gamma * p_pi.T @ d[n]).max(initial=0.0))


def weighted_score_sum(policy: SoftmaxPolicy, d: np.ndarray, table: np.ndarray) -> np.ndarray:
    """sum_s d(s) sum_a pi(s, a) table(s, a) psi(s, a), summed state-major."""
    weights = d[:, None] * policy.probabilities
    weights = np.where(weights != 0.0, weights * table, 0.0)
    return np.tensordot(weights, policy.score_tensor, axes=([0, 1], [0, 1]))


def exact_policy_gradient(
    mdp: Mdp,
    policy: SoftmaxPolicy,
    values: Values | None = None,
    d: np.ndarray | None = None,
) -> np.ndarray:
    values = values if values is not None else solve_values(mdp, policy)
    d = d if d is not None else solve_occupancy(mdp, policy)
    return weighted_score_sum(policy, d, values.q)


def solve_exact(mdp: Mdp, policy: SoftmaxPolicy) -> ExactSolution:
    values = solve_values(mdp, policy)
    d = solve_occupancy(mdp, policy)
    grad = exact_policy_gradient(mdp, policy, values, d)
    return ExactSolution(d=d, v=values.v, q=values.q, rho=values.rho, grad_rho=grad)


def finite_difference_gradient(
    mdp: Mdp, policy: SoftmaxPolicy, h: float = DEFAULT_FD_STEP
) -> np.ndarray:
    """Central differences of rho, one coordinate at a time."""
    if not 0.0 < h <= MAX_FD_STEP:
        raise ValueError(f"finite-difference step must lie in (0, {MAX_FD_STEP}], got {h}")
    base = policy.flat()
    grad = np.zeros(base.size)
    for i in range(base.size):
        step = np.zeros(base.size)
        step[i] = h
        plus = solve_values(mdp, policy.with_flat(base + step)).rho
        minus = solve_values(mdp, policy.with_flat(base - step)).rho
        grad[i] = (plus - minus) / (2 * h)
    return grad


def max_rel_err(x: np.ndarray, ref: np.ndarray, floor: float = 1.0) -> float:
    """||x - ref||_inf / max(||ref||_inf, floor)."""
    x, ref = np.asarray(x), np.asarray(ref)
    scale = max(float(np.abs(ref).max(initial=0.0)), floor)
    return float(np.abs(x - ref).max(initial=0.0)) / scale
