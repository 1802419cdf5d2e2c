"""Compatible critics f_w(s, a) = w . psi(s, a) and the gradient forms built on them.

A critic fit against a baseline b minimizes

    1/2 sum_s d(s) sum_a pi(s, a) (f_w(s, a) - (q(s, a) - b(s, a)))^2

(b = 0 gives the plain q-value loss). Any critical point satisfies A w = c,
with A and c from ``build_normal_equations``; ``fit_critic`` returns the
minimum-norm one.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import StrEnum

import numpy as np

from baselines.baselines import Baseline
from critic.lstsq import min_norm_solve, nullspace, weighted_gram
from errors import CriticMismatchError, DimensionMismatchError
from evaluation.exact import ExactSolution, weighted_score_sum
from mdp.core import Mdp
from mdp.policy import SoftmaxPolicy
from util.fingerprint import array_digest
from util.logging import logger


class TargetKind(StrEnum):
    Q_VALUES = "q_values"
    RESIDUAL = "residual"


@dataclass(frozen=True, eq=False)
class CriticFit:
    w: np.ndarray
    fitted: np.ndarray
    loss_value: float
    target_kind: TargetKind
    rank: int
    normal_residual: float
    # Identifies the (baseline, theta, MDP) the critic was fit against
    fingerprint: str
    normal_matrix: np.ndarray
    normal_rhs: np.ndarray
    target: np.ndarray
    weights: np.ndarray

    def with_weights(self, w: np.ndarray, policy: SoftmaxPolicy) -> "CriticFit":
        """The same fit moved to another weight vector (e.g. another critical point)."""
        w = np.asarray(w, dtype=float)
        fitted = policy.score_tensor @ w
        return replace(
            self,
            w=w,
            fitted=fitted,
            loss_value=_loss(self.weights, fitted, self.target),
            normal_residual=float(np.linalg.norm(self.normal_matrix @ w - self.normal_rhs)),
        )


@dataclass(frozen=True, eq=False)
class BiasReport:
    naive_gradient: np.ndarray
    true_gradient: np.ndarray
    leakage: np.ndarray
    bias_norm: float
    # ||naive + leakage - true||_inf; zero up to round-off for every baseline
    consistency_error: float


def _loss(weights: np.ndarray, fitted: np.ndarray, target: np.ndarray) -> float:
    err = np.where(weights != 0.0, fitted - target, 0.0)
    return float(0.5 * np.sum(weights * err**2))


def _baseline_table(mdp: Mdp, baseline: Baseline | np.ndarray | None) -> np.ndarray:
    if baseline is None:
        return np.zeros((mdp.num_states, mdp.num_actions))
    table = baseline.table if isinstance(baseline, Baseline) else np.asarray(baseline, dtype=float)
    if table.shape != (mdp.num_states, mdp.num_actions):
        raise DimensionMismatchError(
            f"baseline shape {table.shape} does not match MDP ({mdp.num_states}, {mdp.num_actions})"
        )
    return table


def pairing_fingerprint(mdp: Mdp, policy: SoftmaxPolicy, table: np.ndarray) -> str:
    return array_digest(
        np.asarray(table, dtype=float), tag=f"critic:{mdp.fingerprint}:{policy.fingerprint}"
    )


def build_normal_equations(
    mdp: Mdp,
    policy: SoftmaxPolicy,
    exact: ExactSolution,
    baseline: Baseline | np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    table = _baseline_table(mdp, baseline)
    weights = exact.d[:, None] * policy.probabilities
    matrix = weighted_gram(weights, policy.score_tensor)
    rhs = weighted_score_sum(policy, exact.d, exact.q - table)
    return matrix, rhs


def fit_critic(
    mdp: Mdp,
    policy: SoftmaxPolicy,
    exact: ExactSolution,
    baseline: Baseline | np.ndarray | None = None,
) -> CriticFit:
    table = _baseline_table(mdp, baseline)
    matrix, rhs = build_normal_equations(mdp, policy, exact, table)
    solution = min_norm_solve(matrix, rhs)

    weights = exact.d[:, None] * policy.probabilities
    target = exact.q - table
    fitted = policy.score_tensor @ solution.x
    kind = TargetKind.Q_VALUES if baseline is None else TargetKind.RESIDUAL

    fit = CriticFit(
        w=solution.x,
        fitted=fitted,
        loss_value=_loss(weights, fitted, target),
        target_kind=kind,
        rank=solution.rank,
        normal_residual=solution.residual_norm,
        fingerprint=pairing_fingerprint(mdp, policy, table),
        normal_matrix=matrix,
        normal_rhs=rhs,
        target=target,
        weights=weights,
    )
    logger.debug(
        f"Fit {kind} critic: rank {fit.rank}/{policy.n_theta}, loss={fit.loss_value:.6g}, "
        f"normal residual={fit.normal_residual:.3g}"
    )
    return fit


def critic_nullspace(critic: CriticFit) -> np.ndarray:
    """Directions z with A z = 0; every w + z is another critical point."""
    return nullspace(critic.normal_matrix)


def target_fit(
    mdp: Mdp, policy: SoftmaxPolicy, exact: ExactSolution, table: np.ndarray
) -> np.ndarray:
    """Min-norm weights fitting an arbitrary target table onto psi."""
    weights = exact.d[:, None] * policy.probabilities
    matrix = weighted_gram(weights, policy.score_tensor)
    rhs = weighted_score_sum(policy, exact.d, _baseline_table(mdp, table))
    return min_norm_solve(matrix, rhs).x


def _require_pairing(mdp: Mdp, policy: SoftmaxPolicy, critic: CriticFit, table: np.ndarray, what: str):
    if critic.fingerprint != pairing_fingerprint(mdp, policy, table):
        logger.warning(f"Critic fingerprint does not match the {what} it is assembled with")
        raise CriticMismatchError(
            f"critic was not fit against this {what} (or against a different theta/MDP)"
        )


def assemble_gradient_thm1(
    mdp: Mdp,
    policy: SoftmaxPolicy,
    exact: ExactSolution,
    critic: CriticFit,
    baseline: Baseline | np.ndarray | None,
) -> np.ndarray:
    """sum_s d sum_a pi (f_w~(s, a) + b(s, a)) psi(s, a) with the residual critic."""
    table = _baseline_table(mdp, baseline)
    _require_pairing(mdp, policy, critic, table, "baseline")
    if critic.target_kind is TargetKind.Q_VALUES:
        logger.debug("Assembling with a q-value critic, equivalent to a residual fit against b = 0")
    return weighted_score_sum(policy, exact.d, critic.fitted + table)


def assemble_gradient_s2(
    mdp: Mdp,
    policy: SoftmaxPolicy,
    exact: ExactSolution,
    critic: CriticFit,
    state_baseline: np.ndarray,
) -> np.ndarray:
    """sum_s d sum_a pi (f_w*(s, a) - b(s)) psi(s, a) with the q-value critic."""
    state_baseline = np.asarray(state_baseline, dtype=float)
    if state_baseline.shape != (mdp.num_states,):
        raise DimensionMismatchError(
            f"state baseline must have shape ({mdp.num_states},), got {state_baseline.shape}"
        )
    _require_pairing(
        mdp, policy, critic, np.zeros((mdp.num_states, mdp.num_actions)), "zero baseline"
    )
    return weighted_score_sum(policy, exact.d, critic.fitted - state_baseline[:, None])


def baseline_leakage(
    mdp: Mdp,
    policy: SoftmaxPolicy,
    exact: ExactSolution,
    baseline: Baseline | np.ndarray,
) -> np.ndarray:
    """sum_s d sum_a pi b(s, a) psi(s, a); vanishes when b depends on s only."""
    return weighted_score_sum(policy, exact.d, _baseline_table(mdp, baseline))


def bias_probe(
    mdp: Mdp,
    policy: SoftmaxPolicy,
    exact: ExactSolution,
    baseline: Baseline | np.ndarray,
    critic: CriticFit | None = None,
) -> BiasReport:
    """Bias of subtracting b(s, a) from the q-value critic as if it were b(s)."""
    table = _baseline_table(mdp, baseline)
    if critic is None:
        critic = fit_critic(mdp, policy, exact, None)
    _require_pairing(
        mdp, policy, critic, np.zeros((mdp.num_states, mdp.num_actions)), "zero baseline"
    )
    naive = weighted_score_sum(policy, exact.d, critic.fitted - table)
    leakage = weighted_score_sum(policy, exact.d, table)
    true = exact.grad_rho
    report = BiasReport(
        naive_gradient=naive,
        true_gradient=true,
        leakage=leakage,
        bias_norm=float(np.linalg.norm(naive - true)),
        consistency_error=float(np.abs(naive + leakage - true).max(initial=0.0)),
    )
    logger.info(
        f"Bias probe: bias_norm={report.bias_norm:.6g}, consistency error={report.consistency_error:.3g}"
    )
    return report
