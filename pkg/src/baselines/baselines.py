from __future__ import annotations

from dataclasses import dataclass
from enum import StrEnum
from functools import cached_property

import numpy as np

from critic.lstsq import min_norm_solve, weighted_gram, weighted_moment
from errors import DimensionMismatchError, UnknownBaselineError
from evaluation.exact import ExactSolution, solve_values
from mdp.core import Mdp
from mdp.policy import SoftmaxPolicy
from util.fingerprint import array_digest
from util.logging import logger


class Provenance(StrEnum):
    ZERO = "zero"
    STATE_VALUE = "state_value"
    CONSTANT = "constant"
    RANDOM_SEEDED = "random_seeded"
    MODEL_BASED = "model_based"
    PARAMETERIZED = "parameterized"
    TABULATED = "tabulated"


@dataclass(frozen=True, eq=False)
class Baseline:
    table: np.ndarray
    provenance: Provenance

    def __post_init__(self):
        table = np.array(self.table, dtype=float)
        if table.ndim != 2:
            raise DimensionMismatchError(f"baseline table must be 2-d, got shape {table.shape}")
        if not np.all(np.isfinite(table)):
            raise ValueError("baseline table must be finite everywhere")
        table.setflags(write=False)
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "provenance", Provenance(self.provenance))

    @cached_property
    def fingerprint(self) -> str:
        return array_digest(self.table, tag="baseline")

    def __repr__(self):
        return f"Baseline(provenance={self.provenance}, shape={self.table.shape})"


@dataclass(frozen=True, eq=False)
class ParamBaseline:
    """b_x(s, a) = x . phi(s, a) for a feature tensor phi of shape (S, A, k)."""

    x: np.ndarray
    features: np.ndarray

    def __post_init__(self):
        features = check_features(np.array(self.features, dtype=float))
        x = np.array(self.x, dtype=float)
        if x.shape != (features.shape[2],):
            raise DimensionMismatchError(
                f"expected {features.shape[2]} parameters, got shape {x.shape}"
            )
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "x", x)

    @cached_property
    def table(self) -> np.ndarray:
        return self.features @ self.x

    def evaluate(self, s: int, a: int) -> float:
        return float(self.x @ self.features[s, a])

    def to_baseline(self) -> Baseline:
        return Baseline(table=self.table, provenance=Provenance.PARAMETERIZED)


@dataclass(frozen=True, eq=False)
class JointFit:
    w: np.ndarray
    x: np.ndarray
    predicted: np.ndarray
    rank: int
    param_baseline: ParamBaseline


def check_features(features: np.ndarray, mdp: Mdp | None = None) -> np.ndarray:
    if features.ndim != 3:
        raise DimensionMismatchError(f"features must be (S, A, k), got shape {features.shape}")
    if mdp is not None and features.shape[:2] != (mdp.num_states, mdp.num_actions):
        raise DimensionMismatchError(
            f"features shape {features.shape} does not match MDP ({mdp.num_states}, {mdp.num_actions})"
        )
    if not np.all(np.isfinite(features)):
        raise ValueError("features must be finite")
    return features


def _zero_terminal_rows(mdp: Mdp, table: np.ndarray) -> np.ndarray:
    table[mdp.terminal] = 0.0
    return table


def make_baseline(
    kind: str | Provenance,
    mdp: Mdp,
    policy: SoftmaxPolicy,
    exact: ExactSolution,
    constant: float | None = None,
    low: float = -10.0,
    high: float = 10.0,
    seed: int | None = None,
) -> Baseline:
    """Factory for the simple baseline families."""
    try:
        kind = Provenance(kind)
    except ValueError:
        logger.warning(f"Unknown baseline kind {kind!r}")
        raise UnknownBaselineError(f"unknown baseline kind {kind!r}") from None

    shape = (mdp.num_states, mdp.num_actions)
    match kind:
        case Provenance.ZERO:
            table = np.zeros(shape)
        case Provenance.STATE_VALUE:
            table = np.repeat(exact.v[:, None], mdp.num_actions, axis=1)
        case Provenance.CONSTANT:
            if constant is None:
                raise UnknownBaselineError("constant baseline needs a value")
            table = np.full(shape, float(constant))
        case Provenance.RANDOM_SEEDED:
            if seed is None:
                raise UnknownBaselineError("random baseline needs a seed")
            if not low <= high:
                raise ValueError(f"random baseline needs low <= high, got [{low}, {high}]")
            rng = np.random.default_rng(seed)
            table = rng.uniform(low, high, size=shape)
        case _:
            raise UnknownBaselineError(
                f"baseline kind {kind} is built by its own constructor, not make_baseline"
            )
    return Baseline(table=_zero_terminal_rows(mdp, table), provenance=kind)


def model_based_baseline(true_mdp: Mdp, approx_mdp: Mdp, policy: SoftmaxPolicy) -> Baseline:
    """b(s, a) = q(s, a) of the same policy evaluated on an approximate model."""
    if (approx_mdp.num_states, approx_mdp.num_actions) != (
        true_mdp.num_states,
        true_mdp.num_actions,
    ) or not np.array_equal(approx_mdp.terminal, true_mdp.terminal):
        logger.warning(f"Approximate model {approx_mdp} does not match {true_mdp}")
        raise DimensionMismatchError(
            "approximate model must have the same states, actions and terminal set"
        )
    q = solve_values(approx_mdp, policy).q
    return Baseline(table=q, provenance=Provenance.MODEL_BASED)


def fit_param_baseline(
    mdp: Mdp, policy: SoftmaxPolicy, exact: ExactSolution, features: np.ndarray
) -> ParamBaseline:
    """Fit x so that b_x approximates q under the d(s) pi(s, a) weighting."""
    features = check_features(np.asarray(features, dtype=float), mdp)
    weights = exact.d[:, None] * policy.probabilities
    solution = min_norm_solve(
        weighted_gram(weights, features), weighted_moment(weights, features, exact.q)
    )
    logger.debug(f"Parameterized baseline: k={features.shape[2]}, rank={solution.rank}")
    return ParamBaseline(x=solution.x, features=features)


def joint_fit(
    mdp: Mdp, policy: SoftmaxPolicy, exact: ExactSolution, features: np.ndarray
) -> JointFit:
    """Fit q-hat = f_w + b_x to q in one least-squares problem over [psi; phi]."""
    features = check_features(np.asarray(features, dtype=float), mdp)
    combined = np.concatenate([policy.score_tensor, features], axis=2)
    weights = exact.d[:, None] * policy.probabilities
    solution = min_norm_solve(
        weighted_gram(weights, combined), weighted_moment(weights, combined, exact.q)
    )
    n = policy.n_theta
    w, x = solution.x[:n], solution.x[n:]
    logger.debug(f"Joint fit: n_theta={n}, k={features.shape[2]}, rank={solution.rank}")
    return JointFit(
        w=w,
        x=x,
        predicted=combined @ solution.x,
        rank=solution.rank,
        param_baseline=ParamBaseline(x=x, features=features),
    )


def one_hot_features(mdp: Mdp) -> np.ndarray:
    S, A = mdp.num_states, mdp.num_actions
    return np.eye(S * A).reshape(S, A, S * A)


def state_indicator_features(mdp: Mdp) -> np.ndarray:
    S, A = mdp.num_states, mdp.num_actions
    return np.repeat(np.eye(S)[:, None, :], A, axis=1)


def random_features(mdp: Mdp, k: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.standard_normal((mdp.num_states, mdp.num_actions, k))
