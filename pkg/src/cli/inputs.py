from __future__ import annotations

from baselines.baselines import (
    Baseline,
    Provenance,
    fit_param_baseline,
    make_baseline,
    model_based_baseline,
)
from cli.config import GeneratorKind, RunConfig, ThetaSource
from errors import DimensionMismatchError, InputError, UsageError
from evaluation.exact import ExactSolution
from mdp.core import Mdp, make_random_mdp, make_two_arm_bandit
from mdp.io import load_mdp, read_json, table_from_document
from mdp.policy import SoftmaxPolicy, policy_from_theta, random_policy, zeros_policy
from util.logging import logger

_SIMPLE_KINDS = {
    "zero": Provenance.ZERO,
    "state-value": Provenance.STATE_VALUE,
    "constant": Provenance.CONSTANT,
    "random": Provenance.RANDOM_SEEDED,
}


def resolve_mdps(config: RunConfig) -> list[tuple[str, Mdp]]:
    """(run_id, Mdp) pairs for the configured input."""
    if config.mdp_path:
        return [("mdp", load_mdp(config.mdp_path))]

    spec = config.generator
    try:
        if spec.kind is GeneratorKind.BANDIT:
            return [("bandit", make_two_arm_bandit(spec.gamma))]
        return [
            (
                f"seed-{spec.seed + k}",
                make_random_mdp(spec.num_states, spec.num_actions, spec.gamma, spec.seed + k),
            )
            for k in range(config.ensemble)
        ]
    except ValueError as e:
        raise UsageError(f"--generate: {e}") from e


def resolve_policy(config: RunConfig, mdp: Mdp) -> SoftmaxPolicy:
    spec = config.theta
    try:
        match spec.source:
            case ThetaSource.ZEROS:
                return zeros_policy(mdp)
            case ThetaSource.SEEDED_RANDOM:
                return random_policy(mdp, spec.scale, spec.seed)
            case ThetaSource.FILE:
                document = read_json(spec.path)
                if "theta" not in document:
                    raise InputError(f"{spec.path}: missing key 'theta'")
                return policy_from_theta(mdp, document["theta"])
    except (InputError, UsageError):
        raise
    except (TypeError, ValueError) as e:
        raise InputError(f"theta: {e}") from e
    raise UsageError(f"unknown theta source {spec.source}")


def resolve_baseline(
    config: RunConfig, mdp: Mdp, policy: SoftmaxPolicy, exact: ExactSolution
) -> Baseline:
    spec = config.baseline
    try:
        if spec.kind in _SIMPLE_KINDS:
            return make_baseline(
                _SIMPLE_KINDS[spec.kind],
                mdp,
                policy,
                exact,
                constant=spec.constant,
                low=spec.low,
                high=spec.high,
                seed=spec.seed,
            )
        if spec.kind == "model":
            return model_based_baseline(mdp, load_mdp(spec.path), policy)
        document = read_json(spec.path)
        if spec.kind == "param":
            features = table_from_document(document, "features", 3, spec.path)
            return fit_param_baseline(mdp, policy, exact, features).to_baseline()
        if spec.kind == "file":
            table = table_from_document(document, "baseline", 2, spec.path)
            if table.shape != (mdp.num_states, mdp.num_actions):
                raise DimensionMismatchError(
                    f"baseline shape {table.shape} does not match MDP ({mdp.num_states}, {mdp.num_actions})"
                )
            return Baseline(table=table, provenance=Provenance.TABULATED)
    except (InputError, UsageError):
        raise
    except ValueError as e:
        logger.warning(f"Baseline {spec.kind} does not fit the MDP: {e}")
        raise InputError(f"baseline: {e}") from e
    raise UsageError(f"unknown baseline kind {spec.kind}")
