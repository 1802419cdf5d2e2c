from __future__ import annotations

import sys
from collections.abc import Callable
from typing import NamedTuple

import numpy as np
from sqlalchemy.exc import SQLAlchemyError

from baselines.baselines import Baseline
from cli.config import EstimatorChoice, RunConfig
from cli.inputs import resolve_baseline, resolve_mdps, resolve_policy
from cli.reports import SCHEMA_VERSION, Report, RunResult, Status, encode_json, render, write_output
from critic.compatible import (
    assemble_gradient_thm1,
    baseline_leakage,
    bias_probe,
    fit_critic,
)
from errors import (
    DimensionMismatchError,
    InputError,
    InvalidMdpError,
    PolicyError,
    SingularSystemError,
    UsageError,
)
from evaluation.exact import finite_difference_gradient, max_rel_err, solve_exact
from history.runs import record_run
from mdp.io import mdp_to_dict
from models import Command
from sampling.estimators import EstimatorKind, EstimatorSpec, variance_report
from util.fingerprint import text_digest
from util.logging import logger

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_INPUT = 2


class CommandResult(NamedTuple):
    exit_code: int
    report: Report | None = None
    # Raw document for commands whose output is not a report (gen-mdp)
    document: dict | None = None


def _is_fit_against_zero(baseline: Baseline) -> bool:
    return not np.any(baseline.table)


def cmd_verify_thm1(config: RunConfig) -> CommandResult:
    runs = []
    passed = True
    for run_id, mdp in resolve_mdps(config):
        policy = resolve_policy(config, mdp)
        exact = solve_exact(mdp, policy)
        baseline = resolve_baseline(config, mdp, policy, exact)
        fd = finite_difference_gradient(mdp, policy, config.fd_step)

        quantities = {"baseline": baseline.provenance, "rho": exact.rho}
        if config.naive:
            probe = bias_probe(mdp, policy, exact, baseline)
            candidate = probe.naive_gradient
            quantities["naive_gradient"] = candidate
            quantities["bias_norm"] = probe.bias_norm
            quantities["leakage"] = probe.leakage
        else:
            critic = fit_critic(mdp, policy, exact, baseline)
            candidate = assemble_gradient_thm1(mdp, policy, exact, critic, baseline)
            quantities["thm1_gradient"] = candidate
            quantities["critic_rank"] = critic.rank
            quantities["critic_normal_residual"] = critic.normal_residual

        identity_err = max_rel_err(candidate, exact.grad_rho)
        fd_err = max_rel_err(exact.grad_rho, fd)
        ok = identity_err <= config.tolerances.identity_rel and fd_err <= config.tolerances.fd_rel
        passed &= ok
        quantities |= {
            "exact_gradient": exact.grad_rho,
            "fd_gradient": fd,
            "identity_rel_err": identity_err,
            "fd_rel_err": fd_err,
            "max_rel_err": max(identity_err, fd_err),
            "pass": ok,
        }
        logger.info(
            f"verify-thm1 {run_id}: identity err={identity_err:.3g}, fd err={fd_err:.3g}, "
            f"{'pass' if ok else 'FAIL'}"
        )
        runs.append(RunResult(run_id, quantities))

    status = Status.PASS if passed else Status.FAIL
    return CommandResult(
        EXIT_PASS if passed else EXIT_FAIL,
        Report(Command.VERIFY_THM1, status, runs, config.describe()),
    )


def cmd_bias_probe(config: RunConfig) -> CommandResult:
    runs = []
    for run_id, mdp in resolve_mdps(config):
        policy = resolve_policy(config, mdp)
        exact = solve_exact(mdp, policy)
        baseline = resolve_baseline(config, mdp, policy, exact)
        probe = bias_probe(mdp, policy, exact, baseline)
        runs.append(
            RunResult(
                run_id,
                {
                    "baseline": baseline.provenance,
                    "naive_gradient": probe.naive_gradient,
                    "leakage": probe.leakage,
                    "true_gradient": probe.true_gradient,
                    "bias_norm": probe.bias_norm,
                    "leakage_norm": float(np.abs(probe.leakage).max(initial=0.0)),
                    "consistency_error": probe.consistency_error,
                },
            )
        )
    return CommandResult(EXIT_PASS, Report(Command.BIAS_PROBE, Status.MEASURED, runs, config.describe()))


def cmd_fit_critic(config: RunConfig) -> CommandResult:
    runs = []
    for run_id, mdp in resolve_mdps(config):
        policy = resolve_policy(config, mdp)
        exact = solve_exact(mdp, policy)
        baseline = resolve_baseline(config, mdp, policy, exact)
        critic = fit_critic(
            mdp, policy, exact, None if _is_fit_against_zero(baseline) else baseline
        )
        runs.append(
            RunResult(
                run_id,
                {
                    "baseline": baseline.provenance,
                    "target_kind": critic.target_kind,
                    "w": critic.w,
                    "fitted": critic.fitted,
                    "loss_value": critic.loss_value,
                    "rank": critic.rank,
                    "normal_residual": critic.normal_residual,
                    "leakage": baseline_leakage(mdp, policy, exact, baseline),
                },
            )
        )
    return CommandResult(EXIT_PASS, Report(Command.FIT_CRITIC, Status.MEASURED, runs, config.describe()))


def cmd_grad_check(config: RunConfig) -> CommandResult:
    runs = []
    passed = True
    for run_id, mdp in resolve_mdps(config):
        policy = resolve_policy(config, mdp)
        exact = solve_exact(mdp, policy)
        fd = finite_difference_gradient(mdp, policy, config.fd_step)
        err = max_rel_err(exact.grad_rho, fd)
        ok = err <= config.tolerances.fd_rel
        passed &= ok
        logger.info(f"grad-check {run_id}: max_rel_err={err:.3g}")
        runs.append(
            RunResult(
                run_id,
                {
                    "rho": exact.rho,
                    "exact_gradient": exact.grad_rho,
                    "fd_gradient": fd,
                    "max_rel_err": err,
                    "pass": ok,
                },
            )
        )
    return CommandResult(
        EXIT_PASS if passed else EXIT_FAIL,
        Report(Command.GRAD_CHECK, Status.PASS if passed else Status.FAIL, runs, config.describe()),
    )


def _estimator_specs(config, mdp, policy, exact) -> list[EstimatorSpec]:
    specs = []
    if config.estimator in (EstimatorChoice.ALL, EstimatorChoice.REINFORCE):
        specs.append(EstimatorSpec(EstimatorKind.REINFORCE, label="reinforce"))
    if config.estimator in (EstimatorChoice.ALL, EstimatorChoice.REINFORCE_STATE):
        specs.append(
            EstimatorSpec(
                EstimatorKind.REINFORCE_STATE_BASELINE,
                label="reinforce_state_value",
                state_baseline=exact.v,
            )
        )
    if config.estimator in (EstimatorChoice.ALL, EstimatorChoice.THM1):
        baseline = resolve_baseline(config, mdp, policy, exact)
        specs.append(
            EstimatorSpec(
                EstimatorKind.THM1_CRITIC,
                label=f"thm1_critic_{baseline.provenance}",
                critic=fit_critic(mdp, policy, exact, baseline),
                baseline=baseline,
            )
        )
    return specs


def cmd_sample_grad(config: RunConfig) -> CommandResult:
    runs = []
    for run_id, mdp in resolve_mdps(config):
        policy = resolve_policy(config, mdp)
        exact = solve_exact(mdp, policy)
        specs = _estimator_specs(config, mdp, policy, exact)
        report = variance_report(mdp, policy, specs, config.episodes, config.seed)
        quantities = {"exact_gradient": exact.grad_rho, "rho": exact.rho}
        for row in report.rows:
            est = row.estimate
            se = est.standard_error
            error = np.abs(est.mean - exact.grad_rho)
            z = np.divide(error, se, out=np.where(error > 0, np.inf, 0.0), where=se > 0)
            quantities[row.label] = {
                "mean": est.mean,
                "per_coordinate_variance": est.per_coordinate_variance,
                "standard_error": se,
                "covariance_trace": est.covariance_trace,
                "max_abs_z": float(z.max(initial=0.0)),
                "truncated_episodes": est.truncated_episodes,
            }
        runs.append(RunResult(run_id, quantities))
    return CommandResult(EXIT_PASS, Report(Command.SAMPLE_GRAD, Status.MEASURED, runs, config.describe()))


def cmd_gen_mdp(config: RunConfig) -> CommandResult:
    ((_, mdp),) = resolve_mdps(config)
    return CommandResult(EXIT_PASS, document=mdp_to_dict(mdp))


COMMANDS: dict[Command, Callable[[RunConfig], CommandResult]] = {
    Command.VERIFY_THM1: cmd_verify_thm1,
    Command.BIAS_PROBE: cmd_bias_probe,
    Command.FIT_CRITIC: cmd_fit_critic,
    Command.GRAD_CHECK: cmd_grad_check,
    Command.SAMPLE_GRAD: cmd_sample_grad,
    Command.GEN_MDP: cmd_gen_mdp,
}


def run_command(config: RunConfig) -> int:
    """Run one verb, write its output once, record it, and return the exit code."""
    logger.info(f"Running {config.command.value}")
    try:
        result = COMMANDS[config.command](config)
    except (
        InputError,
        UsageError,
        InvalidMdpError,
        DimensionMismatchError,
        PolicyError,
        SingularSystemError,
    ) as e:
        logger.error(f"{config.command.value} rejected its input: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT

    if result.document is not None:
        text = encode_json(result.document) + "\n"
    else:
        text = render(result.report, config.format)
    try:
        write_output(text, config.output)
    except OSError as e:
        logger.error(f"Cannot write {config.command.value} output: {e}")
        print(f"error: cannot write output: {e}", file=sys.stderr)
        return EXIT_INPUT

    # Recording never changes the exit code
    try:
        record_run(
            config.command,
            text_digest(encode_json(config.describe())),
            text_digest(text),
            result.exit_code,
            SCHEMA_VERSION,
        )
    except (SQLAlchemyError, OSError) as e:
        logger.warning(f"Run history unavailable, {config.command.value} not recorded: {e}")
    return result.exit_code
