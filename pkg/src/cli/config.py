from __future__ import annotations

import argparse
import os
from dataclasses import asdict, dataclass, field
from enum import StrEnum
from pathlib import Path

from errors import UsageError
from models import Command

DEFAULT_EPISODES = 10_000


class OutputFormat(StrEnum):
    JSON = "json"
    CSV = "csv"


class ThetaSource(StrEnum):
    ZEROS = "zeros"
    SEEDED_RANDOM = "seeded_random"
    FILE = "file"


class GeneratorKind(StrEnum):
    RANDOM = "random"
    BANDIT = "bandit"


class EstimatorChoice(StrEnum):
    ALL = "all"
    REINFORCE = "reinforce"
    REINFORCE_STATE = "reinforce-state"
    THM1 = "thm1"


@dataclass(frozen=True)
class GeneratorSpec:
    kind: GeneratorKind
    num_states: int = 2
    num_actions: int = 2
    gamma: float = 1.0
    seed: int = 0


@dataclass(frozen=True)
class ThetaSpec:
    source: ThetaSource = ThetaSource.ZEROS
    scale: float = 0.0
    seed: int = 0
    path: str | None = None


@dataclass(frozen=True)
class BaselineSpec:
    kind: str = "zero"
    constant: float | None = None
    low: float = -10.0
    high: float = 10.0
    seed: int | None = None
    path: str | None = None


@dataclass(frozen=True)
class Tolerances:
    identity_rel: float = 1e-8
    fd_rel: float = 1e-5


@dataclass(frozen=True)
class RunConfig:
    command: Command
    mdp_path: str | None = None
    generator: GeneratorSpec | None = None
    theta: ThetaSpec = field(default_factory=ThetaSpec)
    baseline: BaselineSpec = field(default_factory=BaselineSpec)
    tolerances: Tolerances = field(default_factory=Tolerances)
    output: str | None = None
    format: OutputFormat = OutputFormat.JSON
    episodes: int = DEFAULT_EPISODES
    seed: int = 0
    naive: bool = False
    ensemble: int = 1
    estimator: EstimatorChoice = EstimatorChoice.ALL
    fd_step: float = 1e-5

    def describe(self) -> dict:
        """Plain-data view of the config (everything but the output path)."""
        data = asdict(self)
        data.pop("output")
        data["command"] = self.command.value
        return data


def _parts(text: str, expected: int, flag: str, form: str) -> list[str]:
    parts = text.split(":") if ":" in text else text.split(",")
    if len(parts) != expected:
        raise UsageError(f"{flag} expects {form}, got '{text}'")
    return parts


def parse_generate(text: str) -> GeneratorSpec:
    """``states,actions,gamma,seed`` or ``bandit[:gamma]``."""
    try:
        if text == "bandit":
            return GeneratorSpec(kind=GeneratorKind.BANDIT)
        if text.startswith("bandit:"):
            return GeneratorSpec(kind=GeneratorKind.BANDIT, gamma=float(text.split(":", 1)[1]))
        states, actions, gamma, seed = text.split(",")
        return GeneratorSpec(
            kind=GeneratorKind.RANDOM,
            num_states=int(states),
            num_actions=int(actions),
            gamma=float(gamma),
            seed=int(seed),
        )
    except ValueError as e:
        raise UsageError(
            f"--generate expects 'states,actions,gamma,seed' or 'bandit[:gamma]', got '{text}'"
        ) from e


def parse_theta(text: str) -> ThetaSpec:
    if text == "zeros":
        return ThetaSpec()
    if text.startswith("random:"):
        _, scale, seed = _parts(text, 3, "--theta", "random:scale:seed")
        try:
            return ThetaSpec(source=ThetaSource.SEEDED_RANDOM, scale=float(scale), seed=int(seed))
        except ValueError as e:
            raise UsageError(f"--theta random:scale:seed has a bad number: {e}") from e
    return ThetaSpec(source=ThetaSource.FILE, path=text)


def parse_baseline(text: str) -> BaselineSpec:
    kind, _, rest = text.partition(":")
    try:
        match kind:
            case "zero" | "state-value" if not rest:
                return BaselineSpec(kind=kind)
            case "constant":
                return BaselineSpec(kind=kind, constant=float(rest))
            case "random":
                low, high, seed = rest.split(":")
                return BaselineSpec(kind=kind, low=float(low), high=float(high), seed=int(seed))
            case "model" | "param" | "file" if rest:
                return BaselineSpec(kind=kind, path=rest)
    except ValueError as e:
        raise UsageError(f"--baseline '{text}': {e}") from e
    raise UsageError(
        f"--baseline expects zero|state-value|constant:c|random:lo:hi:seed|model:path|param:path|file:path, got '{text}'"
    )


def default_episodes() -> int:
    try:
        return int(os.getenv("LAB_DEFAULT_EPISODES", DEFAULT_EPISODES))
    except ValueError:
        return DEFAULT_EPISODES


def build_config(args: argparse.Namespace) -> RunConfig:
    """Turn parsed arguments into a validated RunConfig; raises UsageError."""
    command = Command(args.command)

    if args.mdp and args.generate:
        raise UsageError("use either --mdp or --generate, not both")
    if not args.mdp and not args.generate:
        raise UsageError("an MDP is required: pass --mdp <path> or --generate <spec>")
    generator = parse_generate(args.generate) if args.generate else None
    if command is Command.GEN_MDP and generator is None:
        raise UsageError("gen-mdp needs --generate")

    tolerances = Tolerances(identity_rel=args.tol_identity, fd_rel=args.tol_fd)
    if tolerances.identity_rel <= 0 or tolerances.fd_rel <= 0:
        raise UsageError("tolerances must be positive")

    episodes = args.episodes if args.episodes is not None else default_episodes()
    if episodes < 1:
        raise UsageError(f"--episodes must be at least 1, got {episodes}")

    if args.ensemble < 1:
        raise UsageError(f"--ensemble must be at least 1, got {args.ensemble}")
    if args.ensemble > 1:
        if generator is None or generator.kind is not GeneratorKind.RANDOM:
            raise UsageError("--ensemble needs a random --generate spec")
        if command not in (Command.GRAD_CHECK, Command.VERIFY_THM1):
            raise UsageError("--ensemble applies to grad-check and verify-thm1 only")

    output_format = OutputFormat(args.format)
    if command is Command.GEN_MDP and output_format is not OutputFormat.JSON:
        raise UsageError("gen-mdp writes JSON only")

    if not 0 < args.fd_step <= 1e-2:
        raise UsageError(f"--fd-step must lie in (0, 1e-2], got {args.fd_step}")

    return RunConfig(
        command=command,
        mdp_path=str(Path(args.mdp)) if args.mdp else None,
        generator=generator,
        theta=parse_theta(args.theta),
        baseline=parse_baseline(args.baseline),
        tolerances=tolerances,
        output=args.out,
        format=output_format,
        episodes=episodes,
        seed=args.seed,
        naive=args.naive,
        ensemble=args.ensemble,
        estimator=EstimatorChoice(args.estimator),
        fd_step=args.fd_step,
    )
