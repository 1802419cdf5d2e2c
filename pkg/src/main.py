import argparse
import sys
import tomllib
from pathlib import Path

from dotenv import load_dotenv

from cli.commands import run_command
from cli.config import EstimatorChoice, OutputFormat, build_config
from errors import UsageError
from models import Command
from util.healthcheck import healthcheck
from util.logging import logger

LAB_COMMANDS = [c.value for c in Command]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Compatible PG Lab - exact and sampled policy gradients on tabular MDPs"
    )
    parser.add_argument(
        "command",
        choices=[*LAB_COMMANDS, "healthcheck", "version", "help"],
        help="Command to run (e.g., verify-thm1)",
    )
    parser.add_argument("--mdp", help="Path to an MDP JSON file")
    parser.add_argument(
        "--generate",
        help="Generate the MDP: 'states,actions,gamma,seed' or 'bandit[:gamma]'",
    )
    parser.add_argument(
        "--theta",
        default="zeros",
        help="zeros | random:scale:seed | path to a JSON file with a 'theta' key",
    )
    parser.add_argument(
        "--baseline",
        default="zero",
        help="zero | state-value | constant:c | random:lo:hi:seed | model:path | param:path | file:path",
    )
    parser.add_argument("--episodes", type=int, default=None, help="Monte Carlo episodes")
    parser.add_argument("--seed", type=int, default=0, help="Root seed for sampling")
    parser.add_argument("--tol-identity", type=float, default=1e-8)
    parser.add_argument("--tol-fd", type=float, default=1e-5)
    parser.add_argument("--fd-step", type=float, default=1e-5)
    parser.add_argument("--out", help="Write the report here instead of stdout")
    parser.add_argument(
        "--format", default=OutputFormat.JSON.value, choices=[f.value for f in OutputFormat]
    )
    parser.add_argument(
        "--naive",
        action="store_true",
        help="verify-thm1: check the naive baseline-subtracted gradient instead",
    )
    parser.add_argument(
        "--ensemble", type=int, default=1, help="Number of consecutive generator seeds"
    )
    parser.add_argument(
        "--estimator",
        default=EstimatorChoice.ALL.value,
        choices=[e.value for e in EstimatorChoice],
        help="sample-grad: estimator family to run",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == "healthcheck":
        return 0 if healthcheck() else 1
    if args.command == "version":
        print(f"Compatible PG Lab Version {get_version()}")
        return 0
    if args.command == "help":
        parser.print_help()
        return 0

    try:
        config = build_config(args)
    except UsageError as e:
        logger.warning(f"Bad usage: {e}")
        parser.error(str(e))
    return run_command(config)


def get_version():
    try:
        pyproject_path = Path(__file__).parent.parent / "pyproject.toml"
        with open(pyproject_path, "rb") as f:
            data = tomllib.load(f)
        return data["project"]["version"]
    except FileNotFoundError, KeyError:
        return "unknown"


if __name__ == "__main__":
    try:
        load_dotenv()
        exit(main(sys.argv[1:]))
    except KeyboardInterrupt:
        logger.info("Interrupted, no report written")
        exit(130)
