import argparse
import os
from unittest import TestCase
from unittest.mock import patch

from cli.config import (
    DEFAULT_EPISODES,
    EstimatorChoice,
    GeneratorKind,
    OutputFormat,
    ThetaSource,
    build_config,
    default_episodes,
    parse_baseline,
    parse_generate,
    parse_theta,
)
from errors import UsageError
from models import Command


def _args(**overrides) -> argparse.Namespace:
    values = {
        "command": "verify-thm1",
        "mdp": None,
        "generate": "5,3,0.9,7",
        "theta": "zeros",
        "baseline": "zero",
        "episodes": None,
        "seed": 0,
        "tol_identity": 1e-8,
        "tol_fd": 1e-5,
        "fd_step": 1e-5,
        "out": None,
        "format": "json",
        "naive": False,
        "ensemble": 1,
        "estimator": "all",
    }
    values.update(overrides)
    return argparse.Namespace(**values)


class TestParsers(TestCase):
    def test_parse_generate(self):
        spec = parse_generate("6,2,0.95,3")
        self.assertIs(spec.kind, GeneratorKind.RANDOM)
        self.assertEqual((spec.num_states, spec.num_actions, spec.gamma, spec.seed), (6, 2, 0.95, 3))

    def test_parse_generate_bandit(self):
        self.assertEqual(parse_generate("bandit").gamma, 1.0)
        spec = parse_generate("bandit:0.5")
        self.assertIs(spec.kind, GeneratorKind.BANDIT)
        self.assertEqual(spec.gamma, 0.5)

    def test_parse_generate_rejects_garbage(self):
        for text in ("5,3,0.9", "a,b,c,d", "bandit:x"):
            with self.assertRaises(UsageError):
                parse_generate(text)

    def test_parse_theta(self):
        self.assertIs(parse_theta("zeros").source, ThetaSource.ZEROS)
        spec = parse_theta("random:0.5:9")
        self.assertIs(spec.source, ThetaSource.SEEDED_RANDOM)
        self.assertEqual((spec.scale, spec.seed), (0.5, 9))
        self.assertEqual(parse_theta("theta.json").path, "theta.json")
        with self.assertRaises(UsageError):
            parse_theta("random:0.5")

    def test_parse_baseline(self):
        """Test every accepted --baseline form"""
        self.assertEqual(parse_baseline("zero").kind, "zero")
        self.assertEqual(parse_baseline("state-value").kind, "state-value")
        self.assertEqual(parse_baseline("constant:-2.5").constant, -2.5)
        spec = parse_baseline("random:-10:10:4")
        self.assertEqual((spec.low, spec.high, spec.seed), (-10.0, 10.0, 4))
        self.assertEqual(parse_baseline("model:approx.json").path, "approx.json")
        self.assertEqual(parse_baseline("param:features.json").kind, "param")
        self.assertEqual(parse_baseline("file:b.json").kind, "file")

    def test_parse_baseline_rejects_garbage(self):
        for text in ("oracle", "constant:x", "random:1:2", "model", "zero:1"):
            with self.assertRaises(UsageError):
                parse_baseline(text)


class TestBuildConfig(TestCase):
    def test_defaults(self):
        config = build_config(_args())
        self.assertIs(config.command, Command.VERIFY_THM1)
        self.assertEqual(config.episodes, DEFAULT_EPISODES)
        self.assertIs(config.format, OutputFormat.JSON)
        self.assertIs(config.estimator, EstimatorChoice.ALL)
        self.assertEqual(config.tolerances.identity_rel, 1e-8)

    def test_describe_is_plain_data(self):
        description = build_config(_args(out="report.json")).describe()
        self.assertEqual(description["command"], "verify-thm1")
        self.assertNotIn("output", description)
        self.assertEqual(description["generator"]["seed"], 7)

    def test_mdp_source_is_exclusive(self):
        """Test that exactly one of --mdp and --generate is required"""
        with self.assertRaises(UsageError):
            build_config(_args(mdp="mdp.json"))
        with self.assertRaises(UsageError):
            build_config(_args(generate=None))
        self.assertEqual(build_config(_args(mdp="mdp.json", generate=None)).mdp_path, "mdp.json")

    def test_gen_mdp_needs_generator_and_json(self):
        with self.assertRaises(UsageError):
            build_config(_args(command="gen-mdp", mdp="mdp.json", generate=None))
        with self.assertRaises(UsageError):
            build_config(_args(command="gen-mdp", format="csv"))

    def test_tolerances_must_be_positive(self):
        with self.assertRaises(UsageError):
            build_config(_args(tol_identity=0.0))
        with self.assertRaises(UsageError):
            build_config(_args(tol_fd=-1.0))

    def test_episodes(self):
        with self.assertRaises(UsageError):
            build_config(_args(episodes=0))
        self.assertEqual(build_config(_args(episodes=12)).episodes, 12)

    def test_episodes_default_from_env(self):
        with patch.dict(os.environ, {"LAB_DEFAULT_EPISODES": "250"}):
            self.assertEqual(default_episodes(), 250)
            self.assertEqual(build_config(_args()).episodes, 250)
        with patch.dict(os.environ, {"LAB_DEFAULT_EPISODES": "many"}):
            self.assertEqual(default_episodes(), DEFAULT_EPISODES)

    def test_ensemble_rules(self):
        """Test that ensembles need a random generator and an exact-check command"""
        self.assertEqual(build_config(_args(ensemble=4)).ensemble, 4)
        with self.assertRaises(UsageError):
            build_config(_args(ensemble=0))
        with self.assertRaises(UsageError):
            build_config(_args(ensemble=2, generate="bandit"))
        with self.assertRaises(UsageError):
            build_config(_args(ensemble=2, command="sample-grad"))

    def test_fd_step_range(self):
        with self.assertRaises(UsageError):
            build_config(_args(fd_step=0.0))
        with self.assertRaises(UsageError):
            build_config(_args(fd_step=0.5))
