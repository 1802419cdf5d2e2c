import json
import os
import tempfile
from unittest import TestCase

import numpy as np

from cli.reports import encode_json
from errors import InputError, InvalidMdpError
from mdp.core import make_random_mdp, make_two_arm_bandit
from mdp.io import load_mdp, mdp_from_dict, mdp_to_dict, read_json, table_from_document


class TestMdpIo(TestCase):
    def setUp(self):
        self.tmpdir = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmpdir.cleanup()

    def _write(self, name: str, text: str) -> str:
        path = os.path.join(self.tmpdir.name, name)
        with open(path, "w") as f:
            f.write(text)
        return path

    def test_written_mdp_loads_identically(self):
        """Test that an MDP written with 17 significant digits loads bit-for-bit"""
        mdp = make_random_mdp(5, 3, 0.9, 8)
        path = self._write("mdp.json", encode_json(mdp_to_dict(mdp)))
        loaded = load_mdp(path)
        self.assertEqual(loaded.fingerprint, mdp.fingerprint)

    def test_malformed_json_reports_position(self):
        """Test that a syntax error names the line and column"""
        path = self._write("bad.json", '{\n  "gamma": 0.9,\n  oops\n}')
        with self.assertRaises(InputError) as cm:
            read_json(path)
        self.assertIn("line 3", str(cm.exception))

    def test_missing_file(self):
        with self.assertRaises(InputError):
            read_json(os.path.join(self.tmpdir.name, "absent.json"))

    def test_top_level_must_be_object(self):
        path = self._write("list.json", "[1, 2]")
        with self.assertRaises(InputError):
            read_json(path)

    def test_missing_keys(self):
        """Test that missing MDP keys are listed"""
        document = mdp_to_dict(make_two_arm_bandit())
        del document["reward"]
        with self.assertRaises(InputError) as cm:
            mdp_from_dict(document)
        self.assertIn("reward", str(cm.exception))

    def test_ragged_table(self):
        document = mdp_to_dict(make_two_arm_bandit())
        document["reward"] = [[1.0, 0.0], [0.0]]
        with self.assertRaises(InputError):
            mdp_from_dict(document)

    def test_declared_sizes_must_agree(self):
        document = mdp_to_dict(make_two_arm_bandit())
        document["num_actions"] = 3
        with self.assertRaises(InputError):
            mdp_from_dict(document)

    def test_invalid_mdp_is_rejected(self):
        """Test that loading validates the MDP"""
        document = mdp_to_dict(make_two_arm_bandit())
        document["transition"][0][0] = [0.2, 0.2]
        path = self._write("invalid.json", json.dumps(document))
        with self.assertRaises(InvalidMdpError):
            load_mdp(path)

    def test_table_from_document(self):
        table = table_from_document({"baseline": [[1, 2], [3, 4]]}, "baseline", 2)
        np.testing.assert_array_equal(table, [[1.0, 2.0], [3.0, 4.0]])
        with self.assertRaises(InputError):
            table_from_document({"baseline": [1, 2]}, "baseline", 2)
        with self.assertRaises(InputError):
            table_from_document({}, "baseline", 2)

    def test_counts_must_be_integers(self):
        """Test that a fractional or boolean state count is rejected, not truncated"""
        for value in (2.7, True, "2"):
            document = mdp_to_dict(make_two_arm_bandit())
            document["num_states"] = value
            with self.assertRaises(InputError):
                mdp_from_dict(document)

    def test_terminal_flags_must_be_booleans(self):
        for value in (["false", "true"], [0, 1], "true"):
            document = mdp_to_dict(make_two_arm_bandit())
            document["terminal"] = value
            with self.assertRaises(InputError) as cm:
                mdp_from_dict(document)
            self.assertIn("terminal", str(cm.exception))

    def test_gamma_must_be_a_number(self):
        document = mdp_to_dict(make_two_arm_bandit())
        document["gamma"] = "0.9"
        with self.assertRaises(InputError):
            mdp_from_dict(document)
