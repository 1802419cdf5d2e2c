import uuid
from unittest import TestCase
from unittest.mock import patch

from history.runs import latest_run, record_run
from models import Command, RunRecord


class TestRunHistory(TestCase):
    def setUp(self):
        # Unique digests keep tests independent on the shared session database
        self.config_digest = uuid.uuid4().hex

    def test_record_and_fetch(self):
        """Test that a recorded run is returned as the latest for its config"""
        record = record_run(Command.GRAD_CHECK, self.config_digest, "a" * 64, 0, 1)
        self.assertIsInstance(record, RunRecord)
        self.assertIsNotNone(record.id)
        latest = latest_run(self.config_digest)
        self.assertEqual(latest.id, record.id)
        self.assertEqual(latest.command, Command.GRAD_CHECK)
        self.assertEqual(latest.exit_code, 0)

    def test_latest_wins(self):
        record_run(Command.GRAD_CHECK, self.config_digest, "a" * 64, 0, 1)
        second = record_run(Command.GRAD_CHECK, self.config_digest, "a" * 64, 1, 1)
        self.assertEqual(latest_run(self.config_digest).id, second.id)

    @patch("history.runs.logger")
    def test_changed_report_is_flagged(self, mock_logger):
        """Test that the same config producing a different report logs a warning"""
        record_run(Command.VERIFY_THM1, self.config_digest, "a" * 64, 0, 1)
        mock_logger.warning.assert_not_called()
        record_run(Command.VERIFY_THM1, self.config_digest, "b" * 64, 0, 1)
        mock_logger.warning.assert_called_once()

    @patch("history.runs.logger")
    def test_same_report_is_quiet(self, mock_logger):
        record_run(Command.VERIFY_THM1, self.config_digest, "c" * 64, 0, 1)
        record_run(Command.VERIFY_THM1, self.config_digest, "c" * 64, 0, 1)
        mock_logger.warning.assert_not_called()

    def test_unknown_config(self):
        self.assertIsNone(latest_run(uuid.uuid4().hex))

    @patch("history.runs.db.get_engine")
    def test_disabled_without_data_dir(self, mock_get_engine):
        """Test that history is skipped when no database is configured"""
        mock_get_engine.return_value = None
        self.assertIsNone(record_run(Command.GEN_MDP, self.config_digest, "d" * 64, 0, 1))
        self.assertIsNone(latest_run(self.config_digest))
