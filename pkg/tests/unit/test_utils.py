import json
import os
import sys
import tempfile
import unittest
from unittest.mock import patch

import numpy as np

# Add the project root to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..')))

from utils.error_handler import ErrorHandler, IncompatibleModelError, UsageError
from utils.rng import ROW_BLOCK, indexed_normal, stream_key
from utils.structured_logger import LogCategory, StructuredLogger, log_bound_report


class TestStreamKey(unittest.TestCase):

    def test_deterministic(self):
        self.assertEqual(stream_key(3, 17, 4), stream_key(3, 17, 4))

    def test_identifiers_separate_streams(self):
        keys = {stream_key(3, 17, 4), stream_key(3, 17, 5), stream_key(3, 11, 4), stream_key(4, 17, 4)}
        self.assertEqual(len(keys), 4)

    def test_fits_in_64_bits(self):
        for ids in [(0,), (1, 2), (-1, 7), (2 ** 70, 3)]:
            self.assertTrue(0 <= stream_key(*ids) < 2 ** 64)


class TestIndexedNormal(unittest.TestCase):

    def setUp(self):
        self.key = stream_key(5, 11, 0)

    def test_shape(self):
        self.assertEqual(indexed_normal(self.key, [0, 3, 200], (4, 2)).shape, (3, 4, 2))
        self.assertEqual(indexed_normal(self.key, [], (3,)).shape, (0, 3))

    def test_row_depends_only_on_key_and_index(self):
        full = indexed_normal(self.key, np.arange(300), (3,))
        chunks = [np.arange(0, 37), np.arange(37, 130), np.arange(130, 300)]
        np.testing.assert_array_equal(np.concatenate([indexed_normal(self.key, c, (3,)) for c in chunks]), full)
        order = np.array([299, 0, ROW_BLOCK, 5, ROW_BLOCK - 1])
        np.testing.assert_array_equal(indexed_normal(self.key, order, (3,)), full[order])

    def test_repeated_rows_match(self):
        draws = indexed_normal(self.key, [7, 7, 70], (2,))
        np.testing.assert_array_equal(draws[0], draws[1])
        self.assertFalse(np.array_equal(draws[0], draws[2]))

    def test_blocks_and_keys_differ(self):
        a = indexed_normal(self.key, np.arange(ROW_BLOCK), (2,))
        b = indexed_normal(self.key, np.arange(ROW_BLOCK, 2 * ROW_BLOCK), (2,))
        c = indexed_normal(stream_key(6, 11, 0), np.arange(ROW_BLOCK), (2,))
        self.assertFalse(np.array_equal(a, b))
        self.assertFalse(np.array_equal(a, c))

    def test_standard_normal_moments(self):
        draws = indexed_normal(self.key, np.arange(20000), (5,))
        self.assertLess(abs(draws.mean()), 0.02)
        self.assertLess(abs(draws.std() - 1.0), 0.02)
        corr = np.corrcoef(draws[:, 0], draws[:, 1])[0, 1]
        self.assertLess(abs(corr), 0.03)


class TestBoundReportLogging(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.logger = StructuredLogger("analysis_test", log_dir=self.tmp.name, enabled=True)

    def tearDown(self):
        for handler in self.logger.event_logger.handlers + self.logger.performance_logger.handlers:
            handler.close()
        self.tmp.cleanup()

    def events(self):
        with open(os.path.join(self.tmp.name, "events.log")) as f:
            return [json.loads(line) for line in f if line.strip()]

    def test_report_written_under_analysis(self):
        row = {"n": 4, "rho": 0.0, "v_lb": 0.2, "v_ub": 0.25, "empirical_var": 0.249, "pass": True}
        with patch("utils.structured_logger.get_structured_logger", return_value=self.logger):
            log_bound_report(**row)
        (entry,) = self.events()
        self.assertEqual(entry["category"], LogCategory.ANALYSIS.value)
        self.assertEqual(entry["event"], "bound_checked")
        self.assertEqual(entry["level"], "info")
        self.assertEqual(entry["details"], row)

    def test_failed_check_is_a_warning(self):
        with patch("utils.structured_logger.get_structured_logger", return_value=self.logger):
            log_bound_report(n=2, empirical_var=3.0, **{"pass": False})
        self.assertEqual(self.events()[0]["level"], "warning")


class TestErrorHandler(unittest.TestCase):

    def test_exit_codes(self):
        self.assertEqual(ErrorHandler.exit_code_for(UsageError("x")), 2)
        self.assertEqual(ErrorHandler.exit_code_for(FileNotFoundError("x")), 3)
        self.assertEqual(ErrorHandler.exit_code_for(IncompatibleModelError("x")), 4)
        self.assertEqual(ErrorHandler.exit_code_for(RuntimeError("x")), 1)

    def test_log_error_uses_exception_type(self):
        handler = ErrorHandler("test_handler")
        with patch.object(handler.logger, 'warning') as warning:
            error_id = handler.log_error(UsageError("bad flag"), context={"command": "plan"})
        message = warning.call_args.args[0]
        self.assertTrue(message.startswith(f"[{error_id}] USAGE ERROR (MEDIUM)"))
        self.assertIn("Context: command=plan", message)


if __name__ == '__main__':
    unittest.main()
