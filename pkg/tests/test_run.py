"""
Tests for main run.py module.
"""

import io
import json
import logging
import os
import shutil
import tempfile
import unittest
from pathlib import Path
from unittest.mock import Mock, patch

import run
from core.errors import NumericError
from core.output import strip_metadata


class TestRun(unittest.TestCase):
    """Test cases for the command line entry point."""

    def setUp(self):
        """Set up test fixtures."""
        self.temp_dir = tempfile.mkdtemp()
        home = patch("core.config.Path.home", return_value=Path(self.temp_dir))
        home.start()
        self.addCleanup(home.stop)
        environ = patch.dict(os.environ, {}, clear=True)
        environ.start()
        self.addCleanup(environ.stop)

    def tearDown(self):
        """Clean up test fixtures."""
        logging.getLogger().handlers.clear()
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def _run(self, *argv):
        with patch("sys.stdout", new_callable=io.StringIO) as stdout:
            with patch("sys.stderr", new_callable=io.StringIO):
                code = run.main(list(argv))
        return code, stdout.getvalue()

    def _run_json(self, *argv):
        code, text = self._run(*argv)
        self.assertEqual(code, run.EXIT_OK, text)
        return json.loads(text)

    def test_partitions(self):
        """Test J(4) with its coefficients."""
        document = self._run_json("partitions", "--r", "4")
        self.assertEqual(document["schema"], 1)
        self.assertEqual(document["command"], "partitions")
        items = document["data"]["partitions"]
        self.assertEqual([item["parts"] for item in items], [[2, 2], [4]])
        self.assertEqual([item["leading_coefficient"] for item in items], [3, 1])
        self.assertEqual(items[0]["coefficient"], "3n(n-1)")

    def test_partitions_with_n(self):
        """Test the evaluated coefficients at n = 10."""
        document = self._run_json("partitions", "--r", "4", "--n", "10")
        values = [item["value"] for item in document["data"]["partitions"]]
        self.assertEqual(values, [270, 10])

    def test_partitions_rejects_small_r(self):
        """Test that r = 1 is a usage error."""
        code, _ = self._run("partitions", "--r", "1")
        self.assertEqual(code, run.EXIT_USAGE)

    def test_missing_command(self):
        """Test that no subcommand is a usage error."""
        code, _ = self._run()
        self.assertEqual(code, run.EXIT_USAGE)

    def test_moment_exact(self):
        """Test E(Z_10^4) = 18/5 for exp1."""
        document = self._run_json(
            "moment", "--r", "4", "--n", "10", "--profile", "exp1"
        )
        self.assertEqual(document["data"]["exact"], "18/5")
        self.assertAlmostEqual(document["data"]["value"], 3.6)

    def test_moment_polynomial(self):
        """Test E(S^6) = 15n^3 + 130n^2 + 120n for exp1."""
        document = self._run_json("moment", "--r", "6", "--profile", "exp1")
        self.assertEqual(
            document["data"]["sigma_r_moment_S"], "15n^3 + 130n^2 + 120n"
        )

    def test_moment_inline_profile(self):
        """Test an inline standardized profile."""
        document = self._run_json(
            "moment", "--r", "4", "--n", "10", "--moments", "3=2,4=9"
        )
        self.assertEqual(document["data"]["exact"], "18/5")

    def test_moment_inline_profile_bad_order(self):
        """Test that a non-integer moment order is a usage error."""
        for moments in ("x=3", "3=2,4", "=9"):
            code, _ = self._run(
                "moment", "--r", "4", "--n", "10", "--moments", moments
            )
            self.assertEqual(code, run.EXIT_USAGE, moments)

    def test_moment_needs_a_profile(self):
        """Test that neither --profile nor --moments is a usage error."""
        code, _ = self._run("moment", "--r", "4", "--n", "10")
        self.assertEqual(code, run.EXIT_USAGE)

    def test_moment_beyond_profile_order(self):
        """Test that r above the carried order is a domain error."""
        code, _ = self._run("moment", "--r", "9", "--profile", "rademacher")
        self.assertEqual(code, run.EXIT_DOMAIN)

    def test_limits(self):
        """Test the even and odd constants for exp1 at k = 2."""
        document = self._run_json("limits", "--k", "2", "--profile", "exp1")
        (item,) = document["data"]["limits"]
        self.assertEqual(item["k"], 2)
        self.assertEqual(item["even_derived"], "6")
        self.assertEqual(item["odd"], "20")

    def test_rate_csv(self):
        """Test that n Delta_n(4) is exactly 6 on the whole grid."""
        code, text = self._run(
            "rate",
            "--r",
            "4",
            "--profile",
            "exp1",
            "--ngrid",
            "16:16384:x2",
            "--format",
            "csv",
        )
        self.assertEqual(code, run.EXIT_OK)
        lines = text.splitlines()
        self.assertEqual(lines[0], "# schema: 1")
        header = lines.index("n,delta,scaled,std_error")
        rows = [line.split(",") for line in lines[header + 1 :]]
        self.assertEqual(len(rows), 11)
        for row in rows:
            self.assertAlmostEqual(float(row[2]), 6.0, places=12)

    def test_rate_json_fit(self):
        """Test the slope -1 fit and the scaled limit report."""
        document = self._run_json(
            "rate", "--r", "4", "--profile", "exp1", "--ngrid", "16:16384:x2"
        )
        self.assertAlmostEqual(document["data"]["fit"]["slope"], -1.0, places=8)
        self.assertAlmostEqual(document["data"]["scaled_limit"]["target"], 6.0)

    def test_adversarial_prop1(self):
        """Test the prop1 value -4/3 at n = 16."""
        document = self._run_json(
            "adversarial", "--prop", "1", "--alpha", "sqrt", "--n", "16"
        )
        (row,) = document["data"]["rows"]
        self.assertEqual(row["n"], 16)
        self.assertAlmostEqual(row["value"], -4 / 3, places=10)

    def test_adversarial_n_and_grid(self):
        """Test that --n together with --ngrid is a usage error."""
        code, _ = self._run(
            "adversarial", "--prop", "1", "--n", "16", "--ngrid", "16:64:x2"
        )
        self.assertEqual(code, run.EXIT_USAGE)

    def test_design(self):
        """Test the canonical diagnostics at n = 10."""
        document = self._run_json("design", "--design", "canonical", "--n", "10")
        self.assertAlmostEqual(document["data"]["diagnostics"]["noether_max"], 0.1)
        self.assertEqual(document["data"]["limit_gram"], [[1.0]])

    def test_simulate_thread_independent(self):
        """Test identical numeric output for one and three threads."""
        argv = [
            "simulate",
            "--design",
            "canonical",
            "--n",
            "50",
            "--law",
            "exp1",
            "--r",
            "2,3",
            "--reps",
            "3000",
            "--seed",
            "3",
        ]
        code_one, one = self._run(*argv, "--threads", "1")
        code_three, three = self._run(*argv, "--threads", "3")
        self.assertEqual((code_one, code_three), (run.EXIT_OK, run.EXIT_OK))
        self.assertEqual(strip_metadata(one), strip_metadata(three))
        self.assertEqual(json.loads(three)["metadata"]["threads"], 3)

    def test_dump_config_round_trip(self):
        """Test that a dumped run config reproduces the run."""
        argv = ["moment", "--r", "4", "--n", "10", "--profile", "exp1"]
        code, dumped = self._run(*argv, "--dump-config")
        self.assertEqual(code, run.EXIT_OK)
        config = json.loads(dumped)
        self.assertEqual(config["command"], "moment")
        self.assertEqual(config["params"]["r"], 4)

        path = Path(self.temp_dir) / "run.json"
        path.write_text(dumped, encoding="utf-8")
        _, direct = self._run(*argv)
        _, replayed = self._run("--config", str(path))
        self.assertEqual(strip_metadata(direct), strip_metadata(replayed))

    def test_config_with_override(self):
        """Test that flags override values from the run config."""
        path = Path(self.temp_dir) / "run.json"
        path.write_text(
            json.dumps(
                {
                    "schema": 1,
                    "command": "moment",
                    "params": {"r": 4, "n": 10, "profile": "exp1"},
                }
            ),
            encoding="utf-8",
        )
        document = self._run_json("--config", str(path), "moment", "--n", "100")
        self.assertEqual(document["data"]["exact"], "153/50")

    def test_config_for_another_command(self):
        """Test that a run config for another subcommand is rejected."""
        path = Path(self.temp_dir) / "run.json"
        path.write_text(
            json.dumps({"schema": 1, "command": "moment", "params": {"r": 4}}),
            encoding="utf-8",
        )
        code, _ = self._run("--config", str(path), "partitions", "--r", "4")
        self.assertEqual(code, run.EXIT_USAGE)

    def test_output_file(self):
        """Test writing the document to --output."""
        target = Path(self.temp_dir) / "out" / "result.json"
        code, text = self._run(
            "partitions", "--r", "4", "--output", str(target)
        )
        self.assertEqual(code, run.EXIT_OK)
        self.assertEqual(text, "")
        self.assertEqual(json.loads(target.read_text())["command"], "partitions")

    def test_numeric_failure_exit_code(self):
        """Test that a NumericError maps to exit code 4."""
        failing = Mock(side_effect=NumericError("boom"))
        with patch.dict(run.COMMANDS, {"design": failing}):
            code, _ = self._run("design", "--design", "canonical", "--n", "10")
        self.assertEqual(code, run.EXIT_NUMERIC)
        failing.assert_called_once()


if __name__ == "__main__":
    unittest.main()
