from contextlib import redirect_stderr
from contextlib import redirect_stdout
from ruinbounds.testing import RUINBOUNDS_FIXTURE

import csv
import io
import json
import math
import os
import shutil
import tempfile
import unittest

SMALL = """\
<experiment xmlns="urn:ruinbounds:experiment:1">
  <name>{name}</name>
  <process>{process}</process>
  <dimension>{dimension}</dimension>
  <k>{dimension}</k>
  <thresholds>{thresholds}</thresholds>
  <trend>{trend}</trend>
  <trend_coefficients><element>0.5</element></trend_coefficients>
  <axes>{axes}</axes>
  <u_values><element>1.0</element><element>1.5</element></u_values>
  <resolutions><element>16</element><element>32</element></resolutions>
  <n_paths>2000</n_paths>
  <seed>11</seed>
</experiment>
"""


class TestCommandLine(unittest.TestCase):
    layer = RUINBOUNDS_FIXTURE

    def setUp(self):
        self.directory = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.directory)

    def path(self, name):
        return os.path.join(self.directory, name)

    def write_config(
        self, name="small", process="bm", dimension=1, trend="linear", axes=1
    ):
        thresholds = "<element>1.0</element>" * dimension
        path = self.path(f"{name}.xml")
        with open(path, "w", encoding="utf-8") as stream:
            stream.write(
                SMALL.format(
                    name=name,
                    process=process,
                    dimension=dimension,
                    thresholds=thresholds,
                    trend=trend,
                    axes=axes,
                )
            )
        return path

    def run_main(self, *argv):
        from ruinbounds.cli import main

        out = io.StringIO()
        err = io.StringIO()
        with redirect_stdout(out), redirect_stderr(err):
            status = main(list(argv))
        return status, out.getvalue(), err.getvalue()

    def test_bound_text(self):
        from ruinbounds.config import shipped_configs

        status, out, _ = self.run_main("bound", str(shipped_configs()[0]))
        self.assertEqual(0, status)
        lines = out.splitlines()
        self.assertEqual("matrix-01-d1-k1-zero (bm)", lines[0])
        self.assertEqual("  K = 2.828427125 [theorem13, closed-form]", lines[1])
        self.assertIn("  K_orthant = 2", lines)

    def test_bound_records(self):
        status, out, _ = self.run_main(
            "bound", self.write_config(), "--format", "jsonl"
        )
        self.assertEqual(0, status)
        record = json.loads(out)
        self.assertEqual("theorem13", record["K_used"])
        self.assertAlmostEqual(2.0 * math.sqrt(2.0) * math.exp(0.25), record["K"])
        self.assertEqual(64, len(record["fingerprint"]))
        self.assertFalse(record["vacuous"])

    def test_configuration_errors(self):
        broken = self.path("broken.xml")
        with open(broken, "w", encoding="utf-8") as stream:
            stream.write('<experiment xmlns="urn:ruinbounds:experiment:1">\n<k>2')
        status, _, err = self.run_main("bound", broken)
        self.assertEqual(2, status)
        self.assertIn("ruinbounds bound: ", err)
        self.assertIn("broken.xml:", err)
        status, _, err = self.run_main("verify", self.path("missing.xml"))
        self.assertEqual(2, status)
        status, _, err = self.run_main("bound")
        self.assertEqual(2, status)
        self.assertIn("no configuration given", err)

    def test_usage_errors(self):
        with redirect_stderr(io.StringIO()):
            with self.assertRaises(SystemExit) as caught:
                self.run_main("sweep", self.write_config(), "--parameter", "seed")
        self.assertEqual(2, caught.exception.code)

    def test_verify(self):
        out = self.path("report.jsonl")
        status, _, _ = self.run_main("verify", self.write_config(), "--out", out)
        self.assertEqual(0, status)
        with open(out, encoding="utf-8") as stream:
            records = [json.loads(line) for line in stream]
        self.assertEqual([1.0, 1.5], [record["u"] for record in records])
        self.assertEqual([0, 1], [record["cell"] for record in records])
        self.assertTrue(all(record["status"] != "error" for record in records))
        with open(self.path("report.csv"), encoding="utf-8") as stream:
            rows = list(csv.DictReader(stream))
        self.assertEqual(2, len(rows))
        self.assertEqual("small", rows[0]["name"])

    def test_verify_independent_of_jobs(self):
        config = self.write_config()
        results = []
        for jobs in ("1", "2"):
            out = self.path(f"jobs-{jobs}.jsonl")
            self.run_main("verify", config, "--out", out, "--jobs", jobs, "--seed", "5")
            with open(out, encoding="utf-8") as stream:
                records = [json.loads(line) for line in stream]
            for record in records:
                del record["wall_time"]
            results.append(records)
        self.assertEqual(results[0], results[1])
        self.assertEqual(5, results[0][0]["seed"])

    def test_verify_appends(self):
        out = self.path("report.csv")
        config = self.write_config()
        for _ in range(2):
            self.run_main(
                "verify",
                config,
                "--out",
                out,
                "--format",
                "csv",
                "--paths",
                "100",
                "--resolution",
                "8",
            )
        with open(out, encoding="utf-8") as stream:
            lines = stream.read().splitlines()
        self.assertEqual(5, len(lines))
        self.assertTrue(lines[0].startswith("parameter,value,name"))

    def test_empty_sweep(self):
        from ruinbounds.reports import CSV_COLUMNS

        status, out, _ = self.run_main(
            "sweep", self.write_config(), "--parameter", "u"
        )
        self.assertEqual(0, status)
        self.assertEqual(",".join(CSV_COLUMNS), out.strip())

    def test_correlation_sweep(self):
        config = self.write_config(name="pair", dimension=2, trend="zero")
        out = self.path("sweep.csv")
        self.run_main(
            "sweep",
            config,
            "--parameter",
            "rho",
            "--values",
            "-0.5",
            "0.5",
            "--paths",
            "200",
            "--resolution",
            "8",
            "--out",
            out,
        )
        with open(out, encoding="utf-8") as stream:
            rows = list(csv.DictReader(stream))
        self.assertEqual(4, len(rows))
        for row in rows:
            self.assertEqual("rho", row["parameter"])
            rho = float(row["value"])
            expected = 0.25 + math.asin(rho) / (2.0 * math.pi)
            self.assertAlmostEqual(expected, float(row["epsilon"]), delta=1e-4)

    def test_simulate(self):
        from ruinbounds.processes import load_ensemble

        out = self.path("paths.ens")
        status, printed, _ = self.run_main(
            "simulate",
            self.write_config(),
            "--out",
            out,
            "--paths",
            "50",
            "--resolution",
            "8",
        )
        self.assertEqual(0, status)
        self.assertEqual(out, printed.strip())
        ensemble = load_ensemble(out)
        self.assertEqual((50, 9, 1), ensemble.paths.shape)
        self.assertEqual(11, ensemble.seed)

    def test_simulate_convolution(self):
        config = self.write_config(name="field", process="convolution", axes=2)
        status, _, err = self.run_main("simulate", config, "--out", self.path("x"))
        self.assertEqual(2, status)
        self.assertIn("cannot be dumped", err)


class TestExitStatus(unittest.TestCase):
    layer = RUINBOUNDS_FIXTURE

    def test_exit_status(self):
        from ruinbounds.cli import exit_status
        from ruinbounds.reports import ReportRow

        def rows(*statuses):
            return [ReportRow(u=1.0, status=status) for status in statuses]

        self.assertEqual(0, exit_status(rows("holds", "holds-within-ci", "vacuous")))
        self.assertEqual(1, exit_status(rows("holds", "violated", "error")))
        self.assertEqual(2, exit_status(rows("holds", "error")))
        self.assertEqual(0, exit_status([]))
