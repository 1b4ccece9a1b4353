import contextlib
import csv
import io
import json
import math
import os
import tempfile
import unittest

from src.cli import commands
from src.core import database
from src import main

FLAT_LOOP_CONFIG = """\
surface: {kind: torus}
k: 0.5
solver: {nodes: 32}
path: {kind: straight, start: [0.0, 0.25], winding: [1, 0], T: 2.0}
"""


def _run(argv, conn=None):
    """Runs the CLI and returns (exit status, captured stdout)."""
    buffer = io.StringIO()
    with contextlib.redirect_stdout(buffer):
        code = commands.run(argv, conn)
    return code, buffer.getvalue()


class TestCommands(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.out = self.tmp.name

    def tearDown(self):
        self.tmp.cleanup()

    def _config(self, text: str) -> str:
        filename = os.path.join(self.out, "run.yaml")
        with open(filename, "w") as fh:
            fh.write(text)
        return filename

    def test_presets(self):
        code, output = _run(["presets"])
        self.assertEqual(code, commands.EXIT_OK)
        self.assertEqual(len(output.strip().splitlines()), 6, "Every preset is listed on its own line.")
        self.assertIn("torus-psi-cutoff", output)

    def test_main_presets_skips_store(self):
        buffer = io.StringIO()
        with contextlib.redirect_stdout(buffer):
            code = main.main(["presets"])
        self.assertEqual(code, 0)
        self.assertIn("sphere-standard-magnetic", buffer.getvalue())

    def test_action_eval(self):
        """The backwards loop y = 1/2 in the psi model has A_0.3 = 0.3 - 1/2."""
        code, output = _run(["action-eval", "--preset", "torus-psi-cutoff", "--k", "0.3", "--out", self.out])
        self.assertEqual(code, commands.EXIT_OK)
        self.assertIn("action = -0.2", output)
        with open(os.path.join(self.out, "summary.json")) as fh:
            summary = json.load(fh)
        self.assertEqual(summary["subcommand"], "action-eval")
        self.assertAlmostEqual(summary["results"]["action"], -0.2, places=9)
        self.assertTrue(os.path.exists(os.path.join(self.out, "action_eval_path.csv")))

    def test_malformed_config_exits_with_config_status(self):
        filename = self._config("surface: {kind: torus}\nk: 0.5\nbogus: 1\n")
        with self.assertLogs("src.cli.commands", level="ERROR") as logs:
            code, _ = _run(["action-eval", "--config", filename, "--out", self.out])
        self.assertEqual(code, commands.EXIT_CONFIG)
        self.assertTrue(any("line 3" in message for message in logs.output), logs.output)

    def test_missing_config_source(self):
        code, _ = _run(["minimize", "--out", self.out])
        self.assertEqual(code, commands.EXIT_CONFIG)

    def test_missing_level_is_a_config_error(self):
        filename = self._config("surface: {kind: torus}\npath: {kind: constant, point: [0.5, 0.5]}\n")
        code, _ = _run(["action-eval", "--config", filename, "--out", self.out])
        self.assertEqual(code, commands.EXIT_CONFIG)

    def test_shoot(self):
        code, output = _run(["shoot", "--preset", "torus-constant-B", "--out", self.out])
        self.assertEqual(code, commands.EXIT_OK)
        self.assertIn("closure", output)
        with open(os.path.join(self.out, "summary.json")) as fh:
            results = json.load(fh)["results"]
        self.assertLess(results["closure_residual"], 1e-6)

    def test_minimize_records_the_orbit(self):
        conn = database.init_db(":memory:")
        try:
            code, output = _run(["minimize", "--config", self._config(FLAT_LOOP_CONFIG), "--out", self.out], conn)
            self.assertEqual(code, commands.EXIT_OK)
            self.assertTrue(output.startswith("orbit"), output)
            runs = database.list_runs(conn)
            self.assertEqual(len(runs), 1)
            self.assertEqual(runs[0][1], "minimize")
            self.assertEqual(runs[0][3], "ok")
            orbits = database.get_orbits(conn, runs[0][0])
            self.assertEqual(orbits[0]["winding"], [1, 0])
            self.assertAlmostEqual(orbits[0]["T"], 1.0, places=4)
        finally:
            conn.close()

    def test_no_store(self):
        conn = database.init_db(":memory:")
        try:
            code, _ = _run(["action-eval", "--preset", "torus-psi-cutoff", "--out", self.out, "--no-store"], conn)
            self.assertEqual(code, commands.EXIT_OK)
            self.assertEqual(database.list_runs(conn), [], "--no-store leaves the report store untouched.")
        finally:
            conn.close()

    def test_taimanov(self):
        code, output = _run(["taimanov", "--preset", "torus-oscillating", "--grid", "32",
                             "--k-grid", "0.01:10:4", "--out", self.out])
        self.assertEqual(code, commands.EXIT_OK)
        self.assertIn("tau_+", output)
        self.assertTrue(os.path.exists(os.path.join(self.out, "taimanov_scan.csv")))

    def test_unparseable_flag_is_a_config_error(self):
        """A flag value argparse cannot convert exits with the config status, not the numerical one."""
        with contextlib.redirect_stderr(io.StringIO()):
            code, _ = _run(["action-eval", "--preset", "torus-psi-cutoff", "--k", "abc", "--out", self.out])
        self.assertEqual(code, commands.EXIT_CONFIG)

    def test_sweep_below_intersection_level(self):
        """Grid levels at or below k_Q are tabulated as invalid families."""
        code, output = _run(["sweep", "--preset", "mechanical-torus", "--k-grid=-1.5:-1.2:2", "--out", self.out])
        self.assertEqual(code, commands.EXIT_OK)
        self.assertIn("monotone: True", output)
        with open(os.path.join(self.out, "sweep.csv")) as fh:
            lines = fh.read().splitlines()
        self.assertEqual(lines[0], "k,c,T,alpha,status")
        self.assertEqual([line.rsplit(",", 1)[1] for line in lines[1:]], ["invalid-family", "invalid-family"])

    def test_mountain_pass_needs_a_family(self):
        code, _ = _run(["mountain-pass", "--preset", "torus-psi-cutoff", "--out", self.out])
        self.assertEqual(code, commands.EXIT_CONFIG)


@unittest.skipUnless(os.getenv("RUN_SLOW"), "set RUN_SLOW=1 to run the full subcommands")
class TestCommandsSlow(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.out = self.tmp.name

    def tearDown(self):
        self.tmp.cleanup()

    def _summary(self) -> dict:
        with open(os.path.join(self.out, "summary.json")) as fh:
            return json.load(fh)["results"]

    def test_mountain_pass_on_the_sphere(self):
        code, output = _run(["mountain-pass", "--preset", "sphere-standard-magnetic", "--rounds", "200",
                             "--out", self.out])
        self.assertEqual(code, commands.EXIT_OK)
        self.assertIn("candidate orbit", output)
        results = self._summary()
        self.assertAlmostEqual(results["c"], 2 * math.pi * (math.sqrt(2) - 1), delta=0.05)
        self.assertNotIn("alpha", results, "Sphere families have no alpha(k) bound.")

    def test_mechanical_sweep(self):
        code, _ = _run(["sweep", "--preset", "mechanical-torus", "--rounds", "150", "--out", self.out])
        self.assertEqual(code, commands.EXIT_OK)
        results = self._summary()
        self.assertTrue(results["monotone"])
        for k, c, T, alpha, status in results["rows"]:
            self.assertGreater(c, alpha, f"Row at k={k} does not clear alpha(k).")
            self.assertNotEqual(status, "below-alpha")

    def test_mane_on_the_half_plane(self):
        """The bracket file for theta = dx/y contains c = 1/2."""
        code, _ = _run(["mane", "--preset", "hyperbolic-horocycle", "--out", self.out])
        self.assertEqual(code, commands.EXIT_OK)
        with open(os.path.join(self.out, "mane_bracket.csv"), newline="") as fh:
            rows = {row["quantity"]: row for row in csv.DictReader(fh)}
        self.assertLessEqual(float(rows["c"]["lo"]), 0.5 + 1e-3)
        self.assertGreaterEqual(float(rows["c"]["hi"]), 0.5 - 1e-3)

    def test_chain_check_over_every_preset(self):
        code, output = _run(["chain-check", "--out", self.out])
        self.assertEqual(code, commands.EXIT_OK, output)
        self.assertNotIn("VIOLATED", output)
        self.assertEqual(len(self._summary()), 6)
        self.assertTrue(os.path.exists(os.path.join(self.out, "chain_check.csv")))


if __name__ == '__main__':
    unittest.main()
