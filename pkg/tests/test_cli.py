import contextlib
import io
import json
import os
import tempfile
import unittest
from unittest import mock

from cli import dispatch, main
from experiment_config import ExperimentConfig
from pipeline import OUTPUT_DIR_ENV, ExperimentPipeline


class DispatchTests(unittest.TestCase):

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = self._tmp.name
        self.messages = []
        self.statuses = []
        self.pipeline = ExperimentPipeline(self.messages.append, self.statuses.append)

    def tearDown(self):
        self._tmp.cleanup()

    def run_command(self, subcommand, raw, **flags):
        flags.setdefault("out", os.path.join(self.tmp, f"{subcommand}.{flags.get('format') or 'json'}"))
        with contextlib.redirect_stdout(io.StringIO()):
            code = dispatch(subcommand, ExperimentConfig.from_dict(raw), flags, pipeline=self.pipeline)
        return code, flags["out"]

    def read_json(self, path):
        with open(path, encoding="utf-8") as f:
            return json.load(f)

    def test_ber_without_signal(self):
        code, out = self.run_command("ber", {"qi": {"A": 1e6, "kappa_s": 0.2, "N_S": 0.0}})
        self.assertEqual(code, 0)
        report = self.read_json(out)
        self.assertEqual(report["p_eve"], 0.5)
        self.assertEqual(report["p_alice"], 0.5)
        self.assertEqual(self.statuses, ["Working...", "Done"])

    def test_eta_report(self):
        code, out = self.run_command("eta", {}, threshold=100.0)
        self.assertEqual(code, 0)
        report = self.read_json(out)
        self.assertAlmostEqual(report["ln_eta"], 20.0, delta=1e-9)
        self.assertTrue(report["advantage_holds"])
        self.assertEqual(report["threshold"], 100.0)
        self.assertEqual(set(report["params"]), {"W", "R", "kappa_s", "G_B", "N_S", "N_B", "A"})

    def test_encrypt_then_decrypt(self):
        raw = {
            "cipher": {"key_bits": 4, "taps": [4, 3]},
            "message": {"plaintext": "000000000000000", "key": "0001"},
        }
        code, out = self.run_command("encrypt", raw)
        self.assertEqual(code, 0)
        ciphertext = self.read_json(out)["ciphertext"]
        self.assertEqual(ciphertext, "000100110101111")

        raw["message"] = {"ciphertext": ciphertext, "key_hex": "1"}
        code, out = self.run_command("decrypt", raw)
        self.assertEqual(code, 0)
        self.assertEqual(self.read_json(out)["plaintext"], "0" * 15)

    def test_keygen_follows_seed(self):
        _, first = self.run_command("keygen", {}, seed=5, out=os.path.join(self.tmp, "a.json"))
        _, second = self.run_command("keygen", {}, seed=5, out=os.path.join(self.tmp, "b.json"))
        self.assertEqual(self.read_json(first), self.read_json(second))
        self.assertEqual(len(self.read_json(first)["key"]), 8)

    def test_simulate_is_byte_identical(self):
        raw = {"attack": {"trials": 5, "p_eve_sweep": [0.45, 0.5]}, "seed": 11}
        paths = []
        for name in ("one.json", "two.json"):
            code, out = self.run_command("simulate", raw, out=os.path.join(self.tmp, name))
            self.assertEqual(code, 0)
            paths.append(out)
        with open(paths[0], "rb") as a, open(paths[1], "rb") as b:
            self.assertEqual(a.read(), b.read())
        report = self.read_json(paths[0])
        self.assertEqual(report["trials"], 5)
        self.assertEqual(len(report["guessing_curve"]), 2)
        self.assertEqual(report["guessing_curve"][1]["pg_eve"], 2.0 ** -8)

    def test_simulate_csv_has_header(self):
        code, out = self.run_command("simulate", {"attack": {"trials": 3}}, format="csv")
        self.assertEqual(code, 0)
        with open(out, encoding="utf-8") as f:
            lines = f.read().splitlines()
        self.assertEqual(
            lines[0],
            "trial,pg_eve,pg_legit,eve_recovered,alice_recovered,flip_count_eve,flip_count_alice",
        )
        self.assertEqual(len(lines), 4)

    def test_attack_posterior_dump(self):
        raw = {"attack": {"p_alice": 0.0, "p_eve": 0.5}}
        code, out = self.run_command("attack", raw, format="csv")
        self.assertEqual(code, 0)
        with open(out, encoding="utf-8") as f:
            lines = f.read().splitlines()
        self.assertEqual(lines[0], "key_bits,posterior_eve,posterior_alice")
        self.assertEqual(len(lines), 1 + 256)
        self.assertEqual(lines[1].split(",")[1], repr(2.0 ** -8))

    def test_secrecy_on_one_time_pad(self):
        code, out = self.run_command("secrecy", {"cipher": {"key_bits": 4, "mode": "otp"}, "secrecy": {"trace_distance": 0.01}})
        self.assertEqual(code, 0)
        report = self.read_json(out)
        self.assertTrue(report["holds"])
        self.assertLessEqual(report["max_deviation"], 1e-12)
        self.assertAlmostEqual(report["qkd_guessing_bound"], 2.0 ** -4 + 0.01, places=15)

    def test_optimize_writes_one_row_per_point(self):
        raw = {"sweep": {"ranges": {"N_S": {"values": [0.002, 0.005, 0.01]}}}}
        code, out = self.run_command("optimize", raw, format="csv")
        self.assertEqual(code, 0)
        with open(out, encoding="utf-8") as f:
            self.assertEqual(len(f.read().splitlines()), 4)

    def test_infeasible_sweep_is_a_domain_error(self):
        raw = {
            "qi": {"A": 1.0, "kappa_s": 0.2, "N_S": 0.005},
            "sweep": {"ranges": {"N_S": {"values": [0.0, 0.001]}}},
        }
        code, _ = self.run_command("optimize", raw)
        self.assertEqual(code, 1)
        self.assertEqual(self.statuses[-1], "Error")

    def test_missing_message_is_a_config_error(self):
        code, _ = self.run_command("encrypt", {})
        self.assertEqual(code, 2)

    def test_unknown_subcommand(self):
        with contextlib.redirect_stderr(io.StringIO()) as err:
            code = dispatch("explode", ExperimentConfig.from_dict({}), {})
        self.assertEqual(code, 2)
        self.assertIn("usage", err.getvalue())

    def test_default_output_directory(self):
        with mock.patch.dict(os.environ, {OUTPUT_DIR_ENV: self.tmp}):
            with contextlib.redirect_stdout(io.StringIO()):
                code = dispatch("ber", ExperimentConfig.from_dict({}), {}, pipeline=self.pipeline)
        self.assertEqual(code, 0)
        self.assertTrue(os.path.exists(os.path.join(self.tmp, "ber.json")))

    def test_keygen_reports_register_period(self):
        weights = [0.0] * 16
        weights[1] = 1.0
        raw = {"cipher": {"key_bits": 4, "taps": [4, 3], "key_prior": weights}}
        code, out = self.run_command("keygen", raw)
        self.assertEqual(code, 0)
        report = self.read_json(out)
        self.assertEqual(report["key"], "0001")
        self.assertEqual(report["lfsr_period"], 15)

    def test_output_path_under_a_file_exits_one(self):
        blocker = os.path.join(self.tmp, "plain.txt")
        with open(blocker, "w", encoding="utf-8") as f:
            f.write("x")
        with self.assertLogs("qec", level="ERROR"):
            code, _ = self.run_command("ber", {}, out=os.path.join(blocker, "x", "ber.json"))
        self.assertEqual(code, 1)
        self.assertEqual(self.statuses[-1], "Error")

    def test_unusable_output_directory_exits_one(self):
        blocker = os.path.join(self.tmp, "plain.txt")
        with open(blocker, "w", encoding="utf-8") as f:
            f.write("x")
        with mock.patch.dict(os.environ, {OUTPUT_DIR_ENV: os.path.join(blocker, "reports")}):
            with contextlib.redirect_stdout(io.StringIO()), self.assertLogs("qec", level="ERROR"):
                code = dispatch("ber", ExperimentConfig.from_dict({}), {}, pipeline=self.pipeline)
        self.assertEqual(code, 1)


class MainTests(unittest.TestCase):

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = self._tmp.name

    def tearDown(self):
        self._tmp.cleanup()

    def test_invalid_config_exits_two(self):
        path = os.path.join(self.tmp, "bad.json")
        with open(path, "w", encoding="utf-8") as f:
            json.dump({"qi": {"A": 1e6, "kappa_s": 1.5, "N_S": 0.005}}, f)
        self.assertEqual(main(["ber", "--config", path]), 2)

    def test_numeric_key_hex_exits_two(self):
        path = os.path.join(self.tmp, "msg.json")
        with open(path, "w", encoding="utf-8") as f:
            json.dump({"message": {"plaintext": "0000", "key_hex": 11}}, f)
        self.assertEqual(main(["encrypt", "--config", path]), 2)

    def test_flags_reach_the_report(self):
        path = os.path.join(self.tmp, "exp.json")
        out = os.path.join(self.tmp, "keys", "key.json")
        with open(path, "w", encoding="utf-8") as f:
            json.dump({"cipher": {"key_bits": 12}}, f)
        with contextlib.redirect_stdout(io.StringIO()) as stdout:
            code = main(["keygen", "--config", path, "--seed", "3", "--out", out])
        self.assertEqual(code, 0)
        self.assertEqual(stdout.getvalue().strip(), out)
        with open(out, encoding="utf-8") as f:
            self.assertEqual(len(json.load(f)["key"]), 12)


if __name__ == "__main__":
    unittest.main()
