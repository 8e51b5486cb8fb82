"""Pipeline orchestration: one subcommand, one experiment, one report file."""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import numpy as np

from cipher_core import (
    MODE_LFSR,
    BitSequence,
    SecretKey,
    decrypt,
    encrypt,
    expand_keystream,
    generate_key,
    lfsr_period,
)
from errors import ConfigurationError
from experiment_config import ExperimentConfig
from protocol_sim import (
    SessionConfig,
    advantage_holds,
    attack_session,
    guessing_curve,
    measure_advantage,
    run_session,
)
from quantum_channel import (
    QIGrid,
    alice_error_probability,
    check_modes_per_bit,
    error_ratio,
    eve_error_probability,
    optimize_eta,
    sweep_eta,
)
from report_writer import render_csv, render_json, write_report
from security_metrics import (
    MessagePrior,
    average_guessing_probability,
    prior_guessing_probability,
    qkd_guessing_bound,
    trace_distance_to_uniform,
    verify_perfect_secrecy,
)

LogCallback = Callable[[str], None]
StatusCallback = Callable[[str], None]

OUTPUT_DIR_ENV = "QEC_OUTPUT_DIR"
# lfsr_period walks the whole cycle; keygen only reports it for small registers
PERIOD_REPORT_KEY_BITS = 16
SUBCOMMANDS = (
    "keygen",
    "encrypt",
    "decrypt",
    "ber",
    "eta",
    "optimize",
    "attack",
    "simulate",
    "secrecy",
)


@dataclass
class PipelineResult:
    """Container for the report produced by one subcommand."""

    subcommand: str
    payload: dict
    rows: Optional[List[dict]]
    output_path: str
    output_format: str


class ExperimentPipeline:
    """Maps subcommands onto module operations and writes their reports."""

    def __init__(
        self,
        log_callback: LogCallback,
        status_callback: StatusCallback,
        output_dir_factory: Optional[Callable[[], str]] = None,
    ):
        self.log_callback = log_callback
        self.status_callback = status_callback
        self.output_dir_factory = output_dir_factory or self._default_output_dir
        self._handlers: Dict[str, Callable[[ExperimentConfig], tuple]] = {
            "keygen": self._keygen,
            "encrypt": self._encrypt,
            "decrypt": self._decrypt,
            "ber": self._ber,
            "eta": self._eta,
            "optimize": self._optimize,
            "attack": self._attack,
            "simulate": self._simulate,
            "secrecy": self._secrecy,
        }

    def process(self, subcommand: str, config: ExperimentConfig) -> PipelineResult:
        handler = self._handlers.get(subcommand)
        if handler is None:
            raise ConfigurationError(f"unknown subcommand {subcommand!r}")

        self._set_status("Working...")
        self._log(f"Running '{subcommand}' with seed {config.seed}")
        try:
            payload, rows = handler(config)
            fmt = config.output.format
            path = config.output.path or os.path.join(
                self.output_dir_factory(), f"{subcommand}.{fmt}"
            )
            if fmt == "csv":
                text = render_csv(rows if rows is not None else [_flatten(payload)])
            else:
                text = render_json(payload)
            write_report(path, text)
            self._log(f"Wrote {fmt} report to: {path}")
            self._set_status("Done")
            return PipelineResult(subcommand, payload, rows, path, fmt)
        except Exception:
            self._set_status("Error")
            raise

    # ---------- cipher ----------

    def _keygen(self, config: ExperimentConfig):
        rng = np.random.default_rng(config.seed)
        key = generate_key(config.cipher.key_bits, config.cipher.prior(), rng)
        payload = {
            "key": key.to_string(),
            "key_hex": format(key.to_int(), "x"),
            "key_bits": key.key_bits,
        }
        if config.cipher.mode == MODE_LFSR:
            if not key.bits.bits.any():
                self._log("WARNING: drew the all-zero key, which is a degenerate LFSR seed")
            elif key.key_bits <= PERIOD_REPORT_KEY_BITS:
                spec = config.cipher.keystream_spec(key.key_bits)
                payload["lfsr_period"] = lfsr_period(key, spec)
        return payload, [payload]

    def _message_key(self, config: ExperimentConfig) -> SecretKey:
        message = config.message
        if message.key is not None:
            key = SecretKey.from_string(message.key)
        elif message.key_hex is not None:
            key = SecretKey.from_hex(message.key_hex, config.cipher.key_bits)
        else:
            raise ConfigurationError("message.key or message.key_hex is required")
        if key.key_bits != config.cipher.key_bits:
            raise ConfigurationError(
                f"message key has {key.key_bits} bits, cipher.key_bits is {config.cipher.key_bits}"
            )
        return key

    def _encrypt(self, config: ExperimentConfig):
        if config.message.plaintext is None:
            raise ConfigurationError("message.plaintext is required for encrypt")
        plaintext = BitSequence.from_string(config.message.plaintext)
        key = self._message_key(config)
        keystream = expand_keystream(key, config.cipher.keystream_spec(plaintext.length))
        ciphertext = encrypt(plaintext, keystream)
        payload = {
            "plaintext": plaintext.to_string(),
            "ciphertext": ciphertext.to_string(),
            "keystream": keystream[: plaintext.length].to_string(),
        }
        return payload, [payload]

    def _decrypt(self, config: ExperimentConfig):
        if config.message.ciphertext is None:
            raise ConfigurationError("message.ciphertext is required for decrypt")
        ciphertext = BitSequence.from_string(config.message.ciphertext)
        key = self._message_key(config)
        keystream = expand_keystream(key, config.cipher.keystream_spec(ciphertext.length))
        plaintext = decrypt(ciphertext, keystream)
        payload = {
            "ciphertext": ciphertext.to_string(),
            "plaintext": plaintext.to_string(),
            "keystream": keystream[: ciphertext.length].to_string(),
        }
        return payload, [payload]

    # ---------- physical layer ----------

    def _ber(self, config: ExperimentConfig):
        params = config.qi.params()
        check_modes_per_bit(params, log_callback=self.log_callback)
        payload = {
            "p_eve": eve_error_probability(params),
            "p_alice": alice_error_probability(params),
            "params": params.to_dict(),
        }
        return payload, [_flatten(payload)]

    def _eta(self, config: ExperimentConfig):
        params = config.qi.params()
        check_modes_per_bit(params, log_callback=self.log_callback)
        report = error_ratio(params)
        threshold = config.attack.threshold
        payload = report.to_dict()
        payload["threshold"] = threshold
        payload["advantage_holds"] = advantage_holds(params, threshold)
        return payload, [_flatten(payload)]

    def _optimize(self, config: ExperimentConfig):
        if not config.sweep.ranges:
            raise ConfigurationError("sweep.ranges is required for optimize")
        grid = QIGrid.from_dict(config.sweep.ranges, config.qi.params())
        constraint = config.sweep.constraint_p_alice_max
        points = sweep_eta(grid, constraint, log_callback=self.log_callback)
        best = optimize_eta(grid, constraint, log_callback=self.log_callback, points=points)
        payload = {
            "best": best.to_dict(),
            "grid_size": len(points),
            "feasible_points": sum(1 for p in points if p.feasible),
            "constraint_p_alice_max": constraint,
        }
        return payload, [p.to_row() for p in points]

    # ---------- protocol ----------

    def _session_config(self, config: ExperimentConfig) -> SessionConfig:
        attack = config.attack
        return SessionConfig(
            key_bits=config.cipher.key_bits,
            keystream_spec=config.cipher.keystream_spec(attack.plaintext_len),
            qi_params=config.qi.params(),
            plaintext_len=attack.plaintext_len,
            known_plaintext_len=attack.known_plaintext_len,
            master_seed=config.seed,
            paired_seeds=attack.paired_seeds,
            channel_override=attack.channel_override,
        )

    def _attack(self, config: ExperimentConfig):
        session = self._session_config(config)
        transcript = run_session(session)
        alice, eve = attack_session(session, transcript)
        self._log(
            f"Eve p_guess={eve.guess.p_guess:.6g} (recovered={eve.key_recovered}); "
            f"Alice p_guess={alice.guess.p_guess:.6g} (recovered={alice.key_recovered})"
        )
        payload = {
            "transcript": transcript.to_dict(),
            "alice": alice.to_dict(),
            "eve": eve.to_dict(),
        }
        rows = eve.posterior.to_rows("posterior_eve", label="key_bits")
        for row, p_alice in zip(rows, alice.posterior.probabilities()):
            row["posterior_alice"] = float(p_alice)
        return payload, rows

    def _simulate(self, config: ExperimentConfig):
        session = self._session_config(config)
        report = measure_advantage(session, config.attack.trials, log_callback=self.log_callback)
        payload = report.to_dict()
        if config.attack.p_eve_sweep:
            curve = guessing_curve(
                session, config.attack.p_eve_sweep, config.attack.trials, log_callback=self.log_callback
            )
            payload["guessing_curve"] = [r.to_dict() for r in curve]
        return payload, [r.to_row() for r in report.records]

    def _secrecy(self, config: ExperimentConfig):
        secrecy = config.secrecy
        bits = secrecy.message_bits
        if secrecy.message_prior is None:
            message_prior = MessagePrior.uniform(bits)
        else:
            message_prior = MessagePrior.from_weights(secrecy.message_prior)
        key_prior = config.cipher.prior()
        spec = config.cipher.keystream_spec(bits)

        report = verify_perfect_secrecy(message_prior, key_prior, spec, secrecy.tolerance)
        payload = report.to_dict()
        payload["message_bits"] = bits
        payload["average_guessing_probability"] = average_guessing_probability(
            message_prior, key_prior, spec
        )
        key_bits = config.cipher.key_bits
        payload["key_guessing_probability"] = prior_guessing_probability(key_prior, key_bits)
        payload["key_trace_distance_to_uniform"] = trace_distance_to_uniform(key_prior, key_bits)
        if secrecy.trace_distance is not None:
            payload["qkd_guessing_bound"] = qkd_guessing_bound(key_bits, secrecy.trace_distance)
        return payload, [payload]

    # ---------- plumbing ----------

    def _log(self, message: str):
        self.log_callback(message)

    def _set_status(self, message: str):
        self.status_callback(message)

    @staticmethod
    def _default_output_dir() -> str:
        base = os.environ.get(OUTPUT_DIR_ENV) or os.path.join(
            os.path.expanduser("~"), ".cache", "qec_sim"
        )
        try:
            os.makedirs(base, exist_ok=True)
        except OSError as e:
            raise RuntimeError(f"could not create output directory {base}: {e}") from e
        return base


def _flatten(payload: dict, prefix: str = "") -> dict:
    """Nested report dict as a single CSV row with dotted column names."""
    row = {}
    for key, value in payload.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            row.update(_flatten(value, prefix=f"{name}."))
        else:
            row[name] = value
    return row
