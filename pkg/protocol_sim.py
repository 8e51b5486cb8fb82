# protocol_sim.py
"""
End-to-end quantum enigma cipher sessions and the brute-force attack harness.

A session encrypts a plaintext with the keystream cipher, then hands the
ciphertext to two receivers: Alice (entanglement-assisted, error
probability from the Alice formula) and Eve (error probability from the Eve
formula). Each receiver then runs the same exhaustive key search against its
own noisy copy.

Random streams are derived from the master seed with
SeedSequence(master_seed, spawn_key=(trial, stream)); see `derive_rng`.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from cipher_core import (
    MODE_LFSR,
    BitSequence,
    KeyPrior,
    KeystreamSpec,
    SecretKey,
    check_enumerable,
    encrypt,
    expand_keystream,
    generate_key,
)
from errors import ConfigurationError, DomainError
from quantum_channel import (
    DEFAULT_ADVANTAGE_THRESHOLD,
    ChannelObservation,
    QIParams,
    Receiver,
    alice_error_probability,
    error_ratio,
    eve_error_probability,
    transmit_bsc,
)
from security_metrics import (
    GuessReport,
    PosteriorTable,
    guess_from_posterior,
    posterior_over_keys,
)

LogCallback = Callable[[str], None]

STREAM_KEY = 0
STREAM_PLAINTEXT = 1
STREAM_ALICE = 2
STREAM_EVE = 3


def _log(log_callback: Optional[LogCallback], message: str):
    if log_callback is not None:
        log_callback(message)


def derive_rng(master_seed: int, trial: int, stream: int) -> np.random.Generator:
    """Independent generator for (trial, stream), reproducible from master_seed."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(trial, stream)))


@dataclass
class SessionConfig:
    key_bits: int
    keystream_spec: KeystreamSpec
    qi_params: QIParams
    plaintext_len: int
    known_plaintext_len: int
    master_seed: int = 0
    plaintext: Optional[BitSequence] = None
    paired_seeds: bool = False
    # (p_alice, p_eve) used instead of the closed forms
    channel_override: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        problems = []
        if self.key_bits < 1:
            problems.append(f"key_bits must be >= 1, got {self.key_bits}")
        if self.plaintext_len < 1:
            problems.append(f"plaintext_len must be >= 1, got {self.plaintext_len}")
        if not 0 <= self.known_plaintext_len <= self.plaintext_len:
            problems.append(
                f"known_plaintext_len must lie in [0, plaintext_len={self.plaintext_len}], "
                f"got {self.known_plaintext_len}"
            )
        if self.keystream_spec.output_len < self.plaintext_len:
            problems.append(
                f"keystream output_len {self.keystream_spec.output_len} is shorter than "
                f"plaintext_len {self.plaintext_len}"
            )
        if self.plaintext is not None and self.plaintext.length != self.plaintext_len:
            problems.append(
                f"fixed plaintext has {self.plaintext.length} bits, plaintext_len is {self.plaintext_len}"
            )
        if self.channel_override is not None:
            for name, p in zip(("p_alice", "p_eve"), self.channel_override):
                if not 0.0 <= p <= 0.5:
                    problems.append(f"channel_override {name} must lie in [0, 0.5], got {p}")
        if problems:
            raise ConfigurationError("; ".join(problems))
        self.keystream_spec.validate_for(self.key_bits)

    def error_probabilities(self) -> Tuple[float, float]:
        """(p_alice, p_eve) for this session."""
        if self.channel_override is not None:
            return self.channel_override
        return alice_error_probability(self.qi_params), eve_error_probability(self.qi_params)


@dataclass
class SessionTranscript:
    true_key: SecretKey
    plaintext: BitSequence
    ciphertext: BitSequence
    alice_obs: ChannelObservation
    eve_obs: ChannelObservation
    p_alice: float
    p_eve: float
    trial: int = 0
    # what an ideal receiver with a noiseless channel would hold
    reference_obs: Optional[ChannelObservation] = None

    def to_dict(self) -> dict:
        out = {
            "trial": self.trial,
            "true_key": self.true_key.to_string(),
            "plaintext": self.plaintext.to_string(),
            "ciphertext": self.ciphertext.to_string(),
            "alice_obs": self.alice_obs.to_dict(),
            "eve_obs": self.eve_obs.to_dict(),
            "p_alice": self.p_alice,
            "p_eve": self.p_eve,
        }
        if self.reference_obs is not None:
            out["bob_ideal_obs"] = self.reference_obs.to_dict()
        return out


@dataclass
class AttackReport:
    attacker: Receiver
    guess: GuessReport
    key_recovered: bool
    posterior_entropy_bits: float
    trials_context: Dict[str, int] = field(default_factory=dict)
    posterior: Optional[PosteriorTable] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "attacker": self.attacker.value,
            "guess": self.guess.to_dict(),
            "key_recovered": self.key_recovered,
            "posterior_entropy_bits": self.posterior_entropy_bits,
            "trials_context": dict(self.trials_context),
        }


@dataclass
class TrialRecord:
    trial: int
    pg_eve: float
    pg_legit: float
    eve_recovered: bool
    alice_recovered: bool
    flip_count_eve: int
    flip_count_alice: int

    def to_row(self) -> dict:
        return {
            "trial": self.trial,
            "pg_eve": self.pg_eve,
            "pg_legit": self.pg_legit,
            "eve_recovered": int(self.eve_recovered),
            "alice_recovered": int(self.alice_recovered),
            "flip_count_eve": self.flip_count_eve,
            "flip_count_alice": self.flip_count_alice,
        }


@dataclass
class AdvantageReport:
    pg_eve: float
    pg_legit: float
    eta_ideal_empirical: float
    eta_ideal_target: float
    eve_recovery_rate: float
    alice_recovery_rate: float
    pg_eve_stderr: float
    pg_legit_stderr: float
    p_alice: float
    p_eve: float
    trials: int
    records: List[TrialRecord] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "pg_eve": self.pg_eve,
            "pg_legit": self.pg_legit,
            "eta_ideal_empirical": self.eta_ideal_empirical,
            "eta_ideal_target": self.eta_ideal_target,
            "eve_recovery_rate": self.eve_recovery_rate,
            "alice_recovery_rate": self.alice_recovery_rate,
            "pg_eve_stderr": self.pg_eve_stderr,
            "pg_legit_stderr": self.pg_legit_stderr,
            "p_alice": self.p_alice,
            "p_eve": self.p_eve,
            "trials": self.trials,
        }


# -----------------------------------------------------------------------------
# SESSIONS
# -----------------------------------------------------------------------------

def _draw_session_key(config: SessionConfig, rng: np.random.Generator) -> SecretKey:
    key = generate_key(config.key_bits, KeyPrior.uniform(), rng)
    # the all-zero register would emit an all-zero keystream
    while config.keystream_spec.mode == MODE_LFSR and not key.bits.bits.any():
        key = generate_key(config.key_bits, KeyPrior.uniform(), rng)
    return key


def run_session(config: SessionConfig, trial: int = 0) -> SessionTranscript:
    """Encrypt, then observe the ciphertext through Alice's and Eve's channels."""
    seed = config.master_seed
    key = _draw_session_key(config, derive_rng(seed, trial, STREAM_KEY))
    if config.plaintext is not None:
        plaintext = config.plaintext
    else:
        plaintext = BitSequence.random(config.plaintext_len, derive_rng(seed, trial, STREAM_PLAINTEXT))

    keystream = expand_keystream(key, config.keystream_spec)
    ciphertext = encrypt(plaintext, keystream)

    p_alice, p_eve = config.error_probabilities()
    eve_stream = STREAM_ALICE if config.paired_seeds else STREAM_EVE
    alice_obs = transmit_bsc(ciphertext, p_alice, derive_rng(seed, trial, STREAM_ALICE), Receiver.ALICE)
    eve_obs = transmit_bsc(ciphertext, p_eve, derive_rng(seed, trial, eve_stream), Receiver.EVE)
    reference_obs = ChannelObservation(
        bits=ciphertext, crossover_p=0.0, flip_count=0, receiver=Receiver.BOB_IDEAL, sent=ciphertext
    )

    return SessionTranscript(
        true_key=key,
        plaintext=plaintext,
        ciphertext=ciphertext,
        alice_obs=alice_obs,
        eve_obs=eve_obs,
        p_alice=p_alice,
        p_eve=p_eve,
        trial=trial,
        reference_obs=reference_obs,
    )


# -----------------------------------------------------------------------------
# ATTACKS
# -----------------------------------------------------------------------------

def brute_force_attack(
    obs: ChannelObservation,
    known_plaintext: BitSequence,
    spec: KeystreamSpec,
    key_prior: KeyPrior,
    true_key: Optional[SecretKey] = None,
    trials_context: Optional[Dict[str, int]] = None,
) -> AttackReport:
    """Try every key against the observed ciphertext prefix under the known plaintext."""
    check_enumerable(spec.key_bits)
    n = known_plaintext.length
    if n > obs.bits.length:
        raise ConfigurationError(
            f"known plaintext of {n} bits exceeds the {obs.bits.length} observed bits"
        )
    posterior = posterior_over_keys(
        obs.bits[:n], known_plaintext, None, key_prior, spec, channel_p=obs.crossover_p
    )
    guess = guess_from_posterior(posterior)
    recovered = (
        true_key is not None
        and guess.multiplicity == 1
        and guess.canonical == true_key.to_int()
    )
    return AttackReport(
        attacker=obs.receiver,
        guess=guess,
        key_recovered=recovered,
        posterior_entropy_bits=posterior.entropy_bits(),
        trials_context=dict(trials_context or {}),
        posterior=posterior,
    )


def attack_session(config: SessionConfig, transcript: SessionTranscript) -> Tuple[AttackReport, AttackReport]:
    """(Alice's, Eve's) brute-force reports for one session."""
    known = transcript.plaintext[: config.known_plaintext_len]
    context = {"trial": transcript.trial, "known_bits": known.length}
    prior = KeyPrior.uniform()
    alice = brute_force_attack(
        transcript.alice_obs, known, config.keystream_spec, prior, transcript.true_key, context
    )
    eve = brute_force_attack(
        transcript.eve_obs, known, config.keystream_spec, prior, transcript.true_key, context
    )
    return alice, eve


def _run_trial(config: SessionConfig, trial: int) -> TrialRecord:
    transcript = run_session(config, trial)
    alice, eve = attack_session(config, transcript)
    return TrialRecord(
        trial=trial,
        pg_eve=eve.guess.p_guess,
        pg_legit=alice.guess.p_guess,
        eve_recovered=eve.key_recovered,
        alice_recovered=alice.key_recovered,
        flip_count_eve=transcript.eve_obs.flip_count,
        flip_count_alice=transcript.alice_obs.flip_count,
    )


def _mean_and_stderr(values: Sequence[float]) -> Tuple[float, float]:
    n = len(values)
    mean = math.fsum(values) / n
    if n < 2:
        return mean, 0.0
    variance = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(variance / n)


def measure_advantage(
    config: SessionConfig,
    trials: int,
    log_callback: Optional[LogCallback] = None,
    max_workers: Optional[int] = None,
) -> AdvantageReport:
    """Mean guessing probabilities of Eve and Alice over independent sessions."""
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    check_enumerable(config.key_bits)
    p_alice, p_eve = config.error_probabilities()
    _log(
        log_callback,
        f"Running {trials} trials: {config.key_bits}-bit key, "
        f"{config.known_plaintext_len} known bits, p_alice={p_alice:.4g}, p_eve={p_eve:.4g}",
    )

    # map() keeps trial order, so results do not depend on scheduling
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        records = list(executor.map(lambda t: _run_trial(config, t), range(trials)))

    pg_eve, pg_eve_err = _mean_and_stderr([r.pg_eve for r in records])
    pg_legit, pg_legit_err = _mean_and_stderr([r.pg_legit for r in records])
    report = AdvantageReport(
        pg_eve=pg_eve,
        pg_legit=pg_legit,
        eta_ideal_empirical=pg_eve / pg_legit,
        eta_ideal_target=2.0 ** -config.key_bits,
        eve_recovery_rate=sum(r.eve_recovered for r in records) / trials,
        alice_recovery_rate=sum(r.alice_recovered for r in records) / trials,
        pg_eve_stderr=pg_eve_err,
        pg_legit_stderr=pg_legit_err,
        p_alice=p_alice,
        p_eve=p_eve,
        trials=trials,
        records=records,
    )
    _log(
        log_callback,
        f"pg_eve={report.pg_eve:.6g} pg_legit={report.pg_legit:.6g} "
        f"ratio={report.eta_ideal_empirical:.6g} (ideal {report.eta_ideal_target:.6g})",
    )
    return report


def guessing_curve(
    config: SessionConfig,
    p_eve_values: Sequence[float],
    trials: int,
    log_callback: Optional[LogCallback] = None,
) -> List[AdvantageReport]:
    """measure_advantage at each of Eve's crossover probabilities, Alice's held fixed."""
    p_alice, _ = config.error_probabilities()
    reports = []
    for p_eve in p_eve_values:
        swept = SessionConfig(
            key_bits=config.key_bits,
            keystream_spec=config.keystream_spec,
            qi_params=config.qi_params,
            plaintext_len=config.plaintext_len,
            known_plaintext_len=config.known_plaintext_len,
            master_seed=config.master_seed,
            plaintext=config.plaintext,
            paired_seeds=config.paired_seeds,
            channel_override=(p_alice, p_eve),
        )
        reports.append(measure_advantage(swept, trials, log_callback=log_callback))
    return reports


def advantage_holds(qi_params: QIParams, threshold: float = DEFAULT_ADVANTAGE_THRESHOLD) -> bool:
    """True iff P_e(Eve) / P_e(Alice) >= threshold."""
    if not threshold > 1:
        raise DomainError(f"advantage threshold must be > 1, got {threshold}")
    return error_ratio(qi_params).eta >= threshold
