import math
import unittest

import numpy as np

from cipher_core import DEFAULT_TAPS, BitSequence, KeyPrior, KeystreamSpec, SecretKey, encrypt, expand_keystream
from errors import ConfigurationError, DomainError, EnumerationLimitError
from protocol_sim import (
    SessionConfig,
    advantage_holds,
    attack_session,
    brute_force_attack,
    derive_rng,
    guessing_curve,
    measure_advantage,
    run_session,
)
from quantum_channel import QIParams, Receiver, error_ratio, transmit_bsc

STRONG_LINK = QIParams.from_reduced(1e6, 0.2, 0.005)


def session(key_bits=8, known=64, plaintext_len=64, override=None, seed=0, paired=False, qi=STRONG_LINK):
    return SessionConfig(
        key_bits=key_bits,
        keystream_spec=KeystreamSpec.default_lfsr(key_bits, plaintext_len),
        qi_params=qi,
        plaintext_len=plaintext_len,
        known_plaintext_len=known,
        master_seed=seed,
        paired_seeds=paired,
        channel_override=override,
    )


def oracle_posterior(observed, known, taps, key_bits, p):
    """Exact key posterior by plain loops: register simulation and log likelihoods."""
    n = len(known)
    target = [o ^ m for o, m in zip(observed, known)]
    logs = []
    for key in range(1 << key_bits):
        register = [(key >> (key_bits - 1 - i)) & 1 for i in range(key_bits)]
        stream = []
        for _ in range(n):
            stream.append(register[0])
            feedback = 0
            for t in taps:
                feedback ^= register[key_bits - t]
            register = register[1:] + [feedback]
        d = sum(a != b for a, b in zip(stream, target))
        logs.append(d * math.log(p) + (n - d) * math.log(1 - p))
    top = max(logs)
    weights = [math.exp(v - top) for v in logs]
    total = math.fsum(weights)
    return [w / total for w in weights]


def independent_guessing(p, trials, seed, key_bits=8, n=64):
    """Mean max-posterior and its standard error over freshly drawn sessions."""
    taps = DEFAULT_TAPS[key_bits]
    streams = []
    for key in range(1 << key_bits):
        register = [(key >> (key_bits - 1 - i)) & 1 for i in range(key_bits)]
        value = 0
        for _ in range(n):
            value = (value << 1) | register[0]
            feedback = 0
            for t in taps:
                feedback ^= register[key_bits - t]
            register = register[1:] + [feedback]
        streams.append(value)

    rng = np.random.default_rng(seed)
    log_p, log_q = math.log(p), math.log1p(-p)
    values = []
    for _ in range(trials):
        true_key = int(rng.integers(1, 1 << key_bits))
        flips = int("".join("1" if f else "0" for f in rng.random(n) < p), 2)
        target = streams[true_key] ^ flips
        logs = []
        for z in streams:
            d = bin(z ^ target).count("1")
            logs.append(d * log_p + (n - d) * log_q)
        top = max(logs)
        weights = [math.exp(v - top) for v in logs]
        values.append(max(weights) / math.fsum(weights))
    return float(np.mean(values)), float(np.std(values, ddof=1) / math.sqrt(trials))


class SessionTests(unittest.TestCase):

    def test_same_seed_same_transcript(self):
        config = session(override=(0.01, 0.3), seed=77)
        a = run_session(config, trial=3)
        b = run_session(config, trial=3)
        self.assertEqual(a.to_dict(), b.to_dict())
        self.assertNotEqual(a.to_dict(), run_session(config, trial=4).to_dict())

    def test_dark_source_gives_coin_flip_channels(self):
        dark = QIParams.from_reduced(1e6, 0.2, 0.0)
        transcript = run_session(session(qi=dark))
        self.assertEqual(transcript.alice_obs.crossover_p, 0.5)
        self.assertEqual(transcript.eve_obs.crossover_p, 0.5)
        self.assertEqual(transcript.alice_obs.receiver, Receiver.ALICE)
        self.assertEqual(transcript.eve_obs.receiver, Receiver.EVE)

    def test_ciphertext_is_encrypted_plaintext(self):
        config = session(override=(0.0, 0.2), seed=5)
        t = run_session(config)
        keystream = expand_keystream(t.true_key, config.keystream_spec)
        self.assertEqual(t.ciphertext, encrypt(t.plaintext, keystream))
        self.assertEqual(t.alice_obs.bits, t.ciphertext)
        self.assertTrue(t.true_key.bits.bits.any())

    def test_reference_observation_is_noiseless(self):
        config = session(override=(0.2, 0.45), seed=13)
        transcript = run_session(config)
        reference = transcript.reference_obs
        self.assertEqual(reference.receiver, Receiver.BOB_IDEAL)
        self.assertEqual(reference.bits, transcript.ciphertext)
        self.assertEqual(reference.crossover_p, 0.0)
        self.assertEqual(transcript.to_dict()["bob_ideal_obs"]["receiver"], "bob-ideal")

        ideal = brute_force_attack(
            reference, transcript.plaintext, config.keystream_spec, KeyPrior.uniform(), transcript.true_key
        )
        self.assertEqual(ideal.attacker, Receiver.BOB_IDEAL)
        self.assertEqual(ideal.guess.p_guess, 1.0)
        self.assertTrue(ideal.key_recovered)

    def test_invalid_lengths(self):
        with self.assertRaises(ConfigurationError):
            session(known=65, plaintext_len=64)
        with self.assertRaises(ConfigurationError):
            session(override=(0.0, 0.7))

    def test_streams_are_independent(self):
        a = derive_rng(1, 0, 0).random(4)
        b = derive_rng(1, 0, 1).random(4)
        self.assertFalse((a == b).all())


class BruteForceTests(unittest.TestCase):

    def test_noiseless_four_bit_recovery(self):
        spec = KeystreamSpec.lfsr((4, 3), 15)
        plaintext = BitSequence.from_string("011010001110101")
        for value in range(1, 16):
            key = SecretKey.from_int(value, 4)
            ciphertext = encrypt(plaintext, expand_keystream(key, spec))
            obs = transmit_bsc(ciphertext, 0.0, derive_rng(0, value, 0))
            report = brute_force_attack(obs, plaintext, spec, KeyPrior.uniform(), true_key=key)
            self.assertTrue(report.key_recovered)
            self.assertEqual(report.guess.p_guess, 1.0)

    def test_coin_flip_channel_reveals_nothing(self):
        for key_bits, known in ((4, 15), (8, 64), (16, 32)):
            config = session(key_bits=key_bits, known=known, plaintext_len=known, override=(0.0, 0.5), seed=9)
            transcript = run_session(config)
            _, eve = attack_session(config, transcript)
            self.assertEqual(eve.guess.p_guess, 2.0 ** -key_bits)
            self.assertEqual(eve.guess.multiplicity, 1 << key_bits)
            self.assertAlmostEqual(eve.posterior_entropy_bits, key_bits, delta=1e-9)
            self.assertFalse(eve.key_recovered)

    def test_noisy_attack_matches_oracle(self):
        config = session(override=(0.0, 0.1), seed=2718)
        transcript = run_session(config)
        _, eve = attack_session(config, transcript)
        oracle = oracle_posterior(
            list(transcript.eve_obs.bits[:64]), list(transcript.plaintext[:64]), DEFAULT_TAPS[8], 8, 0.1
        )
        probs = eve.posterior.probabilities()
        for mine, theirs in zip(probs, oracle):
            self.assertAlmostEqual(float(mine), theirs, delta=1e-12)
        self.assertAlmostEqual(eve.guess.p_guess, max(oracle), delta=1e-12)
        self.assertEqual(eve.guess.canonical, oracle.index(max(oracle)))

    def test_known_plaintext_longer_than_observation(self):
        obs = transmit_bsc(BitSequence.zeros(8), 0.0, derive_rng(0, 0, 0))
        with self.assertRaises(ConfigurationError):
            brute_force_attack(obs, BitSequence.zeros(9), KeystreamSpec.lfsr((8, 6, 5, 4), 9), KeyPrior.uniform())

    def test_enumeration_ceiling(self):
        spec = KeystreamSpec.lfsr((25, 22), 30)
        obs = transmit_bsc(BitSequence.zeros(30), 0.0, derive_rng(0, 0, 0))
        with self.assertRaises(EnumerationLimitError):
            brute_force_attack(obs, BitSequence.zeros(30), spec, KeyPrior.uniform())


class AdvantageTests(unittest.TestCase):

    def test_analytic_endpoints(self):
        report = measure_advantage(session(override=(0.0, 0.5)), trials=20)
        self.assertTrue(all(r.pg_eve == 2.0 ** -8 for r in report.records))
        self.assertTrue(all(r.pg_legit == 1.0 for r in report.records))
        self.assertEqual(report.eta_ideal_empirical, 2.0 ** -8)
        self.assertEqual(report.eta_ideal_target, 2.0 ** -8)
        self.assertEqual(report.alice_recovery_rate, 1.0)
        self.assertEqual(report.eve_recovery_rate, 0.0)

    def test_paired_seeds_make_equal_channels_identical(self):
        report = measure_advantage(session(override=(0.2, 0.2), paired=True), trials=10)
        self.assertEqual(report.eta_ideal_empirical, 1.0)
        for record in report.records:
            self.assertEqual(record.flip_count_eve, record.flip_count_alice)

    def test_ratio_is_plain_division(self):
        report = measure_advantage(session(override=(0.05, 0.3), seed=4), trials=30)
        self.assertAlmostEqual(report.eta_ideal_empirical, report.pg_eve / report.pg_legit, delta=1e-12)
        self.assertEqual(len(report.records), 30)
        self.assertEqual([r.trial for r in report.records], list(range(30)))

    def test_repeatable(self):
        config = session(override=(0.01, 0.4), seed=123)
        a = measure_advantage(config, trials=15)
        b = measure_advantage(config, trials=15)
        self.assertEqual(a.to_dict(), b.to_dict())
        self.assertEqual([r.to_row() for r in a.records], [r.to_row() for r in b.records])

    def test_legitimate_receiver_recovers_key(self):
        report = measure_advantage(session(override=(1e-3, 0.45), seed=1), trials=1000)
        self.assertGreaterEqual(report.alice_recovery_rate, 0.99)
        self.assertGreaterEqual(report.pg_eve, 2.0 ** -8)
        for mine, stderr, p, seed in (
            (report.pg_eve, report.pg_eve_stderr, 0.45, 501),
            (report.pg_legit, report.pg_legit_stderr, 1e-3, 502),
        ):
            expected, expected_stderr = independent_guessing(p, 1000, seed)
            tolerance = 3 * math.hypot(stderr, expected_stderr) + 1e-12
            self.assertLessEqual(abs(mine - expected), tolerance, p)

    def test_near_coin_flip_eavesdropper_stays_near_uniform(self):
        report = measure_advantage(session(override=(1e-3, 0.49), seed=2), trials=1000)
        self.assertGreaterEqual(report.alice_recovery_rate, 0.99)
        expected, expected_stderr = independent_guessing(0.49, 1000, 503)
        self.assertLessEqual(
            abs(report.pg_eve - expected), 3 * math.hypot(report.pg_eve_stderr, expected_stderr)
        )
        self.assertLessEqual(report.pg_eve, 4 * 2.0 ** -8)
        self.assertGreater(report.eta_ideal_empirical, 2.0 ** -8)

    def test_guessing_probability_falls_towards_uniform(self):
        config = session(override=(1e-3, 0.3), seed=31)
        curve = guessing_curve(config, [0.3, 0.4, 0.45, 0.49, 0.5], trials=40)
        for earlier, later in zip(curve, curve[1:]):
            slack = 3 * math.hypot(earlier.pg_eve_stderr, later.pg_eve_stderr)
            self.assertLessEqual(later.pg_eve, earlier.pg_eve + slack)
        self.assertEqual(curve[-1].pg_eve, 2.0 ** -8)
        self.assertTrue(all(r.p_alice == 1e-3 for r in curve))

    def test_rejects_zero_trials(self):
        with self.assertRaises(DomainError):
            measure_advantage(session(override=(0.0, 0.5)), trials=0)


class AdvantageHoldsTests(unittest.TestCase):

    def test_dark_source_has_no_advantage(self):
        dark = QIParams.from_reduced(1e6, 0.2, 0.0)
        for threshold in (1.0001, 10.0, 1e3):
            self.assertFalse(advantage_holds(dark, threshold))

    def test_large_ratio(self):
        self.assertTrue(advantage_holds(STRONG_LINK, 1e3))
        self.assertFalse(advantage_holds(STRONG_LINK, 1e9))

    def test_threshold_equal_to_ratio(self):
        eta = error_ratio(STRONG_LINK).eta
        self.assertTrue(advantage_holds(STRONG_LINK, eta))

    def test_threshold_must_exceed_one(self):
        with self.assertRaises(DomainError):
            advantage_holds(STRONG_LINK, 1.0)


if __name__ == "__main__":
    unittest.main()
