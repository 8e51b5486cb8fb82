# security_metrics.py
"""
Exact guessing-probability metrics by exhaustive enumeration.

Every posterior is accumulated in the log domain and normalized with
log-sum-exp; observations may be noisy, in which case each ciphertext bit is
assumed to pass through a memoryless binary symmetric channel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Mapping, Optional, Sequence

import numpy as np
from scipy.special import logsumexp, softmax
from scipy.stats import entropy

from cipher_core import (
    BitSequence,
    KeyPrior,
    KeystreamSpec,
    check_enumerable,
    iter_keystream_blocks,
    keystream_table,
    validate_weights,
)
from errors import (
    ConfigurationError,
    DomainError,
    InconsistentEvidenceError,
    LengthMismatchError,
)

MAX_MESSAGE_BITS = 20
MAX_JOINT_BITS = 24
ARGMAX_RELATIVE_TOLERANCE = 1e-12
NORMALIZATION_TOLERANCE = 1e-9

# Bound on the size of a (keys x messages) likelihood slab.
_SLAB_ELEMENTS = 1 << 20


@dataclass(frozen=True, eq=False)
class MessagePrior:
    """P(M) over all 2^m messages of m bits."""

    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "weights", validate_weights(self.weights, "message prior"))

    @classmethod
    def uniform(cls, message_bits: int) -> "MessagePrior":
        return cls(np.full(1 << message_bits, 2.0 ** -message_bits))

    @classmethod
    def from_weights(cls, weights: Sequence[float]) -> "MessagePrior":
        return cls(np.asarray(weights, dtype=float))

    @property
    def message_bits(self) -> int:
        return int(self.weights.size).bit_length() - 1

    def log_probabilities(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.weights)


@dataclass
class PosteriorTable:
    """Log-probability per hypothesis; row index is the hypothesis' integer encoding."""

    log_weights: np.ndarray
    domain_bits: int
    normalized: bool = False

    def __post_init__(self):
        self.log_weights = np.asarray(self.log_weights, dtype=float)
        if self.log_weights.size != (1 << self.domain_bits):
            raise ConfigurationError(
                f"posterior has {self.log_weights.size} entries, expected 2^{self.domain_bits}"
            )

    def normalize(self) -> "PosteriorTable":
        if not np.any(np.isfinite(self.log_weights)):
            raise InconsistentEvidenceError(
                "every hypothesis has zero probability under the observation"
            )
        log_total = logsumexp(self.log_weights)
        return PosteriorTable(self.log_weights - log_total, self.domain_bits, normalized=True)

    def probabilities(self) -> np.ndarray:
        # max-shifted softmax keeps exactly equal weights exactly equal
        return softmax(self.log_weights)

    def entropy_bits(self) -> float:
        return float(entropy(self.probabilities(), base=2))

    def to_rows(self, column: str = "posterior", label: str = "hypothesis") -> List[dict]:
        probs = self.probabilities()
        width = self.domain_bits
        return [
            {label: format(index, f"0{width}b"), column: float(p)}
            for index, p in enumerate(probs)
        ]


@dataclass
class GuessReport:
    p_guess: float
    argmax_set: List[int]
    multiplicity: int
    domain_bits: int

    @property
    def canonical(self) -> int:
        return self.argmax_set[0]

    def to_dict(self) -> dict:
        width = self.domain_bits
        return {
            "p_guess": self.p_guess,
            "argmax_set": [format(h, f"0{width}b") for h in self.argmax_set],
            "multiplicity": self.multiplicity,
            "domain_bits": self.domain_bits,
        }


@dataclass
class SecrecyReport:
    holds: bool
    max_deviation: float
    tolerance: float

    def to_dict(self) -> dict:
        return {
            "holds": self.holds,
            "max_deviation": self.max_deviation,
            "tolerance": self.tolerance,
        }


# -----------------------------------------------------------------------------
# LIKELIHOODS
# -----------------------------------------------------------------------------

def _check_channel_p(channel_p: float):
    if not 0.0 <= channel_p <= 0.5:
        raise DomainError(f"channel crossover probability must lie in [0, 0.5], got {channel_p}")


def _bsc_log_likelihood(distances: np.ndarray, n: int, channel_p: float) -> np.ndarray:
    """log[p^d (1-p)^(n-d)] with the p = 0 limit handled exactly."""
    d = distances.astype(float)
    if channel_p == 0.0:
        return np.where(distances == 0, 0.0, -np.inf)
    if channel_p == 0.5:
        # identical for every hypothesis, bit for bit
        return np.full(d.shape, n * math.log(0.5))
    return d * math.log(channel_p) + (n - d) * math.log1p(-channel_p)


# -----------------------------------------------------------------------------
# OPERATIONS
# -----------------------------------------------------------------------------

def posterior_over_keys(
    ciphertext: BitSequence,
    known_plaintext: Optional[BitSequence],
    message_prior: Optional[MessagePrior],
    key_prior: KeyPrior,
    spec: KeystreamSpec,
    channel_p: float = 0.0,
) -> PosteriorTable:
    """P(K | observed ciphertext[, known plaintext]) over the whole key space."""
    _check_channel_p(channel_p)
    key_bits = spec.key_bits
    check_enumerable(key_bits)
    key_prior.check_dimension(key_bits)
    n = ciphertext.length

    log_weights = np.empty(1 << key_bits)
    if known_plaintext is not None:
        if known_plaintext.length != n:
            raise LengthMismatchError(
                f"known plaintext has {known_plaintext.length} bits, ciphertext {n}"
            )
        # keystream implied by the evidence
        target = np.bitwise_xor(ciphertext.bits, known_plaintext.bits)
        for start, block in iter_keystream_blocks(spec, n):
            stop = start + block.shape[0]
            distances = np.count_nonzero(block != target, axis=1)
            log_weights[start:stop] = key_prior.log_probabilities(
                key_bits, start, stop
            ) + _bsc_log_likelihood(distances, n, channel_p)
    else:
        if message_prior is None:
            raise ConfigurationError("a ciphertext-only key attack needs a message prior")
        if message_prior.message_bits != n:
            raise LengthMismatchError(
                f"message prior covers {message_prior.message_bits}-bit messages, ciphertext has {n} bits"
            )
        check_enumerable(n + key_bits, MAX_JOINT_BITS, "joint key/message space")
        messages = _index_bits(n)
        log_pm = message_prior.log_probabilities()
        rows_per_slab = max(1, _SLAB_ELEMENTS // messages.shape[0])
        for start, block in iter_keystream_blocks(spec, n):
            for offset in range(0, block.shape[0], rows_per_slab):
                rows = block[offset: offset + rows_per_slab]
                # Enc(K, M) == obs XOR flips  <=>  distance(ks_K XOR obs, M)
                shifted = np.bitwise_xor(rows, ciphertext.bits)
                distances = np.count_nonzero(
                    shifted[:, np.newaxis, :] != messages[np.newaxis, :, :], axis=2
                )
                joint = log_pm[np.newaxis, :] + _bsc_log_likelihood(distances, n, channel_p)
                lo = start + offset
                hi = lo + rows.shape[0]
                log_weights[lo:hi] = key_prior.log_probabilities(key_bits, lo, hi) + logsumexp(
                    joint, axis=1
                )

    return PosteriorTable(log_weights, key_bits).normalize()


def guess_from_posterior(posterior: PosteriorTable) -> GuessReport:
    """Maximum a-posteriori guess; ties are all reported, smallest encoding first."""
    if not posterior.normalized:
        posterior = posterior.normalize()
    probs = posterior.probabilities()
    if probs.size == 0 or not np.all(np.isfinite(probs)):
        raise DomainError("malformed posterior")
    total = float(np.sum(probs))
    if abs(total - 1.0) > NORMALIZATION_TOLERANCE:
        raise DomainError(f"posterior sums to {total}, expected 1")

    p_guess = float(probs.max())
    argmax = np.flatnonzero(probs >= p_guess * (1.0 - ARGMAX_RELATIVE_TOLERANCE))
    return GuessReport(
        p_guess=p_guess,
        argmax_set=[int(i) for i in argmax],
        multiplicity=int(argmax.size),
        domain_bits=posterior.domain_bits,
    )


def posterior_over_messages(
    ciphertext: BitSequence,
    message_prior: MessagePrior,
    key_prior: KeyPrior,
    spec: KeystreamSpec,
    known_bits: Optional[Mapping[int, int]] = None,
) -> PosteriorTable:
    """P(M | C) for a noiseless ciphertext; `known_bits` pins plaintext positions."""
    m = ciphertext.length
    if message_prior.message_bits != m:
        raise LengthMismatchError(
            f"message prior covers {message_prior.message_bits}-bit messages, ciphertext has {m} bits"
        )
    check_enumerable(m, MAX_MESSAGE_BITS, "message space")
    mass = _keystream_prefix_mass(spec, key_prior, m)

    # Enc(K, M) == C  <=>  M == C XOR ks_K
    c_int = ciphertext.to_int()
    index = np.arange(1 << m, dtype=np.int64)
    with np.errstate(divide="ignore"):
        log_weights = message_prior.log_probabilities() + np.log(mass[index ^ c_int])

    if known_bits:
        for position, bit in known_bits.items():
            if not 0 <= position < m:
                raise LengthMismatchError(f"known plaintext position {position} outside 0..{m - 1}")
            column = (index >> (m - 1 - position)) & 1
            log_weights[column != bit] = -np.inf

    return PosteriorTable(log_weights, m).normalize()


def average_guessing_probability(
    message_prior: MessagePrior, key_prior: KeyPrior, spec: KeystreamSpec
) -> float:
    """Sum over ciphertexts of P(C) * max_M P(M | C) = sum_C max_M P(M, C)."""
    m = message_prior.message_bits
    check_enumerable(m + spec.key_bits, MAX_JOINT_BITS, "joint key/message space")
    mass = _keystream_prefix_mass(spec, key_prior, m)

    index = np.arange(1 << m, dtype=np.int64)
    best = np.zeros(1 << m)
    # P(M, C) = P(M) * mass[M XOR C]; walk only the keystreams that occur
    for z in np.flatnonzero(mass):
        np.maximum(best, message_prior.weights[index ^ z] * mass[z], out=best)
    return math.fsum(best)


def verify_perfect_secrecy(
    message_prior: MessagePrior,
    key_prior: KeyPrior,
    spec: KeystreamSpec,
    tolerance: float = 1e-12,
) -> SecrecyReport:
    """max over (M, C) of |P(M | C) - P(M)|, over ciphertexts that can occur."""
    m = message_prior.message_bits
    check_enumerable(2 * m, MAX_JOINT_BITS, "message x ciphertext table")
    check_enumerable(m + spec.key_bits, MAX_JOINT_BITS, "joint key/message space")
    mass = _keystream_prefix_mass(spec, key_prior, m)

    index = np.arange(1 << m, dtype=np.int64)
    pm = message_prior.weights
    # rows: M, columns: C
    joint = pm[:, np.newaxis] * mass[index[:, np.newaxis] ^ index[np.newaxis, :]]
    p_c = joint.sum(axis=0)
    reachable = p_c > 0
    posterior = joint[:, reachable] / p_c[reachable]
    deviation = float(np.max(np.abs(posterior - pm[:, np.newaxis])))
    return SecrecyReport(holds=deviation <= tolerance, max_deviation=deviation, tolerance=tolerance)


def qkd_guessing_bound(key_bits: int, trace_distance: float) -> float:
    """Upper bound 2^-|K| + d on guessing a distributed key, clamped to 1."""
    if not 0.0 <= trace_distance <= 1.0:
        raise DomainError(f"trace distance must lie in [0, 1], got {trace_distance}")
    if key_bits < 1:
        raise DomainError(f"key_bits must be >= 1, got {key_bits}")
    return min(1.0, 2.0 ** -key_bits + trace_distance)


def prior_guessing_probability(key_prior: KeyPrior, key_bits: int) -> float:
    """Guessing probability of the key before any observation: max_K P_K(K)."""
    return float(np.max(key_prior.probabilities(key_bits)))


def trace_distance_to_uniform(key_prior: KeyPrior, key_bits: int) -> float:
    """Statistical distance between the key prior and the ideal uniform key."""
    probs = key_prior.probabilities(key_bits)
    return 0.5 * math.fsum(np.abs(probs - 2.0 ** -key_bits))


# -----------------------------------------------------------------------------
# HELPERS
# -----------------------------------------------------------------------------

def _index_bits(bits: int) -> np.ndarray:
    index = np.arange(1 << bits, dtype=np.int64)
    shifts = np.arange(bits - 1, -1, -1, dtype=np.int64)
    return ((index[:, np.newaxis] >> shifts) & 1).astype(np.uint8)


def _keystream_prefix_mass(spec: KeystreamSpec, key_prior: KeyPrior, length: int) -> np.ndarray:
    """mass[z] = total key-prior probability of keys whose keystream prefix encodes z."""
    key_bits = spec.key_bits
    key_prior.check_dimension(key_bits)
    table = keystream_table(spec, length)
    weights = 1 << np.arange(length - 1, -1, -1, dtype=np.int64)
    prefixes = table.astype(np.int64) @ weights
    return np.bincount(prefixes, weights=key_prior.probabilities(key_bits), minlength=1 << length)
