# cipher_core.py
"""
Mathematical encryption box: key generation, keystream expansion and XOR
stream encryption.

Conventions used everywhere in the package:
  - bit index 0 is the first transmitted bit; string form puts it leftmost
  - the integer encoding of a bit sequence reads it most-significant-bit first
  - LFSR register cell 1 is the output end and is loaded with key bit 0
  - tap t is the exponent of x^t in the feedback polynomial, so the keystream
    obeys s[j] = XOR_t s[j - t]; taps {4, 3} is x^4 + x^3 + 1
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Iterable, Iterator, Optional, Sequence, Tuple

import numpy as np

from errors import (
    ConfigurationError,
    DegenerateSeedError,
    EnumerationLimitError,
    LengthMismatchError,
)

MODE_LFSR = "lfsr"
MODE_OTP = "otp"
KEYSTREAM_MODES = (MODE_LFSR, MODE_OTP)

PRIOR_UNIFORM = "uniform"
PRIOR_EXPLICIT = "explicit"

MAX_ENUMERATION_KEY_BITS = 24
PROBABILITY_SUM_TOLERANCE = 1e-12

# Keys per vectorized block when walking a key space.
KEY_BLOCK_SIZE = 1 << 16
# Key spaces up to this size keep their keystream table cached.
CACHED_TABLE_KEY_BITS = 16

# Maximal-length feedback polynomials, indexed by register length.
DEFAULT_TAPS = {
    1: (1,),
    2: (2, 1),
    3: (3, 2),
    4: (4, 3),
    5: (5, 3),
    6: (6, 5),
    7: (7, 6),
    8: (8, 6, 5, 4),
    9: (9, 5),
    10: (10, 7),
    11: (11, 9),
    12: (12, 11, 10, 4),
    13: (13, 12, 11, 8),
    14: (14, 13, 12, 2),
    15: (15, 14),
    16: (16, 14, 13, 11),
    17: (17, 14),
    18: (18, 11),
    19: (19, 18, 17, 14),
    20: (20, 17),
    21: (21, 19),
    22: (22, 21),
    23: (23, 18),
    24: (24, 23, 22, 17),
}


class BitSequence:
    """Immutable vector of binary symbols backed by a read-only uint8 array."""

    __slots__ = ("_bits",)

    def __init__(self, bits: Iterable[int] | np.ndarray):
        arr = np.array(bits, dtype=np.uint8).reshape(-1)
        if arr.size and arr.max() > 1:
            raise ConfigurationError("bit sequences may only contain 0 and 1")
        arr.setflags(write=False)
        self._bits = arr

    @property
    def bits(self) -> np.ndarray:
        return self._bits

    @property
    def length(self) -> int:
        return int(self._bits.size)

    # ---------- construction ----------

    @classmethod
    def from_string(cls, text: str) -> "BitSequence":
        text = text.strip()
        if any(ch not in "01" for ch in text):
            raise ConfigurationError(f"not a bit string: {text!r}")
        return cls(np.frombuffer(text.encode("ascii"), dtype=np.uint8) - ord("0"))

    @classmethod
    def from_int(cls, value: int, length: int) -> "BitSequence":
        if value < 0 or (length < value.bit_length()):
            raise ConfigurationError(f"{value} does not fit in {length} bits")
        if length == 0:
            return cls([])
        return cls.from_string(format(value, f"0{length}b"))

    @classmethod
    def from_hex(cls, text: str, length: int) -> "BitSequence":
        raw = text.strip().lower()
        if raw.startswith("0x"):
            raw = raw[2:]
        try:
            value = int(raw, 16)
        except ValueError as e:
            raise ConfigurationError(f"not a hexadecimal string: {text!r}") from e
        return cls.from_int(value, length)

    @classmethod
    def zeros(cls, length: int) -> "BitSequence":
        return cls(np.zeros(length, dtype=np.uint8))

    @classmethod
    def random(cls, length: int, rng: np.random.Generator) -> "BitSequence":
        return cls(rng.integers(0, 2, size=length, dtype=np.uint8))

    # ---------- conversion ----------

    def to_string(self) -> str:
        return (self._bits + ord("0")).tobytes().decode("ascii")

    def to_int(self) -> int:
        return int(self.to_string(), 2) if self.length else 0

    def hamming_distance(self, other: "BitSequence") -> int:
        if other.length != self.length:
            raise LengthMismatchError(
                f"cannot compare sequences of length {self.length} and {other.length}"
            )
        return int(np.count_nonzero(self._bits != other._bits))

    # ---------- protocol ----------

    def __len__(self) -> int:
        return self.length

    def __iter__(self) -> Iterator[int]:
        return (int(b) for b in self._bits)

    def __getitem__(self, index):
        if isinstance(index, slice):
            return BitSequence(self._bits[index])
        return int(self._bits[index])

    def __xor__(self, other: "BitSequence") -> "BitSequence":
        if other.length != self.length:
            raise LengthMismatchError(
                f"cannot XOR sequences of length {self.length} and {other.length}"
            )
        return BitSequence(np.bitwise_xor(self._bits, other._bits))

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitSequence):
            return NotImplemented
        return self.length == other.length and bool(np.array_equal(self._bits, other._bits))

    def __hash__(self) -> int:
        return hash((self.length, self._bits.tobytes()))

    def __repr__(self) -> str:
        text = self.to_string()
        if len(text) > 64:
            text = text[:61] + "..."
        return f"BitSequence('{text}', length={self.length})"


@dataclass(frozen=True)
class SecretKey:
    bits: BitSequence

    def __post_init__(self):
        if self.bits.length < 1:
            raise ConfigurationError("a secret key needs at least one bit")

    @property
    def key_bits(self) -> int:
        return self.bits.length

    @classmethod
    def from_int(cls, value: int, key_bits: int) -> "SecretKey":
        return cls(BitSequence.from_int(value, key_bits))

    @classmethod
    def from_hex(cls, text: str, key_bits: int) -> "SecretKey":
        return cls(BitSequence.from_hex(text, key_bits))

    @classmethod
    def from_string(cls, text: str) -> "SecretKey":
        return cls(BitSequence.from_string(text))

    def to_int(self) -> int:
        return self.bits.to_int()

    def to_string(self) -> str:
        return self.bits.to_string()


@dataclass(frozen=True, eq=False)
class KeyPrior:
    """Key distribution P_K: uniform, or one explicit weight per key."""

    mode: str = PRIOR_UNIFORM
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.mode == PRIOR_UNIFORM:
            if self.weights is not None:
                raise ConfigurationError("uniform key prior takes no weights")
            return
        if self.mode != PRIOR_EXPLICIT:
            raise ConfigurationError(f"unknown key prior mode {self.mode!r}")
        weights = validate_weights(self.weights, "key prior")
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls) -> "KeyPrior":
        return cls()

    @classmethod
    def explicit(cls, weights: Sequence[float] | np.ndarray) -> "KeyPrior":
        return cls(PRIOR_EXPLICIT, np.asarray(weights, dtype=float))

    @classmethod
    def point_mass(cls, key: int, key_bits: int) -> "KeyPrior":
        weights = np.zeros(1 << key_bits)
        weights[key] = 1.0
        return cls.explicit(weights)

    @property
    def is_uniform(self) -> bool:
        return self.mode == PRIOR_UNIFORM

    def check_dimension(self, key_bits: int):
        if key_bits < 1:
            raise ConfigurationError(f"key_bits must be >= 1, got {key_bits}")
        if not self.is_uniform and self.weights.size != (1 << key_bits):
            raise ConfigurationError(
                f"key prior has {self.weights.size} weights but the key space "
                f"has 2^{key_bits} = {1 << key_bits} keys"
            )

    def probabilities(self, key_bits: int, start: int = 0, stop: Optional[int] = None) -> np.ndarray:
        self.check_dimension(key_bits)
        stop = (1 << key_bits) if stop is None else stop
        if self.is_uniform:
            return np.full(stop - start, 2.0 ** -key_bits)
        return self.weights[start:stop]

    def log_probabilities(self, key_bits: int, start: int = 0, stop: Optional[int] = None) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.probabilities(key_bits, start, stop))


def validate_weights(weights, what: str) -> np.ndarray:
    arr = np.array(weights, dtype=float).reshape(-1)
    if arr.size == 0:
        raise ConfigurationError(f"{what} has no weights")
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ConfigurationError(f"{what} weights must be finite and non-negative")
    total = float(np.sum(arr))
    if abs(total - 1.0) > PROBABILITY_SUM_TOLERANCE:
        raise ConfigurationError(f"{what} weights sum to {total!r}, expected 1")
    size = arr.size
    if size & (size - 1):
        raise ConfigurationError(f"{what} needs a power-of-two number of weights, got {size}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class KeystreamSpec:
    """How a key expands into a keystream: Fibonacci LFSR, or the key itself (OTP)."""

    mode: str
    taps: Tuple[int, ...] = field(default_factory=tuple)
    output_len: int = 0

    def __post_init__(self):
        if self.mode not in KEYSTREAM_MODES:
            raise ConfigurationError(f"unknown keystream mode {self.mode!r}")
        taps = tuple(sorted({int(t) for t in self.taps}, reverse=True))
        object.__setattr__(self, "taps", taps)
        if self.output_len < 1:
            raise ConfigurationError("keystream output_len must be >= 1")
        if self.mode == MODE_LFSR:
            if not taps:
                raise ConfigurationError("lfsr keystream needs at least one tap")
            if taps[-1] < 1:
                raise ConfigurationError("lfsr taps must be positive")
        elif taps:
            raise ConfigurationError("otp keystream takes no taps")

    @classmethod
    def lfsr(cls, taps: Iterable[int], output_len: int) -> "KeystreamSpec":
        return cls(MODE_LFSR, tuple(taps), output_len)

    @classmethod
    def otp(cls, key_bits: int) -> "KeystreamSpec":
        return cls(MODE_OTP, (), key_bits)

    @classmethod
    def default_lfsr(cls, key_bits: int, output_len: int) -> "KeystreamSpec":
        return cls.lfsr(default_taps(key_bits), output_len)

    @property
    def key_bits(self) -> int:
        return self.taps[0] if self.mode == MODE_LFSR else self.output_len

    def with_output_len(self, output_len: int) -> "KeystreamSpec":
        if self.mode == MODE_OTP:
            raise ConfigurationError("otp keystream length is fixed to the key length")
        return replace(self, output_len=output_len)

    def validate_for(self, key_bits: int):
        if self.mode == MODE_LFSR and self.taps[0] != key_bits:
            raise ConfigurationError(
                f"lfsr taps {list(self.taps)} need a {self.taps[0]}-bit key, got {key_bits} bits"
            )
        if self.mode == MODE_OTP and self.output_len != key_bits:
            raise ConfigurationError(
                f"otp keystream of {self.output_len} bits needs a key of the same length, "
                f"got {key_bits} bits"
            )


def default_taps(key_bits: int) -> Tuple[int, ...]:
    try:
        return DEFAULT_TAPS[key_bits]
    except KeyError:
        raise ConfigurationError(
            f"no default taps for {key_bits}-bit keys (supported: 1..{max(DEFAULT_TAPS)})"
        ) from None


def check_enumerable(key_bits: int, limit_bits: int = MAX_ENUMERATION_KEY_BITS, what: str = "key space"):
    if key_bits > limit_bits:
        raise EnumerationLimitError(
            f"{what} of 2^{key_bits} exceeds the exhaustive enumeration ceiling 2^{limit_bits}"
        )


# -----------------------------------------------------------------------------
# OPERATIONS
# -----------------------------------------------------------------------------

def generate_key(key_bits: int, prior: KeyPrior, rng: np.random.Generator) -> SecretKey:
    """Draw a key from the prior. Deterministic for a given generator state."""
    prior.check_dimension(key_bits)
    if prior.is_uniform:
        return SecretKey(BitSequence.random(key_bits, rng))
    index = int(rng.choice(prior.weights.size, p=prior.weights))
    return SecretKey.from_int(index, key_bits)


def expand_keystream(key: SecretKey, spec: KeystreamSpec) -> BitSequence:
    spec.validate_for(key.key_bits)
    if spec.mode == MODE_OTP:
        return key.bits
    if not key.bits.bits.any():
        raise DegenerateSeedError("an all-zero LFSR seed emits zeros forever")
    rows = _lfsr_rows(key.bits.bits[np.newaxis, :], spec.taps, spec.output_len)
    return BitSequence(rows[0])


def encrypt(plaintext: BitSequence, keystream: BitSequence) -> BitSequence:
    if keystream.length < plaintext.length:
        raise LengthMismatchError(
            f"keystream of {keystream.length} bits cannot cover {plaintext.length} plaintext bits"
        )
    return plaintext ^ keystream[: plaintext.length]


def decrypt(ciphertext: BitSequence, keystream: BitSequence) -> BitSequence:
    # XOR is its own inverse
    return encrypt(ciphertext, keystream)


def lfsr_period(key: SecretKey, spec: KeystreamSpec) -> int:
    """Number of clocks until the register returns to the seed (O(2^key_bits))."""
    if spec.mode != MODE_LFSR:
        raise ConfigurationError("period is only defined for lfsr keystreams")
    spec.validate_for(key.key_bits)
    if not key.bits.bits.any():
        raise DegenerateSeedError("an all-zero LFSR seed has no period")

    length = key.key_bits
    # bit (c - 1) of the state holds register cell c
    seed = int(key.bits.to_string()[::-1], 2)
    tap_bits = [length - t for t in spec.taps]
    state = seed
    period = 0
    while True:
        feedback = 0
        for bit in tap_bits:
            feedback ^= (state >> bit) & 1
        state = (state >> 1) | (feedback << (length - 1))
        period += 1
        if state == seed:
            return period


# -----------------------------------------------------------------------------
# KEY-SPACE TABLES (used by the brute-force machinery)
# -----------------------------------------------------------------------------

def key_matrix(key_bits: int, start: int = 0, stop: Optional[int] = None) -> np.ndarray:
    """Bits of keys start..stop-1 as rows, most significant bit first."""
    stop = (1 << key_bits) if stop is None else stop
    ints = np.arange(start, stop, dtype=np.int64)
    shifts = np.arange(key_bits - 1, -1, -1, dtype=np.int64)
    return ((ints[:, np.newaxis] >> shifts) & 1).astype(np.uint8)


def keystream_block(spec: KeystreamSpec, length: int, start: int, stop: int) -> np.ndarray:
    """Keystream prefixes of `length` bits for keys start..stop-1.

    The all-zero key keeps its degenerate all-zero row so that row index
    equals the integer key encoding across the whole key space.
    """
    if length > spec.output_len and spec.mode == MODE_OTP:
        raise LengthMismatchError(
            f"otp keystream has {spec.output_len} bits, {length} requested"
        )
    seeds = key_matrix(spec.key_bits, start, stop)
    if spec.mode == MODE_OTP:
        return np.ascontiguousarray(seeds[:, :length])
    return _lfsr_rows(seeds, spec.taps, length)


@lru_cache(maxsize=16)
def _cached_table(spec: KeystreamSpec, length: int) -> np.ndarray:
    table = keystream_block(spec, length, 0, 1 << spec.key_bits)
    table.setflags(write=False)
    return table


def keystream_table(spec: KeystreamSpec, length: int) -> np.ndarray:
    """Keystream prefixes for every key; row index is the key's integer encoding."""
    check_enumerable(spec.key_bits)
    if spec.key_bits <= CACHED_TABLE_KEY_BITS:
        return _cached_table(spec, length)
    return keystream_block(spec, length, 0, 1 << spec.key_bits)


def iter_keystream_blocks(
    spec: KeystreamSpec, length: int, block_size: int = KEY_BLOCK_SIZE
) -> Iterator[Tuple[int, np.ndarray]]:
    check_enumerable(spec.key_bits)
    total = 1 << spec.key_bits
    if spec.key_bits <= CACHED_TABLE_KEY_BITS:
        yield 0, _cached_table(spec, length)
        return
    for start in range(0, total, block_size):
        stop = min(start + block_size, total)
        yield start, keystream_block(spec, length, start, stop)


def _lfsr_rows(seeds: np.ndarray, taps: Tuple[int, ...], length: int) -> np.ndarray:
    """Run one Fibonacci LFSR per seed row and return `length` output bits each."""
    count, reg_len = seeds.shape
    # time-major so each recurrence step touches contiguous rows
    out = np.empty((length, count), dtype=np.uint8)
    head = min(reg_len, length)
    out[:head] = seeds[:, :head].T
    for j in range(reg_len, length):
        acc = out[j - taps[0]].copy()
        for t in taps[1:]:
            np.bitwise_xor(acc, out[j - t], out=acc)
        out[j] = acc
    return np.ascontiguousarray(out.T)
