# experiment_config.py
"""
Experiment configuration: one JSON file per experiment.

Every section has documented defaults (see README.md), so `{}` is a valid
configuration. Loading validates the whole file and reports every problem at
once as `section.field: constraint`.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Mapping, Optional, Tuple

from cipher_core import (
    DEFAULT_TAPS,
    KEYSTREAM_MODES,
    MODE_LFSR,
    MODE_OTP,
    KeyPrior,
    KeystreamSpec,
)
from errors import ConfigParseError, ConfigurationError, ConfigValidationError
from quantum_channel import DEFAULT_ADVANTAGE_THRESHOLD, QI_FIELDS, QIParams, qi_param_problems

OUTPUT_FORMATS = ("json", "csv")
REDUCED_QI_FIELDS = ("A", "kappa_s", "N_S")
DEFAULT_QI = {"A": 1e6, "kappa_s": 0.2, "N_S": 0.005}
DEFAULT_KNOWN_PLAINTEXT_LEN = 64
DEFAULT_TRIALS = 100
DEFAULT_P_ALICE_CONSTRAINT = 0.4


class _Problems:
    """Collects validation problems while sections are parsed."""

    def __init__(self):
        self.items: List[str] = []

    def add(self, path: str, constraint: str):
        self.items.append(f"{path}: {constraint}")

    def unknown_keys(self, section: str, raw: Mapping, allowed: Tuple[str, ...]):
        for key in raw:
            if key not in allowed:
                self.add(f"{section}.{key}", "unknown field")

    def integer(self, path: str, value: Any, minimum: Optional[int] = None) -> Optional[int]:
        if isinstance(value, bool) or not isinstance(value, int):
            self.add(path, "must be an integer")
            return None
        if minimum is not None and value < minimum:
            self.add(path, f"{path} >= {minimum}")
            return None
        return value

    def number(self, path: str, value: Any) -> Optional[float]:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.add(path, "must be a number")
            return None
        return float(value)


def _section(raw: Mapping, name: str, problems: _Problems) -> Mapping:
    value = raw.get(name, {})
    if value is None:
        return {}
    if not isinstance(value, Mapping):
        problems.add(name, "must be an object")
        return {}
    return value


@dataclass
class CipherSection:
    key_bits: int = 8
    mode: str = MODE_LFSR
    taps: Tuple[int, ...] = DEFAULT_TAPS[8]
    key_prior: Optional[List[float]] = None

    FIELDS = ("key_bits", "mode", "taps", "key_prior")

    @classmethod
    def from_dict(cls, raw: Mapping, problems: _Problems) -> "CipherSection":
        problems.unknown_keys("cipher", raw, cls.FIELDS)
        key_bits = problems.integer("cipher.key_bits", raw.get("key_bits", 8), minimum=1) or 8
        mode = raw.get("mode", MODE_LFSR)
        if mode not in KEYSTREAM_MODES:
            problems.add("cipher.mode", f"one of {list(KEYSTREAM_MODES)}")
            mode = MODE_LFSR

        taps: Tuple[int, ...] = ()
        if mode == MODE_LFSR:
            if "taps" in raw:
                raw_taps = raw["taps"]
                if not isinstance(raw_taps, list) or not raw_taps or not all(
                    isinstance(t, int) and not isinstance(t, bool) and t >= 1 for t in raw_taps
                ):
                    problems.add("cipher.taps", "non-empty list of positive integers")
                elif max(raw_taps) != key_bits:
                    problems.add("cipher.taps", f"max(taps) == cipher.key_bits ({key_bits})")
                else:
                    taps = tuple(raw_taps)
            elif key_bits in DEFAULT_TAPS:
                taps = DEFAULT_TAPS[key_bits]
            else:
                problems.add("cipher.taps", f"required for key_bits > {max(DEFAULT_TAPS)}")
        elif raw.get("taps"):
            problems.add("cipher.taps", "not allowed in otp mode")

        key_prior = raw.get("key_prior")
        if key_prior is not None:
            if not isinstance(key_prior, list):
                problems.add("cipher.key_prior", "list of 2^key_bits weights or null")
                key_prior = None
            else:
                try:
                    KeyPrior.explicit(key_prior).check_dimension(key_bits)
                except (ConfigurationError, TypeError, ValueError) as e:
                    problems.add("cipher.key_prior", str(e))
                    key_prior = None
        return cls(key_bits=key_bits, mode=mode, taps=taps, key_prior=key_prior)

    def keystream_spec(self, output_len: int) -> KeystreamSpec:
        if self.mode == MODE_OTP:
            return KeystreamSpec.otp(self.key_bits)
        return KeystreamSpec.lfsr(self.taps, output_len)

    def prior(self) -> KeyPrior:
        return KeyPrior.uniform() if self.key_prior is None else KeyPrior.explicit(self.key_prior)

    def to_dict(self) -> dict:
        return {
            "key_bits": self.key_bits,
            "mode": self.mode,
            "taps": list(self.taps),
            "key_prior": self.key_prior,
        }


@dataclass
class QISection:
    values: Dict[str, float] = field(default_factory=lambda: dict(DEFAULT_QI))

    @classmethod
    def from_dict(cls, raw: Mapping, problems: _Problems) -> "QISection":
        if not raw:
            return cls()
        problems.unknown_keys("qi", raw, QI_FIELDS + ("A",))
        has_full_only = any(k in raw for k in ("W", "R", "G_B", "N_B"))
        if "A" in raw and has_full_only:
            problems.add(
                "qi",
                "exactly one of full (W, R, kappa_s, G_B, N_S, N_B) or reduced (A, kappa_s, N_S) "
                "parameterization; A and W/R/G_B/N_B are mutually exclusive",
            )
            return cls()
        required = REDUCED_QI_FIELDS if "A" in raw else QI_FIELDS
        values: Dict[str, float] = {}
        for name in required:
            if name not in raw:
                problems.add(f"qi.{name}", "required")
                continue
            number = problems.number(f"qi.{name}", raw[name])
            if number is not None:
                values[name] = number
        if len(values) != len(required):
            return cls()
        problems.items.extend(qi_param_problems(values, prefix="qi."))
        if "A" in values and not values["A"] > 0:
            problems.add("qi.A", "qi.A > 0")
        return cls(values=values)

    @property
    def reduced(self) -> bool:
        return "A" in self.values

    def params(self) -> QIParams:
        if self.reduced:
            return QIParams.from_reduced(self.values["A"], self.values["kappa_s"], self.values["N_S"])
        return QIParams(**self.values)

    def to_dict(self) -> dict:
        return dict(self.values)


@dataclass
class AttackSection:
    known_plaintext_len: int = DEFAULT_KNOWN_PLAINTEXT_LEN
    plaintext_len: int = DEFAULT_KNOWN_PLAINTEXT_LEN
    trials: int = DEFAULT_TRIALS
    paired_seeds: bool = False
    p_alice: Optional[float] = None
    p_eve: Optional[float] = None
    p_eve_sweep: Optional[List[float]] = None
    threshold: float = DEFAULT_ADVANTAGE_THRESHOLD

    FIELDS = (
        "known_plaintext_len",
        "plaintext_len",
        "trials",
        "paired_seeds",
        "p_alice",
        "p_eve",
        "p_eve_sweep",
        "threshold",
    )

    @classmethod
    def from_dict(cls, raw: Mapping, problems: _Problems, cipher: CipherSection) -> "AttackSection":
        problems.unknown_keys("attack", raw, cls.FIELDS)
        default_known = cipher.key_bits if cipher.mode == MODE_OTP else DEFAULT_KNOWN_PLAINTEXT_LEN
        known = problems.integer(
            "attack.known_plaintext_len", raw.get("known_plaintext_len", default_known), minimum=0
        )
        known = default_known if known is None else known
        plaintext_len = problems.integer(
            "attack.plaintext_len", raw.get("plaintext_len", max(known, 1)), minimum=1
        ) or max(known, 1)
        if known > plaintext_len:
            problems.add("attack.known_plaintext_len", "attack.known_plaintext_len <= attack.plaintext_len")
        if cipher.mode == MODE_OTP and plaintext_len > cipher.key_bits:
            problems.add("attack.plaintext_len", "attack.plaintext_len <= cipher.key_bits in otp mode")
        trials = problems.integer("attack.trials", raw.get("trials", DEFAULT_TRIALS), minimum=1) or DEFAULT_TRIALS

        paired = raw.get("paired_seeds", False)
        if not isinstance(paired, bool):
            problems.add("attack.paired_seeds", "must be true or false")
            paired = False

        overrides = {}
        for name in ("p_alice", "p_eve"):
            if raw.get(name) is None:
                continue
            value = problems.number(f"attack.{name}", raw[name])
            if value is not None and not 0.0 <= value <= 0.5:
                problems.add(f"attack.{name}", f"attack.{name} ∈ [0,0.5]")
            overrides[name] = value
        if len(overrides) == 1:
            problems.add("attack", "p_alice and p_eve must be given together")

        sweep = raw.get("p_eve_sweep")
        if sweep is not None:
            if not isinstance(sweep, list) or not sweep or not all(
                isinstance(p, (int, float)) and not isinstance(p, bool) and 0.0 <= p <= 0.5 for p in sweep
            ):
                problems.add("attack.p_eve_sweep", "non-empty list of probabilities in [0,0.5]")
                sweep = None
            else:
                sweep = [float(p) for p in sweep]

        threshold = problems.number("attack.threshold", raw.get("threshold", DEFAULT_ADVANTAGE_THRESHOLD))
        if threshold is not None and not threshold > 1:
            problems.add("attack.threshold", "attack.threshold > 1")

        return cls(
            known_plaintext_len=known,
            plaintext_len=plaintext_len,
            trials=trials,
            paired_seeds=paired,
            p_alice=overrides.get("p_alice"),
            p_eve=overrides.get("p_eve"),
            p_eve_sweep=sweep,
            threshold=threshold if threshold is not None else DEFAULT_ADVANTAGE_THRESHOLD,
        )

    @property
    def channel_override(self) -> Optional[Tuple[float, float]]:
        if self.p_alice is None or self.p_eve is None:
            return None
        return self.p_alice, self.p_eve

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.FIELDS}


@dataclass
class SweepSection:
    ranges: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    constraint_p_alice_max: float = DEFAULT_P_ALICE_CONSTRAINT

    @classmethod
    def from_dict(cls, raw: Mapping, problems: _Problems, qi: QISection) -> "SweepSection":
        problems.unknown_keys("sweep", raw, ("ranges", "constraint_p_alice_max"))
        constraint = problems.number(
            "sweep.constraint_p_alice_max", raw.get("constraint_p_alice_max", DEFAULT_P_ALICE_CONSTRAINT)
        )
        if constraint is not None and not 0.0 < constraint < 0.5:
            problems.add("sweep.constraint_p_alice_max", "sweep.constraint_p_alice_max ∈ (0,0.5)")
        ranges = raw.get("ranges", {})
        if not isinstance(ranges, Mapping):
            problems.add("sweep.ranges", "must be an object")
            ranges = {}
        allowed = REDUCED_QI_FIELDS if qi.reduced else QI_FIELDS
        for name, spec in ranges.items():
            if name not in allowed:
                problems.add(f"sweep.ranges.{name}", f"one of {list(allowed)} for this qi parameterization")
            elif not isinstance(spec, Mapping) or not (
                "values" in spec or {"min", "max", "steps"} <= set(spec)
            ):
                problems.add(f"sweep.ranges.{name}", "{min, max, steps[, scale]} or {values}")
        return cls(
            ranges=dict(ranges),
            constraint_p_alice_max=constraint if constraint is not None else DEFAULT_P_ALICE_CONSTRAINT,
        )

    def to_dict(self) -> dict:
        return {"ranges": self.ranges, "constraint_p_alice_max": self.constraint_p_alice_max}


@dataclass
class MessageSection:
    plaintext: Optional[str] = None
    ciphertext: Optional[str] = None
    key: Optional[str] = None
    key_hex: Optional[str] = None

    FIELDS = ("plaintext", "ciphertext", "key", "key_hex")

    @classmethod
    def from_dict(cls, raw: Mapping, problems: _Problems) -> "MessageSection":
        problems.unknown_keys("message", raw, cls.FIELDS)
        values = {}
        for name in ("plaintext", "ciphertext", "key"):
            value = raw.get(name)
            if value is not None and (not isinstance(value, str) or any(c not in "01" for c in value)):
                problems.add(f"message.{name}", "string of '0'/'1' characters")
                value = None
            values[name] = value
        key_hex = raw.get("key_hex")
        if key_hex is not None:
            if values["key"] is not None:
                problems.add("message", "give key or key_hex, not both")
            if not isinstance(key_hex, str):
                problems.add("message.key_hex", "hexadecimal string")
                key_hex = None
            else:
                try:
                    int(key_hex, 16)
                except ValueError:
                    problems.add("message.key_hex", "hexadecimal string")
                    key_hex = None
        return cls(key_hex=key_hex, **values)

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.FIELDS}


@dataclass
class SecrecySection:
    message_bits: int = 4
    message_prior: Optional[List[float]] = None
    tolerance: float = 1e-12
    trace_distance: Optional[float] = None

    FIELDS = ("message_bits", "message_prior", "tolerance", "trace_distance")

    @classmethod
    def from_dict(cls, raw: Mapping, problems: _Problems, cipher: CipherSection) -> "SecrecySection":
        problems.unknown_keys("secrecy", raw, cls.FIELDS)
        default_bits = min(cipher.key_bits, 4) if cipher.mode == MODE_LFSR else cipher.key_bits
        bits = problems.integer("secrecy.message_bits", raw.get("message_bits", default_bits), minimum=1)
        bits = default_bits if bits is None else bits
        if cipher.mode == MODE_OTP and bits > cipher.key_bits:
            problems.add("secrecy.message_bits", "secrecy.message_bits <= cipher.key_bits in otp mode")

        prior = raw.get("message_prior")
        if prior is not None and (not isinstance(prior, list) or len(prior) != (1 << bits)):
            problems.add("secrecy.message_prior", f"list of 2^message_bits = {1 << bits} weights or null")
            prior = None

        tolerance = problems.number("secrecy.tolerance", raw.get("tolerance", 1e-12))
        if tolerance is not None and tolerance < 0:
            problems.add("secrecy.tolerance", "secrecy.tolerance >= 0")

        distance = raw.get("trace_distance")
        if distance is not None:
            distance = problems.number("secrecy.trace_distance", distance)
            if distance is not None and not 0.0 <= distance <= 1.0:
                problems.add("secrecy.trace_distance", "secrecy.trace_distance ∈ [0,1]")
        return cls(
            message_bits=bits,
            message_prior=prior,
            tolerance=tolerance if tolerance is not None else 1e-12,
            trace_distance=distance,
        )

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.FIELDS}


@dataclass
class OutputSection:
    format: str = "json"
    path: Optional[str] = None

    @classmethod
    def from_dict(cls, raw: Mapping, problems: _Problems) -> "OutputSection":
        problems.unknown_keys("output", raw, ("format", "path"))
        fmt = raw.get("format", "json")
        if fmt not in OUTPUT_FORMATS:
            problems.add("output.format", f"one of {list(OUTPUT_FORMATS)}")
            fmt = "json"
        path = raw.get("path")
        if path is not None and not isinstance(path, str):
            problems.add("output.path", "must be a string")
            path = None
        return cls(format=fmt, path=path)

    def to_dict(self) -> dict:
        return {"format": self.format, "path": self.path}


@dataclass
class ExperimentConfig:
    cipher: CipherSection = field(default_factory=CipherSection)
    qi: QISection = field(default_factory=QISection)
    attack: AttackSection = field(default_factory=AttackSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    message: MessageSection = field(default_factory=MessageSection)
    secrecy: SecrecySection = field(default_factory=SecrecySection)
    output: OutputSection = field(default_factory=OutputSection)
    seed: int = 0

    SECTIONS = ("cipher", "qi", "attack", "sweep", "message", "secrecy", "output", "seed")

    @staticmethod
    def from_dict(data: Mapping) -> "ExperimentConfig":
        if not isinstance(data, Mapping):
            raise ConfigValidationError(["<root>: must be a JSON object"])
        problems = _Problems()
        problems.unknown_keys("<root>", data, ExperimentConfig.SECTIONS)

        cipher = CipherSection.from_dict(_section(data, "cipher", problems), problems)
        qi = QISection.from_dict(_section(data, "qi", problems), problems)
        attack = AttackSection.from_dict(_section(data, "attack", problems), problems, cipher)
        sweep = SweepSection.from_dict(_section(data, "sweep", problems), problems, qi)
        message = MessageSection.from_dict(_section(data, "message", problems), problems)
        secrecy = SecrecySection.from_dict(_section(data, "secrecy", problems), problems, cipher)
        output = OutputSection.from_dict(_section(data, "output", problems), problems)
        seed = problems.integer("seed", data.get("seed", 0), minimum=0)

        if problems.items:
            raise ConfigValidationError(problems.items)
        return ExperimentConfig(
            cipher=cipher,
            qi=qi,
            attack=attack,
            sweep=sweep,
            message=message,
            secrecy=secrecy,
            output=output,
            seed=seed,
        )

    def to_dict(self) -> dict:
        return {
            "cipher": self.cipher.to_dict(),
            "qi": self.qi.to_dict(),
            "attack": self.attack.to_dict(),
            "sweep": self.sweep.to_dict(),
            "message": self.message.to_dict(),
            "secrecy": self.secrecy.to_dict(),
            "output": self.output.to_dict(),
            "seed": self.seed,
        }

    def with_overrides(
        self,
        seed: Optional[int] = None,
        out: Optional[str] = None,
        fmt: Optional[str] = None,
        trials: Optional[int] = None,
        threshold: Optional[float] = None,
    ) -> "ExperimentConfig":
        """Command-line flags win over file values."""
        problems = []
        if seed is not None and seed < 0:
            problems.append("--seed: must be >= 0")
        if fmt is not None and fmt not in OUTPUT_FORMATS:
            problems.append(f"--format: one of {list(OUTPUT_FORMATS)}")
        if trials is not None and trials < 1:
            problems.append("--trials: must be >= 1")
        if threshold is not None and not threshold > 1:
            problems.append("--threshold: must be > 1")
        if problems:
            raise ConfigValidationError(problems)

        config = self
        if seed is not None:
            config = replace(config, seed=seed)
        if out is not None or fmt is not None:
            config = replace(
                config,
                output=OutputSection(
                    format=fmt or config.output.format,
                    path=out if out is not None else config.output.path,
                ),
            )
        if trials is not None or threshold is not None:
            config = replace(
                config,
                attack=replace(
                    config.attack,
                    trials=trials if trials is not None else config.attack.trials,
                    threshold=threshold if threshold is not None else config.attack.threshold,
                ),
            )
        return config


def load_config(path: str) -> ExperimentConfig:
    """Read and validate an experiment file."""
    if not os.path.exists(path):
        raise ConfigParseError(path, "file not found")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigParseError(path, e.msg, line=e.lineno, column=e.colno) from e
    except OSError as e:
        raise ConfigParseError(path, str(e)) from e
    return ExperimentConfig.from_dict(data)
