# quantum_channel.py
"""
Physical randomization layer.

Closed-form receiver error probabilities for the quantum-illumination link,
their ratio and its grid maximization, and the binary symmetric channel that
turns an error probability into noisy received ciphertext.

The two error formulas depend on the six physical parameters only through
A = W * G_B / (R * N_B), kappa_s and N_S:

    P_e(Eve)   = exp(-4 * A * kappa_s * N_S**2) / 2
    P_e(Alice) = exp(-A * kappa_s**3 * N_S) / 2
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Callable, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from cipher_core import BitSequence
from errors import ConfigurationError, DomainError, NoFeasiblePointError

LogCallback = Callable[[str], None]

QI_FIELDS = ("W", "R", "kappa_s", "G_B", "N_S", "N_B")
DEFAULT_MODES_PER_BIT_WARNING = 1.0
DEFAULT_ADVANTAGE_THRESHOLD = 1e3


def _log(log_callback: Optional[LogCallback], message: str):
    if log_callback is not None:
        log_callback(message)


class Receiver(str, Enum):
    ALICE = "alice"
    EVE = "eve"
    BOB_IDEAL = "bob-ideal"


@dataclass(frozen=True)
class QIParams:
    """
    Physical parameters of the quantum-illumination link.

    W: bandwidth (Hz), R: bit rate (bit/s), kappa_s: channel transmissivity,
    G_B: amplifier gain, N_S: source photons per mode, N_B: amplifier noise
    photons.
    """

    W: float
    R: float
    kappa_s: float
    G_B: float
    N_S: float
    N_B: float

    def __post_init__(self):
        problems = qi_param_problems(asdict(self))
        if problems:
            raise ConfigurationError("; ".join(problems))

    @classmethod
    def from_reduced(cls, A: float, kappa_s: float, N_S: float) -> "QIParams":
        """Parameters realizing amplification group A with R = G_B = N_B = 1."""
        if not A > 0:
            raise ConfigurationError(f"A must be > 0, got {A}")
        return cls(W=A, R=1.0, kappa_s=kappa_s, G_B=1.0, N_S=N_S, N_B=1.0)

    @property
    def amplification(self) -> float:
        return self.W * self.G_B / (self.R * self.N_B)

    @property
    def modes_per_bit(self) -> float:
        return self.W / self.R

    def to_dict(self) -> dict:
        data = asdict(self)
        data["A"] = self.amplification
        return data


def qi_param_problems(values: Mapping[str, float], prefix: str = "") -> List[str]:
    """Every range violation in a parameter mapping, as 'field: constraint' strings."""
    rules = {
        "W": (lambda v: v > 0, "W > 0"),
        "R": (lambda v: v > 0, "R > 0"),
        "kappa_s": (lambda v: 0 < v <= 1, "kappa_s ∈ (0,1]"),
        "G_B": (lambda v: v >= 1, "G_B >= 1"),
        "N_S": (lambda v: v >= 0, "N_S >= 0"),
        "N_B": (lambda v: v > 0, "N_B > 0"),
    }
    problems = []
    for name, (ok, text) in rules.items():
        if name not in values:
            continue
        value = values[name]
        if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
            problems.append(f"{prefix}{name}: must be a finite number")
        elif not ok(value):
            problems.append(f"{prefix}{name}: {prefix}{text}")
    return problems


def check_modes_per_bit(
    params: QIParams,
    threshold: float = DEFAULT_MODES_PER_BIT_WARNING,
    log_callback: Optional[LogCallback] = None,
) -> bool:
    """Non-fatal sanity check W/R >= threshold; logs a warning when it fails."""
    if params.modes_per_bit >= threshold:
        return True
    _log(
        log_callback,
        f"WARNING: W/R = {params.modes_per_bit:.3g} modes per bit is below {threshold:g}",
    )
    return False


@dataclass
class ChannelObservation:
    bits: BitSequence
    crossover_p: float
    flip_count: int
    receiver: Receiver
    sent: Optional[BitSequence] = None

    def to_dict(self) -> dict:
        return {
            "bits": self.bits.to_string(),
            "crossover_p": self.crossover_p,
            "flip_count": self.flip_count,
            "receiver": self.receiver.value,
        }


@dataclass
class EtaReport:
    eta: float
    ln_eta: float
    p_eve: float
    p_alice: float
    params: QIParams

    def to_dict(self) -> dict:
        return {
            "eta": self.eta,
            "ln_eta": self.ln_eta,
            "p_eve": self.p_eve,
            "p_alice": self.p_alice,
            "params": self.params.to_dict(),
        }


# -----------------------------------------------------------------------------
# ERROR PROBABILITIES
# -----------------------------------------------------------------------------

def error_exponents(params: QIParams) -> Tuple[float, float]:
    """Natural-log exponents (ln 2P_e(Eve), ln 2P_e(Alice)), in extended precision."""
    W, R, k, G, ns, nb = (np.longdouble(getattr(params, f)) for f in QI_FIELDS)
    eve = -4 * W * k * G * ns * ns / (R * nb)
    alice = -W * k ** 3 * G * ns / (R * nb)
    return float(eve), float(alice)


def eve_error_probability(params: QIParams) -> float:
    return 0.5 * math.exp(error_exponents(params)[0])


def alice_error_probability(params: QIParams) -> float:
    return 0.5 * math.exp(error_exponents(params)[1])


def error_ratio(params: QIParams) -> EtaReport:
    """eta = P_e(Eve) / P_e(Alice), taken from the difference of the two exponents."""
    A = np.longdouble(params.W) * np.longdouble(params.G_B) / (
        np.longdouble(params.R) * np.longdouble(params.N_B)
    )
    k = np.longdouble(params.kappa_s)
    ns = np.longdouble(params.N_S)
    ln_eta = float(A * k * ns * (k * k - 4 * ns))
    return EtaReport(
        eta=_safe_exp(ln_eta),
        ln_eta=ln_eta,
        p_eve=eve_error_probability(params),
        p_alice=alice_error_probability(params),
        params=params,
    )


def params_for_error_targets(p_alice: float, p_eve: float, kappa_s: float = 1.0) -> QIParams:
    """Reduced parameters whose closed forms give the requested error pair."""
    for name, p in (("p_alice", p_alice), ("p_eve", p_eve)):
        if not 0.0 < p < 0.5:
            raise DomainError(f"{name} must lie in (0, 0.5) to be realizable, got {p}")
    alice_rate = -math.log(2 * p_alice)
    eve_rate = -math.log(2 * p_eve)
    N_S = kappa_s ** 2 * eve_rate / (4 * alice_rate)
    A = alice_rate / (kappa_s ** 3 * N_S)
    return QIParams.from_reduced(A, kappa_s, N_S)


def _safe_exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


# -----------------------------------------------------------------------------
# GRID SEARCH
# -----------------------------------------------------------------------------

@dataclass(frozen=True)
class ParameterRange:
    values: Tuple[float, ...]

    def __post_init__(self):
        if not self.values:
            raise ConfigurationError("a parameter range needs at least one value")
        object.__setattr__(self, "values", tuple(sorted(float(v) for v in self.values)))

    @classmethod
    def linear(cls, lo: float, hi: float, steps: int) -> "ParameterRange":
        return cls._spaced(lo, hi, steps, "linear")

    @classmethod
    def from_dict(cls, raw: Mapping) -> "ParameterRange":
        if "values" in raw:
            return cls(tuple(raw["values"]))
        try:
            lo, hi, steps = raw["min"], raw["max"], int(raw["steps"])
        except KeyError as e:
            raise ConfigurationError(f"parameter range is missing {e.args[0]!r}") from None
        return cls._spaced(lo, hi, steps, raw.get("scale", "linear"))

    @classmethod
    def _spaced(cls, lo: float, hi: float, steps: int, scale: str) -> "ParameterRange":
        if steps < 1:
            raise ConfigurationError(f"steps must be >= 1, got {steps}")
        if hi < lo:
            raise ConfigurationError(f"range max {hi} is below min {lo}")
        if scale == "linear":
            values = np.linspace(lo, hi, steps)
        elif scale == "log":
            if lo <= 0:
                raise ConfigurationError("log-scaled ranges need min > 0")
            values = np.geomspace(lo, hi, steps)
        else:
            raise ConfigurationError(f"unknown range scale {scale!r}")
        return cls(tuple(float(v) for v in values))

    def to_dict(self) -> dict:
        return {"values": list(self.values)}


@dataclass
class QIGrid:
    """Ranges for some QIParams fields; the rest stay at `base`."""

    base: QIParams
    ranges: Dict[str, ParameterRange] = field(default_factory=dict)

    def __post_init__(self):
        unknown = set(self.ranges) - set(QI_FIELDS)
        if unknown:
            raise ConfigurationError(f"unknown grid parameters: {sorted(unknown)}")

    @classmethod
    def from_dict(cls, raw: Mapping[str, Mapping], base: QIParams) -> "QIGrid":
        ranges = {}
        for name, spec in raw.items():
            rng = ParameterRange.from_dict(spec)
            if name == "A":
                # A = W G_B / (R N_B): sweep W with the base R, G_B, N_B fixed
                scale = base.R * base.N_B / base.G_B
                rng = ParameterRange(tuple(v * scale for v in rng.values))
                name = "W"
            ranges[name] = rng
        return cls(base=base, ranges=ranges)

    @property
    def size(self) -> int:
        return math.prod(len(r.values) for r in self.ranges.values())

    def points(self) -> Iterator[QIParams]:
        """Grid points in lexicographic order of (W, R, kappa_s, G_B, N_S, N_B)."""
        names = [f for f in QI_FIELDS if f in self.ranges]
        axes = [self.ranges[f].values for f in names]
        for combo in itertools.product(*axes):
            yield replace(self.base, **dict(zip(names, combo)))


@dataclass
class SweepPoint:
    params: QIParams
    p_alice: float
    p_eve: float
    ln_eta: float
    eta: float
    feasible: bool

    def to_row(self) -> dict:
        row = {name: getattr(self.params, name) for name in QI_FIELDS}
        row.update(
            A=self.params.amplification,
            p_alice=self.p_alice,
            p_eve=self.p_eve,
            ln_eta=self.ln_eta,
            eta=self.eta,
            feasible=self.feasible,
        )
        return row


def _check_constraint(constraint_p_alice_max: float):
    if not 0.0 < constraint_p_alice_max < 0.5:
        raise DomainError(
            f"p_alice constraint must lie in (0, 0.5), got {constraint_p_alice_max}"
        )


def sweep_eta(
    grid: QIGrid,
    constraint_p_alice_max: float,
    log_callback: Optional[LogCallback] = None,
) -> List[SweepPoint]:
    _check_constraint(constraint_p_alice_max)
    _log(log_callback, f"Sweeping {grid.size} grid points...")
    points = []
    for params in grid.points():
        report = error_ratio(params)
        points.append(
            SweepPoint(
                params=params,
                p_alice=report.p_alice,
                p_eve=report.p_eve,
                ln_eta=report.ln_eta,
                eta=report.eta,
                feasible=report.p_alice <= constraint_p_alice_max,
            )
        )
    return points


def optimize_eta(
    grid: QIGrid,
    constraint_p_alice_max: float,
    log_callback: Optional[LogCallback] = None,
    points: Optional[Sequence[SweepPoint]] = None,
) -> EtaReport:
    """Grid point with the largest eta among those with p_alice <= constraint.

    Ties keep the first point in grid order.
    """
    if points is None:
        points = sweep_eta(grid, constraint_p_alice_max, log_callback)
    else:
        _check_constraint(constraint_p_alice_max)

    best: Optional[SweepPoint] = None
    for point in points:
        if point.p_alice > constraint_p_alice_max:
            continue
        if best is None or point.ln_eta > best.ln_eta:
            best = point

    if best is None:
        tightest = min(p.p_alice for p in points) if points else None
        raise NoFeasiblePointError(
            f"no grid point satisfies p_alice <= {constraint_p_alice_max}; "
            f"smallest p_alice on the grid is {tightest}",
            best_p_alice=tightest,
        )

    feasible = sum(1 for p in points if p.feasible)
    _log(
        log_callback,
        f"{feasible}/{len(points)} points feasible; best ln(eta) = {best.ln_eta:.6g}",
    )
    return error_ratio(best.params)


# -----------------------------------------------------------------------------
# BINARY SYMMETRIC CHANNEL
# -----------------------------------------------------------------------------

def transmit_bsc(
    sent: BitSequence,
    crossover_p: float,
    rng: np.random.Generator,
    receiver: Receiver = Receiver.EVE,
) -> ChannelObservation:
    """Flip each bit independently with probability crossover_p."""
    if not 0.0 <= crossover_p <= 0.5:
        raise DomainError(f"crossover probability must lie in [0, 0.5], got {crossover_p}")
    flips = rng.random(sent.length) < crossover_p
    received = np.bitwise_xor(sent.bits, flips.astype(np.uint8))
    return ChannelObservation(
        bits=BitSequence(received),
        crossover_p=crossover_p,
        flip_count=int(np.count_nonzero(flips)),
        receiver=Receiver(receiver),
        sent=sent,
    )
