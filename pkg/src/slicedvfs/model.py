"""Processor model: P-states, on/off-chip execution-time scaling, and power.

Execution time at frequency ``f`` splits into an on-chip portion, which
stretches by ``f_max / f``, and an off-chip (memory stall) portion that does
not depend on the core clock.  Power is ``static + k * V^2 * f``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence


class ModelError(ValueError):
    """Raised for invalid processor definitions or out-of-range operating points."""


@dataclass(frozen=True, order=True)
class PState:
    """A (frequency, voltage) operating point. Frequency is an integer in Hz."""

    frequency: int
    voltage: float

    def __post_init__(self) -> None:
        if isinstance(self.frequency, bool) or int(self.frequency) != self.frequency:
            raise ModelError(f"frequency must be an integer number of Hz, got {self.frequency!r}")
        object.__setattr__(self, "frequency", int(self.frequency))
        if self.frequency <= 0:
            raise ModelError(f"frequency must be positive, got {self.frequency}")
        if not self.voltage > 0:
            raise ModelError(f"voltage must be positive, got {self.voltage}")

    @property
    def ghz(self) -> float:
        return self.frequency / 1e9

    def __str__(self) -> str:
        return f"{self.ghz:g} GHz"


@dataclass(frozen=True)
class SliceTiming:
    """On-chip seconds (measured at f_max) and off-chip stall seconds of one slice."""

    t_on: float
    t_off: float

    def __post_init__(self) -> None:
        if not self.t_on >= 0:
            raise ModelError(f"t_on must be non-negative, got {self.t_on}")
        if not self.t_off >= 0:
            raise ModelError(f"t_off must be non-negative, got {self.t_off}")
        if not self.t_on + self.t_off > 0:
            raise ModelError("slice must have positive total time (t_on + t_off > 0)")

    @property
    def off_fraction(self) -> float:
        return self.t_off / (self.t_on + self.t_off)


@dataclass(frozen=True)
class Processor:
    """Available P-states plus the parameters of the power model.

    ``pstates`` is ordered by strictly descending frequency; the first entry is
    f_max.  ``transition_latency`` is the time charged whenever consecutive
    slices run at different frequencies (0 disables it).
    """

    pstates: tuple[PState, ...]
    static_power: float
    dynamic_coefficient: float
    transition_latency: float = 0.0
    name: str = field(default="custom", compare=False)

    def __post_init__(self) -> None:
        pstates = tuple(self.pstates)
        object.__setattr__(self, "pstates", pstates)
        if not pstates:
            raise ModelError("processor needs at least one P-state")
        for hi, lo in zip(pstates, pstates[1:]):
            if not hi.frequency > lo.frequency:
                raise ModelError(
                    f"P-state frequencies must be strictly descending: {hi} then {lo}"
                )
            if lo.voltage > hi.voltage:
                raise ModelError(
                    f"P-state voltages must be non-increasing: {hi.voltage} V then {lo.voltage} V"
                )
        if not self.static_power >= 0:
            raise ModelError(f"static_power must be non-negative, got {self.static_power}")
        if self.dynamic_coefficient < 0:
            raise ModelError(
                f"dynamic_coefficient must be non-negative, got {self.dynamic_coefficient}"
            )
        if not self.transition_latency >= 0:
            raise ModelError(
                f"transition_latency must be non-negative, got {self.transition_latency}"
            )
        # Voltage ordering alone does not guarantee this once rounding is involved.
        powers = [self._raw_power(p) for p in pstates]
        if self.dynamic_coefficient > 0:
            for (p_hi, w_hi), (p_lo, w_lo) in zip(zip(pstates, powers), zip(pstates[1:], powers[1:])):
                if not w_hi > w_lo:
                    raise ModelError(
                        f"power must be strictly increasing with frequency: "
                        f"{p_lo} draws {w_lo} W, {p_hi} draws {w_hi} W"
                    )

    @property
    def f_max(self) -> PState:
        return self.pstates[0]

    @property
    def f_min(self) -> PState:
        return self.pstates[-1]

    @property
    def frequencies(self) -> tuple[int, ...]:
        return tuple(p.frequency for p in self.pstates)

    def pstate(self, frequency: int) -> PState:
        """Look up the P-state with exactly this frequency (Hz)."""
        for p in self.pstates:
            if p.frequency == frequency:
                return p
        raise ModelError(
            f"no P-state at {frequency} Hz; available: {', '.join(str(p) for p in self.pstates)}"
        )

    def __contains__(self, p: object) -> bool:
        return p in self.pstates

    def _raw_power(self, p: PState) -> float:
        return self.static_power + self.dynamic_coefficient * p.voltage**2 * p.frequency

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "static_power": self.static_power,
            "dynamic_coefficient": self.dynamic_coefficient,
            "transition_latency": self.transition_latency,
            "pstates": [{"frequency_hz": p.frequency, "voltage": p.voltage} for p in self.pstates],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Processor":
        try:
            pstates = tuple(
                PState(int(entry["frequency_hz"]), float(entry["voltage"]))
                for entry in data["pstates"]
            )
            return cls(
                pstates=pstates,
                static_power=float(data["static_power"]),
                dynamic_coefficient=float(data["dynamic_coefficient"]),
                transition_latency=float(data.get("transition_latency", 0.0)),
                name=str(data.get("name", "custom")),
            )
        except KeyError as exc:
            raise ModelError(f"processor config is missing key {exc}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ModelError):
                raise
            raise ModelError(f"invalid processor config: {exc}") from None


def slice_duration(timing: SliceTiming, f: PState, f_max: PState) -> float:
    """Seconds the slice takes at ``f``: ``t_on * f_max / f + t_off``."""
    if f.frequency <= 0:
        raise ModelError("frequency must be positive")
    if f.frequency > f_max.frequency:
        raise ModelError(f"{f} exceeds f_max {f_max}")
    if f.frequency == f_max.frequency:
        return timing.t_on + timing.t_off
    return timing.t_on * (f_max.frequency / f.frequency) + timing.t_off


def power(proc: Processor, p: PState) -> float:
    """Package power in watts while running at ``p``."""
    if p not in proc.pstates:
        raise ModelError(f"{p} is not one of the processor's P-states")
    return proc._raw_power(p)


def slice_energy(proc: Processor, timing: SliceTiming, f: PState, f_max: PState | None = None) -> float:
    """Joules consumed by one slice at ``f``."""
    if f_max is None:
        f_max = proc.f_max
    return power(proc, f) * slice_duration(timing, f, f_max)


# Defaults for the modeled quad-core desktop.  The frequency ladder matches the
# 2.4-1.2 GHz range of that platform; voltages and power coefficients are
# modeling choices, not measured values.  Power covers the whole platform as
# seen at the wall, so a large frequency-independent share is expected.
DEFAULT_FREQUENCIES_HZ = (2_400_000_000, 2_200_000_000, 1_600_000_000, 1_200_000_000)
DEFAULT_VOLTAGES = (1.300, 1.250, 1.100, 1.000)
DEFAULT_STATIC_POWER = 120.0
DEFAULT_DYNAMIC_POWER_AT_FMAX = 35.0
DEFAULT_DYNAMIC_COEFFICIENT = DEFAULT_DYNAMIC_POWER_AT_FMAX / (
    DEFAULT_VOLTAGES[0] ** 2 * DEFAULT_FREQUENCIES_HZ[0]
)


def default_processor(transition_latency: float = 0.0) -> Processor:
    return Processor(
        pstates=tuple(PState(f, v) for f, v in zip(DEFAULT_FREQUENCIES_HZ, DEFAULT_VOLTAGES)),
        static_power=DEFAULT_STATIC_POWER,
        dynamic_coefficient=DEFAULT_DYNAMIC_COEFFICIENT,
        transition_latency=transition_latency,
        name="core2-quad-q6600",
    )


def make_processor(
    frequencies_hz: Sequence[int],
    voltages: Iterable[float],
    static_power: float,
    dynamic_coefficient: float,
    transition_latency: float = 0.0,
) -> Processor:
    pstates = tuple(PState(int(f), float(v)) for f, v in zip(frequencies_hz, voltages, strict=True))
    return Processor(pstates, static_power, dynamic_coefficient, transition_latency)


def load_processor(path) -> Processor:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    try:
        return Processor.from_dict(data)
    except ModelError as exc:
        raise ModelError(f"{path}: {exc}") from None


def dump_processor(proc: Processor) -> str:
    return json.dumps(proc.to_dict(), indent=2) + "\n"
