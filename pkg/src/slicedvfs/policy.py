"""Frequency-selection policies.

The governor measures MAPI at the end of every slice, keeps the last ``n``
values, and picks the next slice's frequency by looking the window mean up in
a banded :class:`PolicyTable`.  Static and oracle policies serve as baselines.
"""

from __future__ import annotations

import bisect
import json
import math
import itertools
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .model import ModelError, Processor, PState, slice_duration, slice_energy
from .trace import Trace, mapi


class PolicyError(ValueError):
    pass


class InsufficientHistory(PolicyError):
    pass


@dataclass(frozen=True)
class PolicyTable:
    """MAPI bands ``[0, t0], (t0, t1], ..., (t_{k-2}, inf)`` and their P-states."""

    thresholds: tuple[float, ...]
    targets: tuple[PState, ...]

    def __post_init__(self) -> None:
        thresholds = tuple(float(t) for t in self.thresholds)
        targets = tuple(self.targets)
        object.__setattr__(self, "thresholds", thresholds)
        object.__setattr__(self, "targets", targets)
        if not thresholds:
            raise PolicyError("table needs at least one band")
        if len(thresholds) != len(targets):
            raise PolicyError(
                f"{len(thresholds)} thresholds but {len(targets)} targets; need one target per band"
            )
        if thresholds[-1] != math.inf:
            raise PolicyError("last band must be open-ended (upper bound inf)")
        if any(not t > 0 for t in thresholds):
            raise PolicyError("band upper bounds must be positive")
        for lo, hi in zip(thresholds, thresholds[1:]):
            if not hi > lo:
                raise PolicyError(f"thresholds must be strictly ascending: {lo} then {hi}")
        for a, b in zip(targets, targets[1:]):
            if b.frequency > a.frequency:
                raise PolicyError(
                    f"target frequencies must not rise with MAPI: {a} then {b}"
                )

    def __len__(self) -> int:
        return len(self.thresholds)

    def band(self, m: float) -> int:
        if not m >= 0:
            raise PolicyError(f"MAPI must be non-negative, got {m}")
        return bisect.bisect_left(self.thresholds, m)

    def check_processor(self, proc: Processor) -> None:
        for p in self.targets:
            if p not in proc.pstates:
                raise PolicyError(f"table target {p} ({p.voltage} V) is not a P-state of the processor")

    def to_dict(self) -> dict[str, Any]:
        return {
            "bands": [
                {
                    "upper_bound_mapi": "inf" if math.isinf(t) else t,
                    "frequency_hz": p.frequency,
                }
                for t, p in zip(self.thresholds, self.targets)
            ]
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], proc: Processor) -> "PolicyTable":
        try:
            bands = data["bands"]
            thresholds = [
                math.inf if str(b["upper_bound_mapi"]).lower() == "inf" else float(b["upper_bound_mapi"])
                for b in bands
            ]
            targets = [proc.pstate(int(b["frequency_hz"])) for b in bands]
        except KeyError as exc:
            raise PolicyError(f"table config is missing key {exc}") from None
        except ModelError as exc:
            raise PolicyError(f"table config: {exc}") from None
        except (TypeError, ValueError) as exc:
            raise PolicyError(f"invalid table config: {exc}") from None
        return cls(tuple(thresholds), tuple(targets))


# MAPI upper bounds of the published table; the last band is open-ended.
DEFAULT_THRESHOLDS = (0.004, 0.01, 0.04, math.inf)
DEFAULT_FREQUENCIES_HZ = (2_400_000_000, 2_200_000_000, 1_600_000_000, 1_200_000_000)


def default_table(proc: Processor) -> PolicyTable:
    try:
        targets = tuple(proc.pstate(f) for f in DEFAULT_FREQUENCIES_HZ)
    except ModelError as exc:
        raise PolicyError(f"default table needs the 2.4/2.2/1.6/1.2 GHz ladder: {exc}") from None
    return PolicyTable(DEFAULT_THRESHOLDS, targets)


def load_table(path, proc: Processor) -> PolicyTable:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise PolicyError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    try:
        return PolicyTable.from_dict(data, proc)
    except PolicyError as exc:
        raise PolicyError(f"{path}: {exc}") from None


def dump_table(table: PolicyTable) -> str:
    return json.dumps(table.to_dict(), indent=2) + "\n"


def classify(table: PolicyTable, m: float) -> PState:
    """P-state for the band containing ``m`` (bands are right-closed)."""
    return table.targets[table.band(m)]


# -- moving-average predictor ----------------------------------------------

@dataclass(frozen=True)
class PredictorState:
    """The last ``n`` observed MAPI values, oldest first."""

    n: int
    window: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.n < 1:
            raise PolicyError(f"window length must be >= 1, got {self.n}")
        window = tuple(float(v) for v in self.window)
        if len(window) > self.n:
            raise PolicyError(f"window holds {len(window)} values but capacity is {self.n}")
        if any(not v >= 0 for v in window):
            raise PolicyError("MAPI history values must be non-negative")
        object.__setattr__(self, "window", window)


def observe(state: PredictorState, m: float) -> PredictorState:
    if not m >= 0:
        raise PolicyError(f"MAPI must be non-negative, got {m}")
    window = state.window + (float(m),)
    return PredictorState(state.n, window[-state.n:])


def predict(state: PredictorState) -> float:
    if not state.window:
        raise InsufficientHistory("insufficient history: no MAPI observed yet")
    mean = math.fsum(state.window) / len(state.window)
    return min(max(mean, min(state.window)), max(state.window))


# -- schedules and policies -------------------------------------------------

@dataclass(frozen=True)
class Schedule:
    assignments: tuple[PState, ...]
    policy: str = "custom"

    def __post_init__(self) -> None:
        object.__setattr__(self, "assignments", tuple(self.assignments))

    def __len__(self) -> int:
        return len(self.assignments)

    def __iter__(self):
        return iter(self.assignments)

    def __getitem__(self, i):
        return self.assignments[i]

    @property
    def frequencies(self) -> tuple[int, ...]:
        return tuple(p.frequency for p in self.assignments)

    def validate(self, trace: Trace, proc: Processor) -> None:
        if len(self.assignments) != len(trace):
            raise PolicyError(
                f"schedule has {len(self.assignments)} entries for a trace of {len(trace)} slices"
            )
        for i, p in enumerate(self.assignments):
            if p not in proc.pstates:
                raise PolicyError(f"slice {i}: {p} is not a P-state of the processor")


def governor(
    trace: Trace,
    table: PolicyTable,
    n: int,
    proc: Processor,
    decision_interval: int = 1,
    noise_std: float = 0.0,
    seed: int | None = None,
) -> Schedule:
    """Moving-average MAPI governor.

    Slice 0 runs at f_max.  Before slice ``i`` the mean of up to ``n``
    previously measured MAPI values is classified through ``table``.  With
    ``decision_interval`` d > 1 the choice is refreshed only every d slices.
    ``noise_std`` adds seeded Gaussian error to each measurement (clamped at 0).
    """
    if len(trace) < 1:
        raise PolicyError("trace is empty")
    assignments = governor_steps(
        [mapi(s) for s in trace.slices], table, n, proc, decision_interval, noise_std, seed
    )
    return Schedule(tuple(assignments), "governor")


def governor_steps(
    mapis: Sequence[float],
    table: PolicyTable,
    n: int,
    proc: Processor,
    decision_interval: int = 1,
    noise_std: float = 0.0,
    seed: int | None = None,
) -> list[PState]:
    """The governor loop over a bare sequence of per-slice MAPI measurements."""
    if decision_interval < 1:
        raise PolicyError("decision_interval must be >= 1")
    if noise_std < 0:
        raise PolicyError("noise_std must be non-negative")
    table.check_processor(proc)
    rng = np.random.default_rng(seed) if noise_std > 0 else None

    state = PredictorState(n)
    current = proc.f_max
    out = [current] if len(mapis) else []
    for i, measured in enumerate(mapis[:-1]):
        if rng is not None:
            measured = max(0.0, measured + rng.normal(0.0, noise_std))
        state = observe(state, measured)
        if i % decision_interval == 0:
            current = classify(table, predict(state))
        out.append(current)
    return out


def static_policy(trace: Trace, p: PState, proc: Processor | None = None) -> Schedule:
    if proc is not None and p not in proc.pstates:
        raise PolicyError(f"{p} is not a P-state of the processor")
    return Schedule((p,) * len(trace), f"static:{p.frequency}")


def _oracle_choice(proc: Processor, timing, max_slowdown: float | None) -> PState:
    f_max = proc.f_max
    bound = None
    if max_slowdown is not None:
        bound = (1.0 + max_slowdown) * slice_duration(timing, f_max, f_max)
    best, best_energy = None, math.inf
    # descending frequency with strict '<' breaks ties toward the higher frequency
    for p in proc.pstates:
        if bound is not None and slice_duration(timing, p, f_max) > bound:
            continue
        e = slice_energy(proc, timing, p, f_max)
        if e < best_energy:
            best, best_energy = p, e
    return best


def oracle_policy(trace: Trace, proc: Processor, max_slowdown: float | None = None) -> Schedule:
    """Per-slice minimum-energy P-state, optionally under a per-slice slowdown bound."""
    if max_slowdown is not None and not max_slowdown >= 0:
        raise PolicyError(f"max_slowdown must be non-negative, got {max_slowdown}")
    name = "oracle" if max_slowdown is None else f"oracle:{max_slowdown:g}"
    return Schedule(
        tuple(_oracle_choice(proc, s.timing, max_slowdown) for s in trace.slices), name
    )


def parse_policy(spec: str) -> tuple[str, Any]:
    """Parse ``governor``, ``static:<freq>`` or ``oracle[:maxloss]``."""
    kind, _, arg = spec.strip().partition(":")
    kind = kind.lower()
    if kind == "governor" and not arg:
        return "governor", None
    if kind == "static" and arg:
        return "static", arg
    if kind == "oracle":
        if not arg:
            return "oracle", None
        try:
            value = float(arg)
        except ValueError:
            raise PolicyError(f"bad oracle slowdown bound {arg!r}") from None
        if not value >= 0:
            raise PolicyError("oracle slowdown bound must be non-negative")
        return "oracle", value
    raise PolicyError(f"unknown policy {spec!r}; use governor, static:<freq> or oracle[:maxloss]")


def resolve_frequency(text: str, proc: Processor) -> PState:
    """Accept ``fmax``, ``fmin``, ``2.2GHz``, ``2200MHz``, ``2.2`` (GHz) or plain Hz."""
    t = text.strip().lower()
    if t == "fmax":
        return proc.f_max
    if t == "fmin":
        return proc.f_min
    scale = 1.0
    for suffix, mult in (("ghz", 1e9), ("mhz", 1e6), ("hz", 1.0)):
        if t.endswith(suffix):
            t, scale = t[: -len(suffix)], mult
            break
    try:
        value = float(t)
    except ValueError:
        raise PolicyError(f"cannot parse frequency {text!r}") from None
    if scale == 1.0 and value < 1e4:
        scale = 1e9
    try:
        return proc.pstate(int(round(value * scale)))
    except ModelError as exc:
        raise PolicyError(str(exc)) from None


def enumerate_schedules(trace: Trace, proc: Processor) -> Iterable[tuple[PState, ...]]:
    """Every schedule over the trace; |pstates| ** len(trace) of them."""
    return itertools.product(proc.pstates, repeat=len(trace))


def table_frequencies(table: PolicyTable, mapis: Sequence[float]) -> list[int]:
    return [classify(table, m).frequency for m in mapis]

