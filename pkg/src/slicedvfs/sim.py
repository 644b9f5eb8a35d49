"""Apply a schedule to a trace under a processor model and score the result."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

from .model import Processor, PState, dump_processor, power, slice_duration, slice_energy
from .policy import PolicyError, Schedule
from .trace import Trace, emit_trace

SUMMARY_COLUMNS = (
    "trace_id", "policy", "total_time", "total_energy", "perf_loss", "energy_savings", "transitions",
)


class SimError(ValueError):
    pass


def trace_fingerprint(trace: Trace) -> str:
    return hashlib.sha256(emit_trace(trace, "csv")).hexdigest()


def processor_fingerprint(proc: Processor) -> str:
    return hashlib.sha256(dump_processor(proc).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class SliceRecord:
    duration: float
    energy: float
    pstate: PState


@dataclass(frozen=True)
class RunReport:
    total_time: float
    total_energy: float
    per_slice: tuple[SliceRecord, ...]
    transitions: int
    trace_fingerprint: str
    processor_fingerprint: str
    policy: str = "custom"
    transition_time: float = 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "policy": self.policy,
            "trace_fingerprint": self.trace_fingerprint,
            "processor_fingerprint": self.processor_fingerprint,
            "total_time": self.total_time,
            "total_energy": self.total_energy,
            "transitions": self.transitions,
            "transition_time": self.transition_time,
            "per_slice": [
                {
                    "duration": r.duration,
                    "energy": r.energy,
                    "frequency_hz": r.pstate.frequency,
                    "voltage": r.pstate.voltage,
                }
                for r in self.per_slice
            ],
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "RunReport":
        try:
            return cls(
                total_time=float(d["total_time"]),
                total_energy=float(d["total_energy"]),
                per_slice=tuple(
                    SliceRecord(float(r["duration"]), float(r["energy"]),
                                PState(int(r["frequency_hz"]), float(r["voltage"])))
                    for r in d["per_slice"]
                ),
                transitions=int(d["transitions"]),
                trace_fingerprint=str(d["trace_fingerprint"]),
                processor_fingerprint=str(d["processor_fingerprint"]),
                policy=str(d.get("policy", "custom")),
                transition_time=float(d.get("transition_time", 0.0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SimError(f"malformed run report: {exc!r}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"


@dataclass(frozen=True)
class Comparison:
    perf_loss: float
    energy_savings: float

    def to_dict(self) -> dict[str, float]:
        return {"perf_loss": self.perf_loss, "energy_savings": self.energy_savings}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    def __str__(self) -> str:
        return f"{100 * self.perf_loss:.2f}% / {100 * self.energy_savings:.2f}%"


def run(trace: Trace, schedule: Schedule | Sequence[PState], proc: Processor) -> RunReport:
    """Simulate ``schedule`` slice by slice.

    A frequency change between consecutive slices costs
    ``proc.transition_latency`` seconds at the destination P-state's power.
    """
    if not isinstance(schedule, Schedule):
        schedule = Schedule(tuple(schedule))
    try:
        schedule.validate(trace, proc)
    except PolicyError as exc:
        raise SimError(str(exc)) from None

    f_max = proc.f_max
    records = []
    durations, energies = [], []
    transitions = 0
    prev = None
    for sample, p in zip(trace.slices, schedule.assignments):
        d = slice_duration(sample.timing, p, f_max)
        e = slice_energy(proc, sample.timing, p, f_max)
        records.append(SliceRecord(d, e, p))
        durations.append(d)
        energies.append(e)
        if prev is not None and p.frequency != prev.frequency:
            transitions += 1
            if proc.transition_latency > 0:
                durations.append(proc.transition_latency)
                energies.append(proc.transition_latency * power(proc, p))
        prev = p
    return RunReport(
        total_time=math.fsum(durations),
        total_energy=math.fsum(energies),
        per_slice=tuple(records),
        transitions=transitions,
        trace_fingerprint=trace_fingerprint(trace),
        processor_fingerprint=processor_fingerprint(proc),
        policy=schedule.policy,
        transition_time=transitions * proc.transition_latency,
    )


def compare(policy_report: RunReport, ref_report: RunReport) -> Comparison:
    if policy_report.trace_fingerprint != ref_report.trace_fingerprint:
        raise SimError("reports come from different traces (fingerprint mismatch)")
    if policy_report.processor_fingerprint != ref_report.processor_fingerprint:
        raise SimError("reports come from different processor models (fingerprint mismatch)")
    t_ref, e_ref = ref_report.total_time, ref_report.total_energy
    return Comparison(
        perf_loss=(policy_report.total_time - t_ref) / t_ref,
        energy_savings=(e_ref - policy_report.total_energy) / e_ref,
    )


def load_report(path) -> RunReport:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SimError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return RunReport.from_dict(data)


def summary_row(trace_id: str, report: RunReport, comparison: Comparison) -> dict[str, Any]:
    return {
        "trace_id": trace_id,
        "policy": report.policy,
        "total_time": repr(report.total_time),
        "total_energy": repr(report.total_energy),
        "perf_loss": repr(comparison.perf_loss),
        "energy_savings": repr(comparison.energy_savings),
        "transitions": report.transitions,
    }


def summary_csv(rows: Sequence[Mapping[str, Any]]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()
