"""Per-timeslice counter traces: records, CSV/JSON formats, synthetic workloads."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

import numpy as np

from .model import ModelError, SliceTiming

CSV_COLUMNS = ("slice_index", "instructions", "memory_accesses", "t_on_seconds", "t_off_seconds")
DEFAULT_TIMESLICE = 0.1
DEFAULT_INSTRUCTIONS = 100_000_000


class TraceError(ValueError):
    pass


class TraceFormatError(TraceError):
    """Malformed input; carries the 1-based line and column when known."""

    def __init__(self, message: str, line: int | None = None, column: int | str | None = None):
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


class TraceValidationError(TraceError):
    def __init__(self, message: str, slice_index: int):
        self.slice_index = slice_index
        super().__init__(f"slice {slice_index}: {message}")


@dataclass(frozen=True)
class SliceSample:
    instructions: int
    memory_accesses: int
    timing: SliceTiming

    def __post_init__(self) -> None:
        for name in ("instructions", "memory_accesses"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise TraceError(f"{name} must be an integer, got {value!r}")
            object.__setattr__(self, name, int(value))
            if value < 0:
                raise TraceError(f"{name} must be non-negative, got {value}")
        if self.memory_accesses > 0 and self.instructions < 1:
            raise TraceError("memory accesses recorded for a slice with no instructions")

    @property
    def mapi(self) -> float:
        return mapi(self)


@dataclass(frozen=True)
class Trace:
    slices: tuple[SliceSample, ...]
    timeslice_nominal: float = DEFAULT_TIMESLICE

    def __post_init__(self) -> None:
        object.__setattr__(self, "slices", tuple(self.slices))
        if not self.slices:
            raise TraceError("trace must contain at least one slice")
        if not (self.timeslice_nominal > 0 and math.isfinite(self.timeslice_nominal)):
            raise TraceError(f"timeslice_nominal must be positive, got {self.timeslice_nominal}")

    def __len__(self) -> int:
        return len(self.slices)

    def __iter__(self):
        return iter(self.slices)

    def __getitem__(self, i):
        return self.slices[i]

    def mapis(self) -> np.ndarray:
        return np.array([mapi(s) for s in self.slices])

    def aggregate_mapi(self) -> float:
        """Memory accesses per instruction over the whole run."""
        return sum(s.memory_accesses for s in self.slices) / sum(s.instructions for s in self.slices)


def mapi(sample: SliceSample) -> float:
    """Memory accesses per instruction of one slice."""
    if sample.instructions < 1:
        raise TraceError("MAPI is undefined for a slice with zero instructions")
    return sample.memory_accesses / sample.instructions


# -- serialization ---------------------------------------------------------

def _fmt_float(x: float) -> str:
    # repr is the shortest string that round-trips exactly
    return repr(float(x))


def emit_trace(t: Trace, format: str = "csv") -> bytes:
    if format == "csv":
        buf = io.StringIO()
        buf.write(f"# timeslice_nominal={_fmt_float(t.timeslice_nominal)}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for i, s in enumerate(t.slices):
            writer.writerow(
                (i, s.instructions, s.memory_accesses,
                 _fmt_float(s.timing.t_on), _fmt_float(s.timing.t_off))
            )
        return buf.getvalue().encode("utf-8")
    if format == "json":
        doc = {
            "timeslice_nominal": t.timeslice_nominal,
            "slices": [
                {
                    "slice_index": i,
                    "instructions": s.instructions,
                    "memory_accesses": s.memory_accesses,
                    "t_on_seconds": s.timing.t_on,
                    "t_off_seconds": s.timing.t_off,
                }
                for i, s in enumerate(t.slices)
            ],
        }
        return (json.dumps(doc, indent=1) + "\n").encode("utf-8")
    raise TraceError(f"unknown trace format {format!r} (expected csv or json)")


def _parse_int(text: str, line: int, column: str) -> int:
    try:
        return int(text)
    except (TypeError, ValueError):
        raise TraceFormatError(f"expected an integer, got {text!r}", line, column) from None


def _parse_float(text: Any, line: int | None, column: str) -> float:
    if isinstance(text, bool):
        raise TraceFormatError(f"expected a number, got {text!r}", line, column)
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise TraceFormatError(f"expected a number, got {text!r}", line, column) from None
    if not math.isfinite(value):
        raise TraceFormatError(f"non-finite value {text!r}", line, column)
    return value


def _build_sample(index: int, instructions: int, accesses: int, t_on: float, t_off: float) -> SliceSample:
    try:
        return SliceSample(instructions, accesses, SliceTiming(t_on, t_off))
    except (TraceError, ModelError) as exc:
        raise TraceValidationError(str(exc), index) from None


def _load_csv(text: str) -> Trace:
    lines = text.splitlines()
    timeslice = DEFAULT_TIMESLICE
    first = 0
    # optional metadata comments before the header
    while first < len(lines) and lines[first].startswith("#"):
        key, sep, value = lines[first][1:].strip().partition("=")
        if sep and key.strip() == "timeslice_nominal":
            timeslice = _parse_float(value.strip(), first + 1, "timeslice_nominal")
        first += 1
    reader = csv.reader(lines[first:])
    try:
        header = next(reader)
    except StopIteration:
        raise TraceFormatError("missing header row", first + 1) from None
    if tuple(h.strip() for h in header) != CSV_COLUMNS:
        raise TraceFormatError(
            f"header must be {','.join(CSV_COLUMNS)}, got {','.join(header)}", first + 1, 1
        )
    slices = []
    for offset, row in enumerate(reader):
        line = first + 2 + offset
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(CSV_COLUMNS):
            raise TraceFormatError(
                f"expected {len(CSV_COLUMNS)} fields, got {len(row)}", line, min(len(row), len(CSV_COLUMNS)) + 1
            )
        index = _parse_int(row[0], line, CSV_COLUMNS[0])
        if index != len(slices):
            raise TraceFormatError(f"slice_index {index} out of sequence (expected {len(slices)})", line, CSV_COLUMNS[0])
        slices.append(
            _build_sample(
                index,
                _parse_int(row[1], line, CSV_COLUMNS[1]),
                _parse_int(row[2], line, CSV_COLUMNS[2]),
                _parse_float(row[3], line, CSV_COLUMNS[3]),
                _parse_float(row[4], line, CSV_COLUMNS[4]),
            )
        )
    try:
        return Trace(tuple(slices), timeslice)
    except TraceError as exc:
        raise TraceFormatError(str(exc), first + 1) from None


def _load_json(text: str) -> Trace:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TraceFormatError(exc.msg, exc.lineno, exc.colno) from None
    if not isinstance(doc, dict) or "slices" not in doc:
        raise TraceFormatError("expected an object with a 'slices' array")
    timeslice = _parse_float(doc.get("timeslice_nominal", DEFAULT_TIMESLICE), None, "timeslice_nominal")
    slices = []
    for i, entry in enumerate(doc["slices"]):
        if not isinstance(entry, dict):
            raise TraceValidationError("slice entry must be an object", i)
        try:
            fields = [entry[c] for c in CSV_COLUMNS]
        except KeyError as exc:
            raise TraceValidationError(f"missing field {exc}", i) from None
        for name, value in zip(CSV_COLUMNS[:3], fields[:3]):
            if isinstance(value, bool) or not isinstance(value, int):
                raise TraceValidationError(f"{name} must be an integer, got {value!r}", i)
        if fields[0] != i:
            raise TraceValidationError(f"slice_index {fields[0]} out of sequence", i)
        try:
            t_on = _parse_float(fields[3], None, CSV_COLUMNS[3])
            t_off = _parse_float(fields[4], None, CSV_COLUMNS[4])
        except TraceFormatError as exc:
            raise TraceValidationError(str(exc), i) from None
        slices.append(_build_sample(i, fields[1], fields[2], t_on, t_off))
    try:
        return Trace(tuple(slices), timeslice)
    except TraceError as exc:
        raise TraceFormatError(str(exc)) from None


def load_trace(source: bytes | str | io.IOBase, format: str = "csv") -> Trace:
    """Parse a trace from bytes, text, or a readable stream."""
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise TraceFormatError(f"input is not UTF-8: {exc}") from None
    if format == "csv":
        return _load_csv(source)
    if format == "json":
        return _load_json(source)
    raise TraceError(f"unknown trace format {format!r} (expected csv or json)")


def read_trace(path, format: str | None = None) -> Trace:
    format = format or guess_format(path)
    with open(path, "rb") as fh:
        return load_trace(fh.read(), format)


def write_trace(t: Trace, path, format: str | None = None) -> None:
    format = format or guess_format(path)
    with open(path, "wb") as fh:
        fh.write(emit_trace(t, format))


def guess_format(path) -> str:
    return "json" if str(path).lower().endswith(".json") else "csv"


# -- synthetic workloads ---------------------------------------------------

@dataclass(frozen=True)
class OffChipMap:
    """Monotone map from MAPI to the off-chip share of a slice's time at f_max.

    Piecewise linear through ``knots`` (ascending MAPI, non-decreasing
    fraction), flat beyond the last knot.  ``affine(beta)`` gives
    ``min(1, beta * mapi)``.
    """

    knots: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        knots = tuple((float(x), float(y)) for x, y in self.knots)
        object.__setattr__(self, "knots", knots)
        if not knots or knots[0][0] != 0.0:
            raise TraceError("off-chip map must start at mapi 0")
        for (x0, y0), (x1, y1) in zip(knots, knots[1:]):
            if not x1 > x0 or y1 < y0:
                raise TraceError("off-chip knots need ascending mapi and non-decreasing fraction")
        if any(not 0.0 <= y <= 1.0 for _, y in knots):
            raise TraceError("off-chip fractions must lie in [0, 1]")

    @classmethod
    def affine(cls, beta: float) -> "OffChipMap":
        if not beta > 0:
            raise TraceError("beta must be positive")
        return cls(((0.0, 0.0), (1.0 / beta, 1.0)))

    def __call__(self, m: float) -> float:
        knots = self.knots
        if m <= knots[0][0]:
            return knots[0][1]
        for (x0, y0), (x1, y1) in zip(knots, knots[1:]):
            if m <= x1:
                # clamp to the segment ends so evaluation stays monotone across knots
                return min(max(y0 + (m - x0) * ((y1 - y0) / (x1 - x0)), y0), y1)
        return knots[-1][1]

    def to_list(self) -> list[list[float]]:
        return [[x, y] for x, y in self.knots]


# Chosen so that, under the default processor, a 3% slowdown budget is first
# met by 2.2/1.6/1.2 GHz at MAPI 0.004/0.01/0.04 respectively; fully memory
# bound from MAPI 0.1.
DEFAULT_OFFCHIP = OffChipMap(((0.0, 0.0), (0.004, 0.67), (0.01, 0.94), (0.04, 0.97), (0.1, 1.0)))


@dataclass(frozen=True)
class PhaseSpec:
    slices: int
    mapi_mean: float
    jitter: float = 0.0
    instructions: int = DEFAULT_INSTRUCTIONS

    def __post_init__(self) -> None:
        if self.slices < 1:
            raise TraceError(f"phase needs at least one slice, got {self.slices}")
        if not self.mapi_mean >= 0:
            raise TraceError(f"MAPI mean must be non-negative, got {self.mapi_mean}")
        if not self.jitter >= 0:
            raise TraceError(f"jitter must be non-negative, got {self.jitter}")
        if self.instructions < 1:
            raise TraceError("instructions per slice must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "PhaseSpec":
        try:
            return cls(
                slices=int(d["slices"]),
                mapi_mean=float(d["mapi_mean"]),
                jitter=float(d.get("jitter", 0.0)),
                instructions=int(d.get("instructions", DEFAULT_INSTRUCTIONS)),
            )
        except KeyError as exc:
            raise TraceError(f"phase spec missing {exc}") from None


def _count_bounds(phase: PhaseSpec) -> tuple[int, int]:
    """Smallest and largest access counts whose MAPI lies in mean +/- jitter."""
    n = phase.instructions
    lo = max(phase.mapi_mean - phase.jitter, 0.0)
    hi = phase.mapi_mean + phase.jitter
    c_lo, c_hi = math.ceil(lo * n), math.floor(hi * n)
    # the products above are rounded; settle the edges on the actual ratios
    while c_lo > 0 and (c_lo - 1) / n >= lo:
        c_lo -= 1
    while c_lo / n < lo:
        c_lo += 1
    while (c_hi + 1) / n <= hi:
        c_hi += 1
    while c_hi >= 0 and c_hi / n > hi:
        c_hi -= 1
    if c_lo > c_hi:
        raise TraceError(
            f"no integer access count out of {n} instructions gives MAPI within "
            f"{phase.mapi_mean} +/- {phase.jitter}; widen the jitter or change instructions"
        )
    return c_lo, c_hi


def _draw_accesses(rng: np.random.Generator, phase: PhaseSpec, bounds: tuple[int, int]) -> int:
    n = phase.instructions
    lo = max(phase.mapi_mean - phase.jitter, 0.0)
    hi = phase.mapi_mean + phase.jitter
    target = rng.uniform(lo, hi) if hi > lo else phase.mapi_mean
    return min(max(int(round(target * n)), bounds[0]), bounds[1])


def generate_synthetic(
    spec: Sequence[PhaseSpec],
    seed: int,
    offchip: OffChipMap = DEFAULT_OFFCHIP,
    timeslice: float = DEFAULT_TIMESLICE,
) -> Trace:
    """Build a trace phase by phase; each slice lasts ``timeslice`` seconds at f_max."""
    spec = list(spec)
    if not spec:
        raise TraceError("phase spec list is empty")
    rng = np.random.default_rng(seed)
    slices = []
    bounds = [_count_bounds(phase) for phase in spec]
    for phase, window in zip(spec, bounds):
        for _ in range(phase.slices):
            accesses = _draw_accesses(rng, phase, window)
            off = offchip(accesses / phase.instructions)
            t_off = off * timeslice
            slices.append(
                SliceSample(phase.instructions, accesses, SliceTiming(timeslice - t_off, t_off))
            )
    return Trace(tuple(slices), timeslice)


def _phases(*rows: tuple[int, float, float]) -> list[PhaseSpec]:
    return [PhaseSpec(n, m, j) for n, m, j in rows]


# NAS-like workload shapes.  CG is memory bound throughout with short
# lighter stretches; FT, MG and SP alternate compute and memory phases.
PRESETS: dict[str, list[PhaseSpec]] = {
    "cg": _phases(
        (60, 0.018, 0.006), (12, 0.008, 0.0015),
        (70, 0.02, 0.007), (12, 0.008, 0.0015),
        (60, 0.017, 0.005), (12, 0.0085, 0.001),
        (50, 0.019, 0.006),
    ),
    "ft": _phases(
        (50, 0.002, 0.0012), (40, 0.013, 0.003),
        (50, 0.002, 0.0012), (40, 0.013, 0.003),
        (50, 0.002, 0.0012), (40, 0.014, 0.003),
        (30, 0.0025, 0.001),
    ),
    "mg": _phases(
        (40, 0.003, 0.0008), (50, 0.007, 0.002),
        (40, 0.016, 0.004), (40, 0.006, 0.0015),
        (40, 0.003, 0.0008), (50, 0.015, 0.004),
        (40, 0.0065, 0.0015),
    ),
    "sp": _phases(
        (60, 0.003, 0.0008), (50, 0.0065, 0.0015),
        (60, 0.0028, 0.0009), (50, 0.007, 0.0018),
        (40, 0.012, 0.0015), (60, 0.003, 0.0008),
    ),
}


def preset(name: str) -> list[PhaseSpec]:
    try:
        return list(PRESETS[name.lower()])
    except KeyError:
        raise TraceError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None


def profiling_suite(
    seed: int = 0,
    mapi_max: float = 0.1,
    step: float = 0.0005,
    slices_per_level: int = 8,
    offchip: OffChipMap = DEFAULT_OFFCHIP,
) -> list[Trace]:
    """Microbenchmark ladder covering [0, mapi_max] densely, plus the NAS presets.

    Used as simulated profiling input for table calibration.
    """
    levels = np.arange(0.0, mapi_max + step / 2, step)
    ladder = [PhaseSpec(slices_per_level, float(m), step / 2) for m in levels]
    traces = [generate_synthetic(ladder, seed, offchip)]
    for i, name in enumerate(PRESETS):
        traces.append(generate_synthetic(PRESETS[name], seed + 1 + i, offchip))
    return traces


def phases_from_json(data: Iterable[dict]) -> list[PhaseSpec]:
    return [PhaseSpec.from_dict(d) for d in data]
