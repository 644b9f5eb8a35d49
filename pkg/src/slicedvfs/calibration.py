"""Derive a MAPI -> frequency table from frequency-sweep profiling data.

Each profile point records how much slower a slice ran at some P-state than
at f_max.  A MAPI band gets the lowest frequency whose worst observed
slowdown inside the band stays within the loss budget.
"""

from __future__ import annotations

import bisect
import csv
import io
import math
import warnings
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

from .model import ModelError, Processor, PState, slice_duration
from .policy import PolicyTable
from .trace import Trace, mapi

SLOWDOWN_TOLERANCE = 1e-6
PROFILE_COLUMNS = ("mapi", "frequency_hz", "slowdown")


class CalibrationError(ValueError):
    pass


class MonotonicityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ProfilePoint:
    mapi: float
    pstate: PState
    slowdown: float

    def __post_init__(self) -> None:
        if not self.mapi >= 0:
            raise CalibrationError(f"profile MAPI must be non-negative, got {self.mapi}")
        if not self.slowdown >= 1.0 - SLOWDOWN_TOLERANCE:
            raise CalibrationError(f"slowdown must be >= 1, got {self.slowdown}")


def default_grid() -> tuple[float, ...]:
    return tuple(i / 1000 for i in range(1, 101)) + (math.inf,)


def sweep(traces: Sequence[Trace], proc: Processor) -> list[ProfilePoint]:
    """Simulated profiling: run every slice of every trace at every P-state."""
    if not traces:
        raise CalibrationError("need at least one trace to profile")
    f_max = proc.f_max
    points = []
    for trace in traces:
        for sample in trace.slices:
            m = mapi(sample)
            base = slice_duration(sample.timing, f_max, f_max)
            for p in proc.pstates:
                points.append(ProfilePoint(m, p, slice_duration(sample.timing, p, f_max) / base))
    return points


def _band_targets(
    points: Iterable[ProfilePoint], proc: Processor, max_loss: float, grid: Sequence[float]
) -> list[PState | None]:
    worst: dict[tuple[int, int], float] = defaultdict(float)
    seen = set()
    for pt in points:
        if pt.pstate not in proc.pstates:
            raise CalibrationError(f"profile point at {pt.pstate} does not match the processor")
        b = bisect.bisect_left(grid, pt.mapi)
        key = (b, pt.pstate.frequency)
        worst[key] = max(worst[key], pt.slowdown)
        seen.add(b)

    limit = 1.0 + max_loss
    targets: list[PState | None] = []
    for b in range(len(grid)):
        if b not in seen:
            targets.append(None)
            continue
        chosen = proc.f_max
        for p in proc.pstates[1:]:
            key = (b, p.frequency)
            # a P-state never profiled in this band is not evidence of feasibility
            if key in worst and worst[key] <= limit:
                chosen = p
        targets.append(chosen)
    return targets


def derive_table(
    points: Sequence[ProfilePoint],
    proc: Processor,
    max_loss: float = 0.03,
    grid: Sequence[float] | None = None,
) -> PolicyTable:
    """Build a :class:`PolicyTable` from profile points.

    Bands come from ``grid`` (upper bounds, ascending; an ``inf`` sentinel is
    appended when missing).  Bands with no data inherit the band to their
    left.  If the data asks for a higher frequency at higher MAPI, the target
    is lowered to the running minimum and a :class:`MonotonicityWarning` is
    issued.  Adjacent bands with the same target are merged.
    """
    if not max_loss >= 0:
        raise CalibrationError(f"max_loss must be non-negative, got {max_loss}")
    grid = list(default_grid() if grid is None else grid)
    if not grid:
        raise CalibrationError("threshold grid is empty")
    if grid[-1] != math.inf:
        grid.append(math.inf)
    for lo, hi in zip(grid, grid[1:]):
        if not hi > lo:
            raise CalibrationError("threshold grid must be strictly ascending")
    if not grid[0] > 0:
        raise CalibrationError("threshold grid values must be positive")

    raw = _band_targets(points, proc, max_loss, grid)
    if all(t is None for t in raw):
        raise CalibrationError("no profile points: every band is empty")

    filled: list[PState] = []
    for t in raw:
        if t is None:
            t = filled[-1] if filled else proc.f_max
        filled.append(t)

    repaired: list[PState] = []
    lowered = []
    for b, t in enumerate(filled):
        if repaired and t.frequency > repaired[-1].frequency:
            lowered.append(grid[b])
            t = repaired[-1]
        repaired.append(t)
    if lowered:
        warnings.warn(
            f"profile data is not monotone in MAPI; lowered targets of {len(lowered)} band(s) "
            f"starting at upper bound {lowered[0]:g}",
            MonotonicityWarning,
            stacklevel=2,
        )

    thresholds, targets = [], []
    for b, t in enumerate(repaired):
        if targets and targets[-1] == t:
            thresholds[-1] = grid[b]
        else:
            thresholds.append(grid[b])
            targets.append(t)
    return PolicyTable(tuple(thresholds), tuple(targets))


def emit_profile(points: Sequence[ProfilePoint]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(PROFILE_COLUMNS)
    for pt in points:
        writer.writerow((repr(pt.mapi), pt.pstate.frequency, repr(pt.slowdown)))
    return buf.getvalue()


def load_profile(text: str, proc: Processor) -> list[ProfilePoint]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise CalibrationError("profile data is empty") from None
    if tuple(h.strip() for h in header) != PROFILE_COLUMNS:
        raise CalibrationError(f"line 1: header must be {','.join(PROFILE_COLUMNS)}")
    points = []
    for line, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 3:
            raise CalibrationError(f"line {line}: expected 3 fields, got {len(row)}")
        try:
            points.append(ProfilePoint(float(row[0]), proc.pstate(int(row[1])), float(row[2])))
        except (ValueError, ModelError) as exc:
            raise CalibrationError(f"line {line}: {exc}") from None
    if not points:
        raise CalibrationError("profile data contains no points")
    return points
