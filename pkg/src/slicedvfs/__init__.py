"""Timeslice DVFS: MAPI-driven frequency selection, simulated on counter traces."""

from .model import (
    ModelError,
    PState,
    Processor,
    SliceTiming,
    default_processor,
    power,
    slice_duration,
    slice_energy,
)
from .trace import (
    DEFAULT_OFFCHIP,
    OffChipMap,
    PhaseSpec,
    SliceSample,
    Trace,
    TraceError,
    TraceFormatError,
    TraceValidationError,
    emit_trace,
    generate_synthetic,
    load_trace,
    mapi,
    preset,
)
from .policy import (
    PolicyTable,
    PredictorState,
    Schedule,
    classify,
    default_table,
    governor,
    observe,
    oracle_policy,
    predict,
    static_policy,
)
from .calibration import ProfilePoint, derive_table, sweep
from .sim import Comparison, RunReport, compare, run

__version__ = "0.1.0"
