"""scikit-learn style wrappers so tables and the governor compose with pipelines.

``TableCalibrator`` learns a MAPI -> frequency table from profiling samples
(``fit``) and classifies MAPI values (``predict``).  ``TimesliceGovernor``
turns one trace's per-slice MAPI sequence into per-slice frequencies.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .calibration import ProfilePoint, derive_table
from .model import Processor, default_processor
from .policy import PolicyTable, classify, default_table, governor, governor_steps
from .trace import Trace


def _mapi_column(X) -> np.ndarray:
    X = check_array(X, ensure_2d=False, dtype=np.float64)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError(f"expected a single MAPI column, got shape {X.shape}")
        X = X[:, 0]
    if np.any(X < 0):
        raise ValueError("MAPI values must be non-negative")
    return X


class TableCalibrator(ClassifierMixin, BaseEstimator):
    """Fit a banded frequency table from (MAPI, frequency) -> slowdown samples.

    Parameters
    ----------
    processor : Processor, optional
        Defaults to the built-in four-P-state desktop model.
    max_loss : float
        Allowed fractional slowdown per band.
    grid : sequence of float, optional
        Candidate band upper bounds; defaults to 0.001 steps up to 0.1.

    ``fit(X, y)`` takes ``X`` with columns ``[mapi, frequency_hz]`` and ``y`` the
    measured slowdown relative to f_max.  ``predict`` returns frequencies in Hz.
    """

    def __init__(self, processor: Processor | None = None, max_loss: float = 0.03, grid=None):
        self.processor = processor
        self.max_loss = max_loss
        self.grid = grid

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        if X.shape[1] != 2:
            raise ValueError(f"expected columns [mapi, frequency_hz], got {X.shape[1]} columns")
        proc = self.processor if self.processor is not None else default_processor()
        points = [
            ProfilePoint(float(m), proc.pstate(int(round(f))), float(s))
            for (m, f), s in zip(X, y)
        ]
        self.processor_ = proc
        self.table_ = derive_table(points, proc, self.max_loss, self.grid)
        self.classes_ = np.array(sorted(proc.frequencies))
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "table_")
        return np.array([classify(self.table_, m).frequency for m in _mapi_column(X)], dtype=np.int64)


class TimesliceGovernor(BaseEstimator):
    """Moving-average MAPI governor over a single trace.

    ``predict(X)`` takes the measured MAPI of each slice in order and returns
    the frequency (Hz) chosen for each slice; the first slice runs at f_max.
    """

    def __init__(
        self,
        table: PolicyTable | None = None,
        window: int = 3,
        decision_interval: int = 1,
        processor: Processor | None = None,
        noise_std: float = 0.0,
        random_state: int | None = None,
    ):
        self.table = table
        self.window = window
        self.decision_interval = decision_interval
        self.processor = processor
        self.noise_std = noise_std
        self.random_state = random_state

    def fit(self, X=None, y=None):
        proc = self.processor if self.processor is not None else default_processor()
        table = self.table if self.table is not None else default_table(proc)
        table.check_processor(proc)
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.decision_interval < 1:
            raise ValueError("decision_interval must be >= 1")
        self.processor_ = proc
        self.table_ = table
        return self

    def schedule(self, trace: Trace):
        check_is_fitted(self, "table_")
        return governor(
            trace, self.table_, self.window, self.processor_,
            self.decision_interval, self.noise_std, self.random_state,
        )

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "table_")
        mapis = _mapi_column(X)
        if mapis.size == 0:
            raise ValueError("need at least one slice")
        steps = governor_steps(
            [float(m) for m in mapis], self.table_, self.window, self.processor_,
            self.decision_interval, self.noise_std, self.random_state,
        )
        return np.array([p.frequency for p in steps], dtype=np.int64)
