"""Synchronization and memory-effect quantifiers over sampled series.

Non-Markovianity is the total positive variation of a distinguishability
series (trace distance of a state pair, or concurrence with a witness
ancilla): the sum of all increases between consecutive samples. The
synchronization indicator is the Pearson correlation of two local observable
series, optionally over sliding windows to resolve its build-up in time.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .qcore import DensityMatrix, concurrence_matrix


class UndefinedCorrelationError(ValueError):
    """Pearson correlation is undefined when a series has zero variance."""


class DegenerateNormalizationError(ValueError):
    """A diagram without positive cells cannot be normalized."""


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled real values; ``t0`` and ``dt`` may be collision indices."""

    t0: float
    dt: float
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.values.ndim != 1:
            raise ValueError("values must be one-dimensional")

    def __len__(self) -> int:
        return len(self.values)

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.values))


@dataclass(frozen=True)
class WindowSpec:
    """Sliding-window length and overlap, in samples."""

    window: int
    overlap: int

    def __post_init__(self) -> None:
        if self.window < 2:
            raise ValueError("window must hold at least two samples")
        if not 0 <= self.overlap < self.window:
            raise ValueError("overlap must satisfy 0 <= overlap < window")

    @property
    def stride(self) -> int:
        return self.window - self.overlap


def _values(series) -> np.ndarray:
    if isinstance(series, TimeSeries):
        return series.values
    return np.asarray(series, dtype=float)


def pearson(x, y) -> float:
    """Pearson correlation coefficient of two equal-length series.

    Symmetric, invariant under positive affine maps, sign-flipping under
    negative ones. Zero variance in either series raises, never returns 0.
    """
    xv, yv = _values(x), _values(y)
    if xv.shape != yv.shape:
        raise ValueError(f"length mismatch: {xv.shape} vs {yv.shape}")
    if len(xv) < 2:
        raise ValueError("correlation needs at least two samples")
    dx = xv - xv.mean()
    dy = yv - yv.mean()
    norm = np.sqrt(np.dot(dx, dx)) * np.sqrt(np.dot(dy, dy))
    if norm == 0.0:
        raise UndefinedCorrelationError("a series has zero variance")
    return float(np.dot(dx, dy) / norm)


def window_starts(n_samples: int, spec: WindowSpec) -> np.ndarray:
    return np.arange(0, n_samples - spec.window + 1, spec.stride)


def sliding_pearson(x: TimeSeries, y: TimeSeries, spec: WindowSpec) -> TimeSeries:
    """One coefficient per window; timestamps are window centers.

    Zero-variance windows yield NaN so downstream consumers can exclude them
    explicitly instead of reading a fabricated zero correlation.
    """
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    if x.dt != y.dt or x.t0 != y.t0:
        raise ValueError("series must share their sampling grid")
    if len(x) < spec.window:
        raise ValueError(f"series of length {len(x)} is shorter than the window {spec.window}")
    starts = window_starts(len(x), spec)
    out = np.empty(len(starts))
    for i, p in enumerate(starts):
        try:
            out[i] = pearson(x.values[p:p + spec.window], y.values[p:p + spec.window])
        except UndefinedCorrelationError:
            out[i] = np.nan
    center0 = x.t0 + x.dt * (starts[0] + spec.window // 2)
    return TimeSeries(center0, x.dt * spec.stride, out)


def positive_increment_total(values) -> float:
    """Sum of all increases between consecutive samples; 0 iff non-increasing."""
    v = _values(values)
    if len(v) < 2:
        return 0.0
    return float(np.sum(np.clip(np.diff(v), 0.0, None)))


def running_positive_increments(values) -> np.ndarray:
    """Cumulative positive variation up to each sample (non-decreasing)."""
    v = _values(values)
    out = np.zeros(len(v))
    if len(v) > 1:
        out[1:] = np.cumsum(np.clip(np.diff(v), 0.0, None))
    return out


def nm_from_distance_series(distances) -> float:
    """Memory measure from a sampled trace-distance series."""
    v = _values(distances)
    if np.any(v < -1e-9) or np.any(v > 1.0 + 1e-9):
        raise ValueError("trace distances must lie in [0, 1]")
    return positive_increment_total(v)


def concurrence_series(joint_trajectory) -> np.ndarray:
    """Concurrence of each two-qubit state in a trajectory."""
    out = np.empty(len(joint_trajectory))
    for i, state in enumerate(joint_trajectory):
        m = state.matrix if isinstance(state, DensityMatrix) else np.asarray(state, dtype=complex)
        out[i] = concurrence_matrix(m)
    return out


def nm_entanglement(joint_trajectory) -> float:
    """Memory measure from the entanglement of a non-interacting witness pair."""
    return positive_increment_total(concurrence_series(joint_trajectory))


def normalize_diagram(diagram):
    """Divide all cells by the grid maximum so the largest cell equals 1.

    Missing (NaN) cells are ignored for the maximum and stay missing.
    """
    cells = np.asarray(diagram.cells, dtype=float)
    finite = cells[np.isfinite(cells)]
    if finite.size == 0 or np.nanmax(finite) <= 0.0:
        raise DegenerateNormalizationError("no strictly positive cell to normalize by")
    return dataclasses.replace(diagram, cells=cells / np.nanmax(finite))
