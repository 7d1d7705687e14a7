"""Uniformly sampled time series, the signal carrier used throughout."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError

TAPERS = ("rectangular", "hamming", "hann")


@dataclass(frozen=True, eq=False)
class UniformSeries:
    """Samples taken every ``1 / rate_hz`` seconds starting at ``start_time_s``.

    The sample array is copied to float64 and made read-only so instances can
    be shared between threads.
    """

    samples: np.ndarray
    rate_hz: float
    start_time_s: float = 0.0

    def __post_init__(self):
        arr = np.array(self.samples, dtype=float)
        if arr.ndim != 1:
            raise InvalidInputError(f"samples must be 1-D, got shape {arr.shape}")
        if not self.rate_hz > 0:
            raise InvalidInputError(f"rate_hz must be > 0, got {self.rate_hz}")
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "rate_hz", float(self.rate_hz))
        object.__setattr__(self, "start_time_s", float(self.start_time_s))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.start_time_s + np.arange(len(self)) / self.rate_hz

    @property
    def duration_s(self) -> float:
        """Time between first and last sample."""
        return max(len(self) - 1, 0) / self.rate_hz

    @property
    def end_time_s(self) -> float:
        return self.start_time_s + self.duration_s

    def with_samples(self, samples) -> "UniformSeries":
        """Same timing, new values."""
        return UniformSeries(samples, self.rate_hz, self.start_time_s)

    def slice(self, start: int, stop: int) -> "UniformSeries":
        return UniformSeries(
            self.samples[start:stop],
            self.rate_hz,
            self.start_time_s + start / self.rate_hz,
        )

    def __eq__(self, other):
        if not isinstance(other, UniformSeries):
            return NotImplemented
        return (
            self.rate_hz == other.rate_hz
            and self.start_time_s == other.start_time_s
            and np.array_equal(self.samples, other.samples)
        )

    __hash__ = None


@dataclass(frozen=True)
class WindowSpec:
    length_samples: int
    stride_samples: int
    taper: str = "rectangular"

    def __post_init__(self):
        if self.length_samples < 1 or self.stride_samples < 1:
            raise InvalidInputError("window length and stride must be positive")
        if self.stride_samples > self.length_samples:
            raise InvalidInputError("stride must not exceed window length")
        if self.taper not in TAPERS:
            raise InvalidInputError(f"unknown taper {self.taper!r}")

    def n_windows(self, n_samples: int) -> int:
        if n_samples < self.length_samples:
            return 0
        return (n_samples - self.length_samples) // self.stride_samples + 1


def as_series(x, rate_hz=None, start_time_s=0.0) -> UniformSeries:
    """Accept a ``UniformSeries`` or an array plus a rate."""
    if isinstance(x, UniformSeries):
        return x
    if rate_hz is None:
        raise InvalidInputError("rate_hz is required for a bare array")
    return UniformSeries(x, rate_hz, start_time_s)
