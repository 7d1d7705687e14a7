"""Decoding of the multi-spectral synchronisation beacon.

The beacon blinks with a 50 % duty cycle while its period steps from 5 s to
13 s, so the whole pattern repeats every 81 s and every rotation of it is
distinguishable.  Offsets follow the convention
``observed_time - offset = pattern_time``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import InsufficientEvidenceError, InvalidInputError, NoEdgesError
from .series import UniformSeries

RISING, FALLING = "rising", "falling"
SENSORS = ("rgb", "nir", "lwir")
MIN_EDGES = 6


@dataclass(frozen=True)
class SyncPattern:
    periods_s: tuple = (5, 6, 7, 8, 9, 10, 11, 12, 13)
    duty: float = 0.5
    lwir_extra_delay_s: float = 0.05
    rising_first: bool = True

    def __post_init__(self):
        if not self.periods_s or any(p <= 0 for p in self.periods_s):
            raise InvalidInputError("periods must be positive")
        if not 0 < self.duty < 1:
            raise InvalidInputError("duty must lie in (0, 1)")

    @property
    def cycle_s(self) -> float:
        return float(sum(self.periods_s))

    def edges_one_cycle(self) -> "EdgeSequence":
        # exact rational arithmetic, converted once at the end
        duty = Fraction(self.duty).limit_denominator(1000)
        first, second = (RISING, FALLING) if self.rising_first else (FALLING, RISING)
        t = Fraction(0)
        edges = []
        for p in self.periods_s:
            p = Fraction(p).limit_denominator(1000)
            edges.append((t, first))
            edges.append((t + p * duty, second))
            t += p
        return EdgeSequence(tuple((float(e), d) for e, d in edges))


@dataclass(frozen=True)
class EdgeSequence:
    edges: tuple

    def __post_init__(self):
        times = [t for t, _ in self.edges]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise InvalidInputError("edge times must be strictly increasing")
        dirs = [d for _, d in self.edges]
        if any(d not in (RISING, FALLING) for d in dirs):
            raise InvalidInputError("edge direction must be 'rising' or 'falling'")
        if any(a == b for a, b in zip(dirs, dirs[1:])):
            raise InvalidInputError("edge directions must alternate")

    def __len__(self):
        return len(self.edges)

    @property
    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.edges], dtype=float)

    @property
    def rising(self) -> np.ndarray:
        return np.array([d == RISING for _, d in self.edges], dtype=bool)

    def shifted(self, dt: float) -> "EdgeSequence":
        return EdgeSequence(tuple((t + dt, d) for t, d in self.edges))


def generate_pattern(pattern: SyncPattern = SyncPattern(), n_cycles: int = 1) -> EdgeSequence:
    """Beacon edges for ``n_cycles`` consecutive cycles starting at t = 0."""
    if n_cycles < 1:
        raise InvalidInputError("n_cycles must be >= 1")
    one = pattern.edges_one_cycle().edges
    edges = tuple((t + k * pattern.cycle_s, d) for k in range(n_cycles) for t, d in one)
    return EdgeSequence(edges)


def beacon_state(pattern: SyncPattern, t) -> np.ndarray:
    """True where the beacon is on at pattern time ``t`` (periodic)."""
    seq = pattern.edges_one_cycle()
    times, rising = seq.times, seq.rising
    tm = np.mod(np.asarray(t, dtype=float), pattern.cycle_s)
    idx = np.searchsorted(times, tm, side="right") - 1
    return rising[idx]


def binarize_intensity(trace: UniformSeries, hysteresis: float = 0.1) -> EdgeSequence:
    """Locate beacon transitions in a sampled intensity trace.

    The trace is min-max normalised; the state switches on at
    ``0.5 + hysteresis`` and off at ``0.5 - hysteresis``.  Each edge time is
    the linearly interpolated 0.5 crossing closest before the switch.
    """
    x = trace.samples
    if len(x) < 2:
        raise NoEdgesError("trace too short to contain edges")
    lo, hi = float(x.min()), float(x.max())
    if hi - lo <= 1e-12 * max(1.0, abs(hi)):
        raise NoEdgesError("flat intensity trace has no edges")
    y = (x - lo) / (hi - lo)
    on_level, off_level = 0.5 + hysteresis, 0.5 - hysteresis
    state = bool(y[0] >= 0.5)
    edges = []
    last_cross = None
    for i in range(1, len(y)):
        if (y[i - 1] < 0.5) != (y[i] < 0.5):
            last_cross = i
        if not state and y[i] >= on_level:
            state = True
            edges.append((_crossing_time(trace, y, last_cross, i), RISING))
        elif state and y[i] <= off_level:
            state = False
            edges.append((_crossing_time(trace, y, last_cross, i), FALLING))
    if not edges:
        raise NoEdgesError("no transitions cross the hysteresis band")
    # interpolation can collapse two edges of a glitch onto the same instant
    cleaned = []
    for t, d in edges:
        if cleaned and t <= cleaned[-1][0]:
            cleaned.pop()
            continue
        cleaned.append((t, d))
    return EdgeSequence(tuple(cleaned))


def _crossing_time(trace, y, j, i):
    if j is None:
        j = i
    a, b = y[j - 1], y[j]
    frac = 0.5 if a == b else (0.5 - a) / (b - a)
    return trace.start_time_s + (j - 1 + frac) / trace.rate_hz


@dataclass(frozen=True)
class OffsetEstimate:
    sensor: str
    offset_s: float
    residual_rms_s: float
    n_edges: int

    def to_dict(self):
        return {
            "sensor": self.sensor,
            "offset_s": self.offset_s,
            "residual_rms_s": self.residual_rms_s,
            "n_edges": self.n_edges,
        }


def _cyclic_residuals(obs_t, obs_rising, tmpl_t, tmpl_rising, offsets, cycle):
    """Residual of every observed edge to the nearest same-direction template edge.

    Returns an ``(len(offsets), len(obs_t))`` array.
    """
    res = np.empty((len(offsets), len(obs_t)))
    for flag in (True, False):
        cols = np.flatnonzero(obs_rising == flag)
        if cols.size == 0:
            continue
        tt = np.sort(tmpl_t[tmpl_rising == flag])
        ext = np.concatenate([tt - cycle, tt, tt + cycle])
        ph = np.mod(obs_t[cols][None, :] - offsets[:, None], cycle)
        k = np.clip(np.searchsorted(ext, ph), 1, len(ext) - 1)
        left, right = ph - ext[k - 1], ext[k] - ph
        res[:, cols] = np.where(left <= right, left, -right)
    return res


def offset_cost(observed: EdgeSequence, pattern: SyncPattern, offsets) -> np.ndarray:
    """Sum of squared residuals for each candidate offset."""
    tmpl = pattern.edges_one_cycle()
    offsets = np.atleast_1d(np.asarray(offsets, dtype=float))
    out = np.empty(len(offsets))
    step = 4096
    for s in range(0, len(offsets), step):
        r = _cyclic_residuals(observed.times, observed.rising, tmpl.times, tmpl.rising,
                              offsets[s : s + step], pattern.cycle_s)
        out[s : s + step] = (r**2).sum(axis=1)
    return out


def estimate_offset(
    observed: EdgeSequence,
    pattern: SyncPattern = SyncPattern(),
    sensor: str = "rgb",
    grid_s: float = 0.001,
    refine: bool = True,
) -> OffsetEstimate:
    """Clock offset of a sensor relative to the beacon pattern.

    Every offset on a ``grid_s`` grid over one cycle is scored by the sum of
    squared distances from observed edges to the nearest template edge of the
    same direction.  With ``refine`` the best grid point is polished by the
    closed-form least-squares shift for its edge assignment.  For ``lwir`` the
    shutter delay is subtracted.  The result is reported in ``[0, cycle)``
    before that correction.
    """
    if sensor not in SENSORS:
        raise InvalidInputError(f"unknown sensor {sensor!r}")
    if len(observed) < MIN_EDGES:
        raise InsufficientEvidenceError(
            f"{len(observed)} edges observed; at least {MIN_EDGES} are needed"
        )
    n_grid = int(round(pattern.cycle_s / grid_s))
    grid = np.arange(n_grid) * grid_s
    cost = offset_cost(observed, pattern, grid)
    best = float(grid[int(np.argmin(cost))])
    tmpl = pattern.edges_one_cycle()
    res = _cyclic_residuals(observed.times, observed.rising, tmpl.times, tmpl.rising,
                            np.array([best]), pattern.cycle_s)[0]
    if refine:
        best = float(np.mod(best + res.mean(), pattern.cycle_s))
        if pattern.cycle_s - best < grid_s / 2:
            best -= pattern.cycle_s
        res = res - res.mean()
    rms = float(np.sqrt(np.mean(res**2)))
    if sensor == "lwir":
        best -= pattern.lwir_extra_delay_s
    return OffsetEstimate(sensor, best, rms, len(observed))
