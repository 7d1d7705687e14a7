"""Velocity-threshold saccade detection and eye-movement-rate statistics."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import InvalidInputError
from .series import UniformSeries

DEFAULT_THRESHOLD_DPS = 50.0
DEFAULT_MAX_FRAMES = 10
BLOCK = 3


@dataclass(frozen=True)
class GazeTrace:
    """Gaze angles in radians.

    When the ``*_right`` fields are given, ``gaze_x_rad``/``gaze_y_rad`` hold
    the left eye and both eyes are averaged during preprocessing.
    """

    gaze_x_rad: UniformSeries
    gaze_y_rad: UniformSeries
    gaze_x_right_rad: Optional[UniformSeries] = None
    gaze_y_right_rad: Optional[UniformSeries] = None

    def __post_init__(self):
        chans = [c for c in self.channels if c is not None]
        if (self.gaze_x_right_rad is None) != (self.gaze_y_right_rad is None):
            raise InvalidInputError("right-eye angles must be given as a pair")
        n, rate = len(chans[0]), chans[0].rate_hz
        for c in chans:
            if len(c) != n or c.rate_hz != rate:
                raise InvalidInputError("gaze channels need equal length and rate")
            if np.any(np.abs(c.samples) > np.pi / 2):
                raise InvalidInputError("gaze angles must lie in [-pi/2, pi/2]")

    @property
    def channels(self):
        return (self.gaze_x_rad, self.gaze_y_rad, self.gaze_x_right_rad, self.gaze_y_right_rad)

    @property
    def rate_hz(self):
        return self.gaze_x_rad.rate_hz

    @property
    def binocular(self):
        return self.gaze_x_right_rad is not None

    def __len__(self):
        return len(self.gaze_x_rad)

    @classmethod
    def from_arrays(cls, x, y, rate_hz, start_time_s=0.0, x_right=None, y_right=None):
        mk = lambda a: None if a is None else UniformSeries(a, rate_hz, start_time_s)
        return cls(mk(x), mk(y), mk(x_right), mk(y_right))


@dataclass(frozen=True)
class SaccadeEvent:
    start_frame: int
    end_frame: int
    peak_velocity_dps: float

    @property
    def duration_frames(self):
        return self.end_frame - self.start_frame + 1


@dataclass(frozen=True)
class IntervalAnnotation:
    question_id: int
    phase: str
    start_s: float
    end_s: float
    label: Optional[str]
    subject_id: str

    def __post_init__(self):
        if not self.start_s < self.end_s:
            raise InvalidInputError(f"interval start {self.start_s} must precede end {self.end_s}")
        if self.phase not in ("question", "response"):
            raise InvalidInputError(f"unknown phase {self.phase!r}")
        if self.label not in (None, "truthful", "deceptive"):
            raise InvalidInputError(f"unknown label {self.label!r}")
        if self.phase == "response" and self.label is None:
            raise InvalidInputError("response intervals need a label")

    @property
    def duration_s(self):
        return self.end_s - self.start_s

    def contains(self, t: float) -> bool:
        """Half-open membership test ``start_s <= t < end_s``."""
        return self.start_s <= t < self.end_s

    def to_dict(self):
        return {
            "subject_id": self.subject_id,
            "question_id": self.question_id,
            "phase": self.phase,
            "start_s": self.start_s,
            "end_s": self.end_s,
            "label": self.label,
        }


def _block_mean(x: np.ndarray, block: int) -> np.ndarray:
    n = (len(x) // block) * block
    return x[:n].reshape(-1, block).mean(axis=1)


def preprocess_gaze(raw: GazeTrace, block: int = BLOCK) -> GazeTrace:
    """Average the two eyes, then average non-overlapping ``block``-frame groups.

    A trailing partial block is dropped.  The output rate is ``rate / block``
    and its first sample is stamped at the centre of the first block.
    """
    if len(raw) < block:
        raise InvalidInputError(f"need at least {block} gaze frames")
    x, y = raw.gaze_x_rad.samples, raw.gaze_y_rad.samples
    if raw.binocular:
        x = (x + raw.gaze_x_right_rad.samples) / 2
        y = (y + raw.gaze_y_right_rad.samples) / 2
    rate = raw.rate_hz / block
    t0 = raw.gaze_x_rad.start_time_s + (block - 1) / (2 * raw.rate_hz)
    return GazeTrace(
        UniformSeries(_block_mean(x, block), rate, t0),
        UniformSeries(_block_mean(y, block), rate, t0),
    )


def angular_velocity(g: GazeTrace) -> UniformSeries:
    """Frame-to-frame angular speed in degrees per second (length ``n - 1``).

    Sample ``i`` is the speed between frames ``i`` and ``i + 1`` and carries
    the timestamp of frame ``i``.
    """
    if len(g) < 2:
        raise InvalidInputError("need at least 2 gaze frames")
    x, y = g.gaze_x_rad.samples, g.gaze_y_rad.samples
    if g.binocular:
        x = (x + g.gaze_x_right_rad.samples) / 2
        y = (y + g.gaze_y_right_rad.samples) / 2
    v = np.hypot(np.diff(x), np.diff(y)) * g.rate_hz * (180.0 / np.pi)
    return UniformSeries(v, g.rate_hz, g.gaze_x_rad.start_time_s)


def detect_saccades(
    v: UniformSeries,
    threshold_dps: float = DEFAULT_THRESHOLD_DPS,
    max_frames: int = DEFAULT_MAX_FRAMES,
) -> list:
    """One event per maximal run of frames with ``v >= threshold_dps``.

    Runs longer than ``max_frames`` are discarded as tracking glitches.
    """
    if not threshold_dps > 0:
        raise InvalidInputError("threshold must be > 0")
    above = np.concatenate([[False], v.samples >= threshold_dps, [False]])
    edges = np.diff(above.astype(np.int8))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1) - 1
    events = []
    for s, e in zip(starts, ends):
        if e - s + 1 > max_frames:
            continue
        events.append(SaccadeEvent(int(s), int(e), float(v.samples[s : e + 1].max())))
    return events


def detect_from_gaze(raw: GazeTrace, threshold_dps=DEFAULT_THRESHOLD_DPS, max_frames=DEFAULT_MAX_FRAMES):
    """Preprocess, differentiate and threshold in one call.

    Returns ``(events, velocity)``; event frames index ``velocity``.
    """
    v = angular_velocity(preprocess_gaze(raw))
    return detect_saccades(v, threshold_dps, max_frames), v


def event_times(events: Sequence[SaccadeEvent], rate_hz: float, start_time_s: float = 0.0) -> np.ndarray:
    return start_time_s + np.array([e.start_frame for e in events], dtype=float) / rate_hz


def emr_over_interval(
    events: Sequence[SaccadeEvent],
    interval: IntervalAnnotation,
    rate_hz: float,
    start_time_s: float = 0.0,
) -> float:
    """Saccades per second whose start frame falls inside the interval."""
    if not interval.duration_s > 0:
        raise InvalidInputError("interval duration must be > 0")
    t = event_times(events, rate_hz, start_time_s)
    n = int(np.count_nonzero((t >= interval.start_s) & (t < interval.end_s)))
    return n / interval.duration_s


@dataclass(frozen=True)
class ThresholdResult:
    predictions: list
    accuracy: float
    thresholds: dict


def median_threshold_classify(records: Iterable) -> ThresholdResult:
    """Per-subject median split: predict deceptive iff value > subject median.

    ``records`` are ``(subject_id, label, value)`` triples; ``label`` is
    ``"deceptive"`` or ``"truthful"``.  Predictions are booleans (True means
    deceptive) in input order.
    """
    records = list(records)
    by_subject = {}
    for sid, _, value in records:
        by_subject.setdefault(sid, []).append(value)
    for sid, vals in by_subject.items():
        if len(vals) < 2:
            raise InvalidInputError(f"subject {sid!r} has fewer than 2 responses")
    thresholds = {sid: float(np.median(vals)) for sid, vals in by_subject.items()}
    preds = [bool(value > thresholds[sid]) for sid, _, value in records]
    truth = [label == "deceptive" for _, label, _ in records]
    acc = float(np.mean([p == t for p, t in zip(preds, truth)])) if records else float("nan")
    return ThresholdResult(preds, acc, thresholds)
