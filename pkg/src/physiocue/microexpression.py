"""Multi-scale microexpression spotting on facial action unit intensities.

A microexpression is modelled as a rise then fall of some AU inside a short
window: the window start is the onset, its centre the apex and its end the
offset.  The likelihood at a given apex and scale is the apex intensity
minus the mean of the onset and offset intensities, maximised over AUs.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidInputError
from .oculomotor import IntervalAnnotation
from .series import UniformSeries

N_AUS = 18
#: OpenFace-style codes of the 18 intensity channels.
AU_NAMES = (
    "AU01", "AU02", "AU04", "AU05", "AU06", "AU07", "AU09", "AU10", "AU12",
    "AU14", "AU15", "AU17", "AU20", "AU23", "AU25", "AU26", "AU28", "AU45",
)
MAX_DURATION_S = 0.5
#: Window lengths at 90 Hz (0.1 to 0.5 s); other rates scale the durations.
DEFAULT_WINDOW_FRAMES_90HZ = (9, 15, 27, 45)
#: Default k of the dynamic threshold.  Under Gaussian AU noise k = 3 lets
#: ~4 % of frames through (~180 false candidates per minute at 90 Hz);
#: k = 8 keeps it below one per minute.
DEFAULT_K = 8.0
DEFAULT_SCALE_TOL = 0.8


@dataclass(frozen=True)
class FauTrace:
    au_intensities: tuple

    def __post_init__(self):
        if len(self.au_intensities) != N_AUS:
            raise InvalidInputError(f"expected {N_AUS} AU channels, got {len(self.au_intensities)}")
        n, rate = len(self.au_intensities[0]), self.au_intensities[0].rate_hz
        for c in self.au_intensities:
            if len(c) != n or c.rate_hz != rate:
                raise InvalidInputError("AU channels need equal length and rate")
            if np.any(c.samples < 0):
                raise InvalidInputError("AU intensities must be non-negative")
        object.__setattr__(self, "au_intensities", tuple(self.au_intensities))

    @classmethod
    def from_array(cls, arr, rate_hz, start_time_s=0.0) -> "FauTrace":
        """Build from an ``(n_frames, 18)`` array."""
        arr = np.asarray(arr, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != N_AUS:
            raise InvalidInputError(f"expected shape (n, {N_AUS}), got {arr.shape}")
        return cls(tuple(UniformSeries(arr[:, i], rate_hz, start_time_s) for i in range(N_AUS)))

    @property
    def array(self) -> np.ndarray:
        return np.column_stack([c.samples for c in self.au_intensities])

    @property
    def rate_hz(self):
        return self.au_intensities[0].rate_hz

    @property
    def start_time_s(self):
        return self.au_intensities[0].start_time_s

    def __len__(self):
        return len(self.au_intensities[0])


@dataclass(frozen=True)
class MicroexpressionCandidate:
    onset_frame: int
    apex_frame: int
    offset_frame: int
    likelihood: float
    window_len: int

    @property
    def interval(self):
        return (self.onset_frame, self.offset_frame)


@dataclass(frozen=True)
class LikelihoodMap:
    """Likelihood per window length (rows) and apex frame (columns)."""

    values: np.ndarray
    window_lens: tuple
    rate_hz: float


def default_window_lens(rate_hz: float, frames_90hz=DEFAULT_WINDOW_FRAMES_90HZ) -> tuple:
    """A 90 Hz scale set converted to odd frame counts at ``rate_hz``."""
    out = []
    for n90 in frames_90hz:
        n = int(round(n90 * rate_hz / 90.0))
        n += 1 - n % 2
        n = max(n, 3)
        if (n - 1) / rate_hz > MAX_DURATION_S:
            n -= 2
        if n >= 3 and n not in out:
            out.append(n)
    return tuple(out)


def _check_lens(window_lens, rate_hz):
    lens = tuple(sorted(int(L) for L in window_lens))
    if not lens:
        raise InvalidInputError("at least one window length is required")
    for L in lens:
        if L < 3 or L % 2 == 0:
            raise InvalidInputError(f"window length {L} must be odd and >= 3")
        if L > MAX_DURATION_S * rate_hz:
            raise InvalidInputError(f"window length {L} exceeds {MAX_DURATION_S} s at {rate_hz} Hz")
    return lens


def scan_window_likelihood(trace: FauTrace, window_lens=None) -> LikelihoodMap:
    """Apex-minus-endpoints likelihood for every frame and window length.

    Values are clamped at zero; frames closer than half a window to either
    end of the recording get zero.
    """
    if window_lens is None:
        window_lens = default_window_lens(trace.rate_hz)
    lens = _check_lens(window_lens, trace.rate_hz)
    s = trace.array
    n = s.shape[0]
    out = np.zeros((len(lens), n))
    for row, L in enumerate(lens):
        h = (L - 1) // 2
        if n <= 2 * h:
            continue
        centre = s[h : n - h]
        lik = centre - (s[: n - 2 * h] + s[2 * h :]) / 2
        out[row, h : n - h] = np.maximum(lik.max(axis=1), 0.0)
    return LikelihoodMap(out, lens, trace.rate_hz)


def mad(x) -> float:
    """Median absolute deviation (unscaled)."""
    x = np.asarray(x, dtype=float)
    return float(np.median(np.abs(x - np.median(x))))


def dynamic_threshold(trace: FauTrace, k: float = DEFAULT_K, window_lens=None, min_duration_s: float = 10.0) -> float:
    """Subject baseline threshold: median + k * MAD of smallest-scale likelihoods.

    Only frames where the smallest window fits are used.
    """
    if len(trace) < min_duration_s * trace.rate_hz:
        raise InvalidInputError(f"baseline needs at least {min_duration_s} s of AU data")
    lmap = scan_window_likelihood(trace, window_lens)
    h = (lmap.window_lens[0] - 1) // 2
    vals = lmap.values[0, h : len(trace) - h]
    return float(np.median(vals) + k * mad(vals))


def select_candidates(likelihoods: LikelihoodMap, threshold: float, scale_tol: float = DEFAULT_SCALE_TOL) -> list:
    """Greedy non-overlapping selection of candidates scoring above ``threshold``.

    Candidates are visited by descending likelihood, then earlier apex, then
    shorter window; a candidate is kept unless its closed ``[onset, offset]``
    frame interval touches one already kept.

    The likelihood saturates once a window spans the whole expression, so
    every longer window scores the same up to noise.  Each kept candidate is
    therefore narrowed to the shortest window at its apex scoring at least
    ``scale_tol`` times its likelihood.  Narrowing cannot create overlaps;
    ``scale_tol=1`` disables it.
    """
    if not 0 < scale_tol <= 1:
        raise InvalidInputError("scale_tol must be in (0, 1]")
    if threshold < 0:
        raise InvalidInputError("threshold must be >= 0")
    vals = likelihoods.values
    rows, cols = np.nonzero(vals > threshold)
    if rows.size == 0:
        return []
    lens = np.asarray(likelihoods.window_lens)
    order = np.lexsort((lens[rows], cols, -vals[rows, cols]))
    taken = np.zeros(vals.shape[1], dtype=bool)
    kept = []
    for i in order:
        L = int(lens[rows[i]])
        apex = int(cols[i])
        h = (L - 1) // 2
        on, off = apex - h, apex + h
        if taken[on : off + 1].any():
            continue
        taken[on : off + 1] = True
        lik = float(vals[rows[i], apex])
        for r in range(rows[i]):
            if vals[r, apex] >= scale_tol * lik:
                L = int(lens[r])
                h = (L - 1) // 2
                on, off = apex - h, apex + h
                break
        kept.append(MicroexpressionCandidate(on, apex, off, lik, L))
    kept.sort(key=lambda c: c.apex_frame)
    return kept


def spot(trace: FauTrace, k: float = DEFAULT_K, window_lens=None, scale_tol: float = DEFAULT_SCALE_TOL) -> list:
    """Scan, threshold against the trace's own baseline, and select."""
    lmap = scan_window_likelihood(trace, window_lens)
    return select_candidates(lmap, dynamic_threshold(trace, k, lmap.window_lens), scale_tol)


def _iou(a, b) -> float:
    inter = min(a[1], b[1]) - max(a[0], b[0])
    union = max(a[1], b[1]) - min(a[0], b[0])
    if inter <= 0 or union <= 0:
        return 0.0
    return inter / union


def interval_f1(predicted: Sequence, ground_truth: Sequence, iou_min: float = 0.5):
    """Precision, recall and F1 under one-to-one IoU matching.

    Intervals are ``(start, end)`` pairs with length ``end - start``.  Pairs
    are matched greedily by descending IoU and count when IoU >= ``iou_min``.
    Both sets empty scores 1 everywhere.
    """
    if not 0 < iou_min <= 1:
        raise InvalidInputError("iou_min must be in (0, 1]")
    pred = [tuple(p) for p in predicted]
    gt = [tuple(g) for g in ground_truth]
    if not pred and not gt:
        return 1.0, 1.0, 1.0
    pairs = []
    for i, p in enumerate(pred):
        for j, g in enumerate(gt):
            v = _iou(p, g)
            if v >= iou_min:
                pairs.append((-v, i, j))
    pairs.sort()
    used_p, used_g = set(), set()
    tp = 0
    for _, i, j in pairs:
        if i in used_p or j in used_g:
            continue
        used_p.add(i)
        used_g.add(j)
        tp += 1
    precision = tp / len(pred) if pred else 0.0
    recall = tp / len(gt) if gt else 0.0
    f1 = 2 * precision * recall / (precision + recall) if tp else 0.0
    return precision, recall, f1


def me_rate_over_interval(
    candidates: Iterable[MicroexpressionCandidate],
    interval: IntervalAnnotation,
    rate_hz: float,
    start_time_s: float = 0.0,
) -> float:
    """Microexpressions per second with apex inside ``[start_s, end_s)``."""
    if not interval.duration_s > 0:
        raise InvalidInputError("interval duration must be > 0")
    n = sum(1 for c in candidates if interval.contains(start_time_s + c.apex_frame / rate_hz))
    return n / interval.duration_s
