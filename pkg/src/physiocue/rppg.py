"""Pulse-waveform estimators working on per-frame face-ROI colour means.

Four classical estimators are provided: the chrominance method (CHROM), the
plane-orthogonal-to-skin method (POS), and two blind-source-separation
variants (POH10, POH11).  Waveforms produced elsewhere, e.g. by a neural
network evaluated on short clips, can be merged with
:func:`stitch_overlap_add` and wrapped as an ``EXTERNAL`` estimate.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import signal as sig
from .errors import DegenerateSignalError, InvalidInputError
from .ica import fastica
from .series import UniformSeries

METHODS = ("CHROM", "POS", "POH10", "POH11", "EXTERNAL")
DEFAULT_WINDOW_S = 1.6
#: Clip length used by the 3D-CNN pulse regressor (1.5 s at 90 fps).
DEFAULT_CLIP_LEN = 135


@dataclass(frozen=True)
class RoiBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise InvalidInputError(f"degenerate box {self}")

    @property
    def width(self):
        return self.x_max - self.x_min

    @property
    def height(self):
        return self.y_max - self.y_min

    @property
    def center(self):
        return (self.x_min + self.x_max) / 2, (self.y_min + self.y_max) / 2

    def contains(self, other: "RoiBox") -> bool:
        return (
            self.x_min <= other.x_min
            and self.y_min <= other.y_min
            and self.x_max >= other.x_max
            and self.y_max >= other.y_max
        )

    @classmethod
    def from_landmarks(cls, xs, ys) -> "RoiBox":
        return cls(float(np.min(xs)), float(np.min(ys)), float(np.max(xs)), float(np.max(ys)))


def expand_face_bbox(box: RoiBox, side=0.05, top=0.30, bottom=0.05) -> RoiBox:
    """Grow a landmark box to take in forehead, cheeks and jaw, then square it.

    Image coordinates are assumed (y grows downwards), so ``top`` extends
    ``y_min``.  The square is centred on the expanded box.
    """
    w, h = box.width, box.height
    x0, x1 = box.x_min - side * w, box.x_max + side * w
    y0, y1 = box.y_min - top * h, box.y_max + bottom * h
    half = max(x1 - x0, y1 - y0) / 2
    cx, cy = (x0 + x1) / 2, (y0 + y1) / 2
    return RoiBox(cx - half, cy - half, cx + half, cy + half)


@dataclass(frozen=True)
class ChannelTrace:
    """Spatial-mean R, G, B (and optionally NIR) value of the ROI per frame."""

    rgb: tuple
    nir: Optional[UniformSeries] = None

    def __post_init__(self):
        if len(self.rgb) != 3:
            raise InvalidInputError("rgb must hold exactly three series")
        chans = list(self.rgb) + ([self.nir] if self.nir is not None else [])
        n, rate = len(chans[0]), chans[0].rate_hz
        for c in chans:
            if len(c) != n or c.rate_hz != rate:
                raise InvalidInputError("all channels need equal length and rate")
            if np.any(c.samples < 0):
                raise InvalidInputError("channel means must be non-negative")
        object.__setattr__(self, "rgb", tuple(self.rgb))

    @classmethod
    def from_array(cls, rgb, rate_hz, start_time_s=0.0, nir=None) -> "ChannelTrace":
        """Build from an ``(n, 3)`` array of R, G, B means."""
        rgb = np.asarray(rgb, dtype=float)
        if rgb.ndim != 2 or rgb.shape[1] != 3:
            raise InvalidInputError(f"expected shape (n, 3), got {rgb.shape}")
        chans = tuple(UniformSeries(rgb[:, i], rate_hz, start_time_s) for i in range(3))
        nir_s = None if nir is None else UniformSeries(nir, rate_hz, start_time_s)
        return cls(chans, nir_s)

    @property
    def array(self) -> np.ndarray:
        return np.column_stack([c.samples for c in self.rgb])

    @property
    def rate_hz(self):
        return self.rgb[0].rate_hz

    @property
    def start_time_s(self):
        return self.rgb[0].start_time_s

    @property
    def frame_count(self):
        return len(self.rgb[0])

    def scaled(self, c: float) -> "ChannelTrace":
        nir = None if self.nir is None else self.nir.with_samples(c * self.nir.samples)
        return ChannelTrace(tuple(s.with_samples(c * s.samples) for s in self.rgb), nir)


@dataclass(frozen=True)
class PulseEstimate:
    waveform: UniformSeries
    method: str

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidInputError(f"unknown method {self.method!r}")


def _window_starts(n, length, stride):
    if n < length:
        return []
    starts = list(range(0, n - length + 1, stride))
    if starts[-1] != n - length:
        starts.append(n - length)
    return starts


def _window_len(trace, window_s):
    length = int(round(window_s * trace.rate_hz))
    if length < 4:
        raise InvalidInputError(f"window of {window_s} s is too short at {trace.rate_hz} Hz")
    if trace.frame_count < length:
        raise InvalidInputError(
            f"trace has {trace.frame_count} frames, fewer than one {length}-frame window"
        )
    return length


def chrom_pulse(
    trace: ChannelTrace,
    window_s: float = DEFAULT_WINDOW_S,
    band_hz=sig.DEFAULT_BAND_HZ,
    order: int = 2,
) -> PulseEstimate:
    """Chrominance pulse estimate, 50 % overlapping Hann-weighted windows."""
    c = trace.array
    n = c.shape[0]
    length = _window_len(trace, window_s)
    length += length % 2
    length = min(length, n)
    taper = sig.taper_window("hann", length)
    out = np.zeros(n)
    for w, start in enumerate(_window_starts(n, length, length // 2)):
        seg = c[start : start + length]
        mu = seg.mean(axis=0)
        if np.any(mu <= 0):
            raise DegenerateSignalError(
                f"zero-mean channel in window {w} (frames {start}-{start + length - 1})",
                window_index=w,
            )
        cn = seg / mu
        x = 3 * cn[:, 0] - 2 * cn[:, 1]
        y = 1.5 * cn[:, 0] + cn[:, 1] - 1.5 * cn[:, 2]
        xf = sig._bandpass_array(x, trace.rate_hz, band_hz[0], band_hz[1], order)
        yf = sig._bandpass_array(y, trace.rate_hz, band_hz[0], band_hz[1], order)
        x_flat, y_flat = sig.is_flat(xf), sig.is_flat(yf)
        if x_flat and y_flat:
            continue
        if y_flat:
            raise DegenerateSignalError(
                f"chrominance axis Y has zero variance in window {w} "
                f"(frames {start}-{start + length - 1})",
                window_index=w,
            )
        s = xf - (xf.std() / yf.std()) * yf
        out[start : start + length] += taper * s
    return PulseEstimate(UniformSeries(out, trace.rate_hz, trace.start_time_s), "CHROM")


def pos_pulse(trace: ChannelTrace, window_s: float = DEFAULT_WINDOW_S, chunk: int = 4096) -> PulseEstimate:
    """Plane-orthogonal-to-skin estimate, windows advanced one frame at a time.

    Windows in which the second projection is constant contribute nothing.
    No band-pass filtering is applied.
    """
    c = trace.array
    n = c.shape[0]
    length = _window_len(trace, window_s)
    views = sliding_window_view(c, length, axis=0)  # (n_win, 3, length)
    n_win = views.shape[0]
    out = np.zeros(n)
    for c0 in range(0, n_win, chunk):
        seg = views[c0 : c0 + chunk]
        mu = seg.mean(axis=2, keepdims=True)
        bad = np.any(mu[:, :, 0] <= 0, axis=1)
        if np.any(bad):
            w = c0 + int(np.argmax(bad))
            raise DegenerateSignalError(f"zero-mean channel in window {w}", window_index=w)
        cn = seg / mu
        s1 = cn[:, 1] - cn[:, 2]
        s2 = cn[:, 1] + cn[:, 2] - 2 * cn[:, 0]
        sd1, sd2 = s1.std(axis=1), s2.std(axis=1)
        scale2 = np.maximum(1.0, np.abs(s2).max(axis=1))
        ok = sd2 > 1e-12 * scale2
        alpha = np.where(ok, sd1 / np.where(ok, sd2, 1.0), 0.0)
        h = s1 + alpha[:, None] * s2
        h -= h.mean(axis=1, keepdims=True)
        h[~ok] = 0.0
        m = h.shape[0]
        for j in range(length):
            out[c0 + j : c0 + j + m] += h[:, j]
    return PulseEstimate(UniformSeries(out, trace.rate_hz, trace.start_time_s), "POS")


def band_peak_ratio(x: np.ndarray, rate_hz: float, band_hz=sig.HR_BAND_HZ) -> float:
    """Power of the strongest in-band bin over total (non-DC) power."""
    x = x - x.mean()
    p = np.abs(np.fft.rfft(x)) ** 2
    f = np.fft.rfftfreq(len(x), 1 / rate_hz)
    total = p[1:].sum()
    if total <= 0:
        return 0.0
    inband = (f >= band_hz[0]) & (f <= band_hz[1])
    return float(p[inband].max() / total) if np.any(inband) else 0.0


def ica_pulse(
    trace: ChannelTrace,
    variant: str = "POH11",
    seed: int = 0,
    detrend_lambda: float = sig.DEFAULT_DETREND_LAMBDA,
    band_hz=sig.DEFAULT_BAND_HZ,
    smooth_points: int = 5,
) -> PulseEstimate:
    """Blind-source-separation pulse estimate.

    POH10 z-scores the raw channels before ICA.  POH11 first detrends and
    band-passes every channel and smooths the chosen component with a
    ``smooth_points`` moving average.  Of the three independent components
    the one with the largest in-band spectral peak ratio is returned.
    """
    if variant not in ("POH10", "POH11"):
        raise InvalidInputError(f"unknown ICA variant {variant!r}")
    if trace.frame_count < 10 * trace.rate_hz:
        raise InvalidInputError("ICA estimators need at least 10 s of samples")
    chans = list(trace.rgb)
    if variant == "POH11":
        chans = [
            sig.bandpass_zero_phase(sig.detrend_smoothness_priors(s, detrend_lambda), *band_hz)
            for s in chans
        ]
    try:
        x = np.vstack([sig.standardize(s).samples for s in chans])
    except DegenerateSignalError as exc:
        raise DegenerateSignalError(f"constant channel, ICA is undefined: {exc}") from exc
    sources, _ = fastica(x, seed=seed)
    scores = [band_peak_ratio(s, trace.rate_hz) for s in sources]
    best = sources[int(np.argmax(scores))]
    out = UniformSeries(best, trace.rate_hz, trace.start_time_s)
    if variant == "POH11" and smooth_points > 1:
        out = sig.moving_average(out, smooth_points / trace.rate_hz)
    return PulseEstimate(out, variant)


def estimate_pulse(trace: ChannelTrace, method: str, seed: int = 0, **kwargs) -> PulseEstimate:
    """Dispatch to an estimator by its identifier (``CHROM``, ``POS``, ...)."""
    if method == "CHROM":
        return chrom_pulse(trace, **kwargs)
    if method == "POS":
        return pos_pulse(trace, **kwargs)
    if method in ("POH10", "POH11"):
        return ica_pulse(trace, method, seed=seed, **kwargs)
    raise InvalidInputError(f"method {method!r} cannot be computed from a channel trace")


def stitch_overlap_add(
    clips: Sequence[UniformSeries],
    clip_len: int = DEFAULT_CLIP_LEN,
    stride: Optional[int] = None,
) -> UniformSeries:
    """Merge per-clip waveform predictions into one series.

    Clip ``k`` is assumed to start at frame ``k * stride``.  Each clip is
    standardized and Hann tapered before being summed in.
    """
    if not clips:
        raise InvalidInputError("no clips to stitch")
    stride = clip_len // 2 if stride is None else stride
    if not 0 < stride <= clip_len:
        raise InvalidInputError("stride must be in (0, clip_len]")
    for k, c in enumerate(clips):
        if len(c) != clip_len:
            raise InvalidInputError(f"clip {k} has length {len(c)}, expected {clip_len}")
    taper = sig.taper_window("hann", clip_len)
    out = np.zeros((len(clips) - 1) * stride + clip_len)
    for k, c in enumerate(clips):
        out[k * stride : k * stride + clip_len] += taper * sig.standardize(c).samples
    first = clips[0]
    return UniformSeries(out, first.rate_hz, first.start_time_s)
