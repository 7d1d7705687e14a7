"""Heart-rate tracking from pulse waveforms and scoring against an oximeter."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from typing import Iterable, NamedTuple, Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import ZoomFFT

from . import signal as sig
from .errors import DegenerateSignalError, InvalidInputError
from .rppg import ChannelTrace, PulseEstimate, chrom_pulse, estimate_pulse
from .series import UniformSeries

DEFAULT_WINDOW_S = 30.0
DEFAULT_SMOOTH_S = 5.0
OXIMETER_RATE_HZ = 60.0


@dataclass(frozen=True)
class HeartRateSeries:
    hr_bpm: UniformSeries
    source: str = "estimated"

    def __post_init__(self):
        if self.source not in ("estimated", "oximeter"):
            raise InvalidInputError(f"unknown HR source {self.source!r}")

    def __len__(self):
        return len(self.hr_bpm)


@dataclass(frozen=True)
class EvalReport:
    me_bpm: float
    mae_bpm: float
    rmse_bpm: float
    pearson_r: Optional[float]
    n_windows: int
    method: str = ""

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class OximeterRecord:
    spo2_pct: UniformSeries
    hr_bpm: UniformSeries
    waveform: UniformSeries

    def __post_init__(self):
        n = len(self.waveform)
        if len(self.spo2_pct) != n or len(self.hr_bpm) != n:
            raise InvalidInputError("oximeter columns must have equal lengths")
        if np.any((self.spo2_pct.samples < 0) | (self.spo2_pct.samples > 100)):
            raise InvalidInputError("SpO2 must lie in [0, 100] %")

    @property
    def rate_hz(self):
        return self.waveform.rate_hz


class GroundTruth(NamedTuple):
    waveform: UniformSeries
    hr: HeartRateSeries
    shift_s: float


def _waveform(pulse) -> UniformSeries:
    return pulse.waveform if isinstance(pulse, PulseEstimate) else pulse


def raw_window_hr(
    pulse,
    window_s: float = DEFAULT_WINDOW_S,
    stride_frames: int = 1,
    band_hz=sig.HR_BAND_HZ,
    chunk: int = 256,
    max_bin_hz: float = sig.MAX_BIN_SPACING_HZ,
) -> UniformSeries:
    """Per-window spectral-peak heart rate (bpm) before smoothing.

    Each Hamming-tapered window is evaluated on the same frequency grid that
    :func:`physiocue.signal.spectral_peak_frequency` uses, via a chirp-z
    zoom so only in-band bins are computed.  Windows with no variation take
    the previous window's value (the next valid one at the very start).
    """
    s = _waveform(pulse)
    length = int(round(window_s * s.rate_hz))
    if stride_frames < 1:
        raise InvalidInputError("stride_frames must be >= 1")
    if len(s) < length or length < 2:
        raise InvalidInputError(
            f"recording of {len(s) / s.rate_hz:.2f} s is shorter than one {window_s} s window"
        )
    nfft, k_lo, k_hi = sig.spectral_grid(length, s.rate_hz, *band_hz, max_bin_hz=max_bin_hz)
    freqs = np.arange(k_lo, k_hi + 1) * s.rate_hz / nfft
    zoom = ZoomFFT(length, [freqs[0], freqs[-1] + (freqs[0] == freqs[-1])],
                   len(freqs), fs=s.rate_hz, endpoint=True)
    taper = np.hamming(length)
    views = sliding_window_view(s.samples, length)[::stride_frames]
    n_win = views.shape[0]
    hz = np.empty(n_win)
    valid = np.empty(n_win, dtype=bool)
    for c0 in range(0, n_win, chunk):
        w = views[c0 : c0 + chunk]
        sd = w.std(axis=1)
        scale = np.maximum(1.0, np.abs(w).max(axis=1))
        valid[c0 : c0 + len(w)] = sd > 1e-12 * scale
        mag = np.abs(zoom((w - w.mean(axis=1, keepdims=True)) * taper, axis=-1))
        hz[c0 : c0 + len(w)] = freqs[np.argmax(mag, axis=1)]
    if not valid.any():
        raise DegenerateSignalError("every window of the pulse waveform is flat")
    if not valid.all():
        idx = np.where(valid, np.arange(n_win), -1)
        idx = np.maximum.accumulate(idx)
        idx[idx < 0] = int(np.argmax(valid))
        hz = hz[idx]
    rate = s.rate_hz / stride_frames
    start = s.start_time_s + (length - 1) / (2 * s.rate_hz)
    return UniformSeries(60.0 * hz, rate, start)


def windowed_hr(
    pulse,
    window_s: float = DEFAULT_WINDOW_S,
    stride_frames: int = 1,
    smooth_s: float = DEFAULT_SMOOTH_S,
    band_hz=sig.HR_BAND_HZ,
    max_bin_hz: float = sig.MAX_BIN_SPACING_HZ,
) -> HeartRateSeries:
    """Heart rate tracked over sliding windows, then moving-average smoothed.

    Output samples sit at window centres; ``smooth_s=0`` skips smoothing.
    """
    hr = raw_window_hr(pulse, window_s, stride_frames, band_hz, max_bin_hz=max_bin_hz)
    if smooth_s > 0:
        hr = sig.moving_average(hr, smooth_s)
    return HeartRateSeries(hr, "estimated")


def prepare_ground_truth(
    ox: OximeterRecord,
    reference_pulse,
    target_rate_hz: float = 90.0,
    max_lag_s: float = 2.0,
) -> GroundTruth:
    """Upsample oximeter data and shift it onto the reference pulse.

    The oximeter waveform is delayed or advanced (within ``max_lag_s``) to
    maximise its normalised cross-correlation with ``reference_pulse``.  HR
    is shifted by the same amount.  Both outputs are on the reference clock.
    """
    ref = _waveform(reference_pulse)
    if ref.rate_hz != target_rate_hz:
        ref = sig.resample_linear(ref, target_rate_hz)
    wave = sig.resample_linear(ox.waveform, target_rate_hz)
    hr = sig.resample_linear(ox.hr_bpm, target_rate_hz)
    # crop both onto a common start instant before correlating
    offset = int(round((wave.start_time_s - ref.start_time_s) * target_rate_hz))
    if offset >= 0:
        ref = ref.slice(offset, len(ref))
    else:
        wave, hr = wave.slice(-offset, len(wave)), hr.slice(-offset, len(hr))
    if len(ref) < 2 or len(wave) < 2:
        raise InvalidInputError("oximeter and reference pulse do not overlap in time")
    max_lag = int(round(max_lag_s * target_rate_hz))
    lag, shifted = sig.align_by_xcorr(ref, wave, max_lag)
    i0 = int(round((shifted.start_time_s - ref.start_time_s) * target_rate_hz))
    hr_shift = hr.samples[i0 + lag : i0 + lag + len(shifted)]
    return GroundTruth(
        shifted,
        HeartRateSeries(UniformSeries(hr_shift, target_rate_hz, shifted.start_time_s), "oximeter"),
        lag / target_rate_hz,
    )


def hr_error_metrics(est, gt) -> EvalReport:
    """ME, MAE, RMSE and Pearson r of estimated versus reference HR.

    ``pearson_r`` is ``None`` when either series has no variation.
    """
    e = est.hr_bpm.samples if isinstance(est, HeartRateSeries) else np.asarray(est, float)
    g = gt.hr_bpm.samples if isinstance(gt, HeartRateSeries) else np.asarray(gt, float)
    if e.shape != g.shape:
        raise InvalidInputError(f"length mismatch: {e.shape} vs {g.shape}")
    if len(e) < 2:
        raise InvalidInputError("need at least 2 HR values")
    d = e - g
    r = None
    if not (sig.is_flat(e) or sig.is_flat(g)):
        r = sig.pearson_r(e, g)
    return EvalReport(
        float(d.mean()), float(np.abs(d).mean()), float(math.sqrt(np.mean(d**2))), r, len(d)
    )


def window_mean(series: UniformSeries, length: int, stride: int = 1) -> np.ndarray:
    """Mean of every ``length``-sample window advanced by ``stride``."""
    csum = np.concatenate([[0.0], np.cumsum(series.samples)])
    starts = np.arange(0, len(series) - length + 1, stride)
    return (csum[starts + length] - csum[starts]) / length


def paired_window_hr(pulse, gt: GroundTruth, window_s=DEFAULT_WINDOW_S, smooth_s=DEFAULT_SMOOTH_S, **hr_kw):
    """Estimated HR and mean reference HR over the same 30 s windows.

    Only windows fully covered by the reference are returned.  Extra keyword
    arguments go to :func:`windowed_hr`.
    """
    wave = _waveform(pulse)
    est = windowed_hr(wave, window_s, 1, smooth_s, **hr_kw).hr_bpm.samples
    length = int(round(window_s * wave.rate_hz))
    ref_hr = gt.hr.hr_bpm
    if ref_hr.rate_hz != wave.rate_hz:
        raise InvalidInputError("reference HR must share the pulse sample rate")
    off = int(round((ref_hr.start_time_s - wave.start_time_s) * wave.rate_hz))
    gt_means = window_mean(ref_hr, length)
    # window i of the pulse covers frames [i, i+length); reference index i-off
    first = max(0, off)
    last = min(len(est), off + len(gt_means))
    if last <= first:
        return np.empty(0), np.empty(0)
    return est[first:last], gt_means[first - off : last - off]


def evaluate_estimates(items, window_s=DEFAULT_WINDOW_S, smooth_s=DEFAULT_SMOOTH_S, max_lag_s=2.0,
                       hr_kwargs=None):
    """Pool window errors over ``(pulse, oximeter, reference_pulse)`` triples."""
    est_all, gt_all = [], []
    for pulse, ox, ref in items:
        wave = _waveform(pulse)
        gt = prepare_ground_truth(ox, ref, wave.rate_hz, max_lag_s)
        e, g = paired_window_hr(wave, gt, window_s, smooth_s, **(hr_kwargs or {}))
        est_all.append(e)
        gt_all.append(g)
    if not est_all:
        raise InvalidInputError("no recordings to evaluate")
    return hr_error_metrics(np.concatenate(est_all), np.concatenate(gt_all))


def evaluate_method(
    recordings: Iterable[tuple],
    method: str,
    seed: int = 0,
    window_s: float = DEFAULT_WINDOW_S,
    smooth_s: float = DEFAULT_SMOOTH_S,
    max_lag_s: float = 2.0,
    estimator_kwargs=None,
    hr_kwargs=None,
) -> EvalReport:
    """Run one estimator over ``(ChannelTrace, OximeterRecord)`` pairs.

    The oximeter is aligned to the CHROM waveform of each recording, as the
    reference that is independent of the method under test.  Errors of every
    window of every recording are pooled into one report.
    """
    recordings = list(recordings)
    if not recordings:
        raise InvalidInputError("no recordings to evaluate")
    kw = estimator_kwargs or {}
    items = []
    for trace, ox in recordings:
        pulse = estimate_pulse(trace, method, seed=seed, **kw)
        ref = pulse if method == "CHROM" else chrom_pulse(trace)
        items.append((pulse, ox, ref))
    report = evaluate_estimates(items, window_s, smooth_s, max_lag_s, hr_kwargs)
    return replace(report, method=method)
