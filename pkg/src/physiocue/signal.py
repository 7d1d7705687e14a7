"""DSP primitives shared by the analysis modules.

Every function takes and returns :class:`~physiocue.series.UniformSeries`
(or plain numbers) and has no side effects.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import signal as sps
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .errors import DegenerateSignalError, InvalidInputError
from .series import TAPERS, UniformSeries

#: Smoothness-priors regularisation weight.  At 90 Hz this puts the detrender's
#: -3 dB corner near 0.3 Hz: a 0.05 Hz drift loses > 60 dB while a 1.2 Hz
#: pulse loses < 0.05 dB.  Anything in roughly [410, 25000] satisfies the
#: 20 dB / 1 dB requirement at 90 Hz.
DEFAULT_DETREND_LAMBDA = 2000.0
DEFAULT_BAND_HZ = (0.65, 3.0)
#: Heart-rate search band, 40 to 180 bpm.
HR_BAND_HZ = (2.0 / 3.0, 3.0)
#: Spectral grid spacing in Hz (0.25 bpm).
MAX_BIN_SPACING_HZ = 1.0 / 240.0


def is_flat(x, rtol=1e-12) -> bool:
    """True if ``x`` has no variation beyond floating point noise."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return True
    scale = max(1.0, float(np.max(np.abs(x))))
    return float(np.std(x)) <= rtol * scale


def taper_window(kind: str, n: int) -> np.ndarray:
    if kind not in TAPERS:
        raise InvalidInputError(f"unknown taper {kind!r}")
    if kind == "rectangular":
        return np.ones(n)
    if kind == "hamming":
        return np.hamming(n)
    return sps.windows.hann(n, sym=False)


def resample_linear(s: UniformSeries, target_rate_hz: float) -> UniformSeries:
    """Linearly interpolate ``s`` onto a grid at ``target_rate_hz``.

    The new grid starts at the same instant and keeps every point that
    falls inside the original span.
    """
    if not target_rate_hz > 0:
        raise InvalidInputError("target_rate_hz must be > 0")
    if len(s) < 2:
        raise InvalidInputError("resampling needs at least 2 samples")
    n_out = int(math.floor(s.duration_s * target_rate_hz + 1e-9)) + 1
    t_new = np.arange(n_out) / target_rate_hz
    t_old = np.arange(len(s)) / s.rate_hz
    return UniformSeries(np.interp(t_new, t_old, s.samples), target_rate_hz, s.start_time_s)


def detrend_smoothness_priors(s: UniformSeries, lam: float = DEFAULT_DETREND_LAMBDA) -> UniformSeries:
    """Remove a smooth trend by second-difference regularised least squares.

    The trend ``z`` minimises ``|x - z|^2 + lam^2 |D2 z|^2``; the result is
    ``x - z``.
    """
    if not lam > 0:
        raise InvalidInputError("lambda must be > 0")
    n = len(s)
    if n < 3:
        raise InvalidInputError("detrending needs at least 3 samples")
    ones = np.ones(n - 2)
    d2 = sparse.diags([ones, -2 * ones, ones], [0, 1, 2], shape=(n - 2, n))
    a = (sparse.identity(n) + lam**2 * (d2.T @ d2)).tocsc()
    trend = spsolve(a, s.samples)
    return s.with_samples(s.samples - trend)


def bandpass_zero_phase(
    s: UniformSeries,
    low_hz: float = DEFAULT_BAND_HZ[0],
    high_hz: float = DEFAULT_BAND_HZ[1],
    order: int = 2,
) -> UniformSeries:
    """Butterworth band-pass run forward then backward (no phase shift)."""
    nyq = s.rate_hz / 2.0
    if not 0 < low_hz < high_hz < nyq:
        raise InvalidInputError(
            f"band [{low_hz}, {high_hz}] Hz must lie inside (0, {nyq}) Hz"
        )
    return s.with_samples(_bandpass_array(s.samples, s.rate_hz, low_hz, high_hz, order))


def _bandpass_array(x, rate_hz, low_hz, high_hz, order=2, axis=-1):
    sos = sps.butter(order, [low_hz, high_hz], btype="bandpass", fs=rate_hz, output="sos")
    n = np.shape(x)[axis]
    padlen = min(3 * (2 * len(sos) + 1), n - 1)
    return sps.sosfiltfilt(sos, x, axis=axis, padlen=padlen)


def spectral_grid(n: int, rate_hz: float, min_hz: float, max_hz: float, max_bin_hz: float = MAX_BIN_SPACING_HZ):
    """FFT length and inclusive bin range used for peak picking.

    The length is at least ``n`` and fine enough that bins are no more than
    ``max_bin_hz`` (0.25 bpm by default) apart.
    """
    if not max_bin_hz > 0:
        raise InvalidInputError("max_bin_hz must be > 0")
    nfft = max(n, int(math.ceil(rate_hz / max_bin_hz - 1e-9)))
    k_lo = int(math.ceil(min_hz * nfft / rate_hz - 1e-9))
    k_hi = int(math.floor(max_hz * nfft / rate_hz + 1e-9))
    if k_hi < k_lo:
        raise InvalidInputError("search band contains no frequency bins")
    return nfft, k_lo, k_hi


def spectral_peak_frequency(
    s: UniformSeries,
    taper: str = "hamming",
    min_hz: float = HR_BAND_HZ[0],
    max_hz: float = HR_BAND_HZ[1],
) -> float:
    """Frequency of the largest zero-padded magnitude-spectrum bin in a band.

    The mean is removed before tapering so the result does not depend on a
    DC offset.
    """
    n = len(s)
    if n < 2:
        raise InvalidInputError("need at least 2 samples")
    if not 0 <= min_hz < max_hz <= s.rate_hz / 2 + 1e-12:
        raise InvalidInputError(f"band [{min_hz}, {max_hz}] Hz is invalid for rate {s.rate_hz}")
    x = s.samples
    if is_flat(x):
        raise DegenerateSignalError("zero-variance signal has no spectral peak")
    nfft, k_lo, k_hi = spectral_grid(n, s.rate_hz, min_hz, max_hz)
    spec = np.abs(np.fft.rfft((x - x.mean()) * taper_window(taper, n), nfft))
    k = k_lo + int(np.argmax(spec[k_lo : k_hi + 1]))
    return k * s.rate_hz / nfft


def moving_average(s: UniformSeries, width_s: float) -> UniformSeries:
    """Centred moving mean; windows shrink at the edges so length is kept.

    The window spans ``2 * h + 1`` samples with ``h = round(width_s * rate) // 2``.
    """
    if not width_s > 0:
        raise InvalidInputError("width_s must be > 0")
    n = len(s)
    h = int(round(width_s * s.rate_hz)) // 2
    csum = np.concatenate([[0.0], np.cumsum(s.samples)])
    idx = np.arange(n)
    lo = np.maximum(idx - h, 0)
    hi = np.minimum(idx + h + 1, n)
    return s.with_samples((csum[hi] - csum[lo]) / (hi - lo))


def standardize(s: UniformSeries) -> UniformSeries:
    """Zero mean, unit population standard deviation (divide by n)."""
    x = s.samples
    if len(x) == 0 or is_flat(x):
        raise DegenerateSignalError("cannot standardize a zero-variance series")
    return s.with_samples((x - x.mean()) / x.std())


def _values(a):
    return a.samples if isinstance(a, UniformSeries) else np.asarray(a, dtype=float)


def pearson_r(a, b) -> float:
    """Pearson correlation between two equal-length series (or arrays)."""
    x, y = _values(a), _values(b)
    if x.shape != y.shape or x.ndim != 1:
        raise InvalidInputError(f"length mismatch: {x.shape} vs {y.shape}")
    if len(x) < 2:
        raise InvalidInputError("need at least 2 samples")
    if is_flat(x) or is_flat(y):
        raise InvalidInputError("pearson_r is undefined for a zero-variance input")
    xc = x - x.mean()
    yc = y - y.mean()
    r = float(np.dot(xc, yc) / math.sqrt(np.dot(xc, xc) * np.dot(yc, yc)))
    return min(1.0, max(-1.0, r))


def neg_pearson_loss(a, b) -> float:
    """Training loss for waveform regressors: ``-pearson_r(a, b)``."""
    return -pearson_r(a, b)


def _overlap(n_ref, n_tgt, lag):
    # reference[i] pairs with target[i + lag]
    i0 = max(0, -lag)
    i1 = min(n_ref, n_tgt - lag)
    return i0, i1


def align_by_xcorr(reference: UniformSeries, target: UniformSeries, max_lag_samples: int):
    """Find the delay of ``target`` relative to ``reference``.

    Returns ``(lag, shifted)``.  A positive lag means the target lags the
    reference: ``target[i + lag]`` best matches ``reference[i]``.  ``shifted``
    holds the target samples that overlap the reference once the lag is
    removed, timestamped on the reference clock.
    """
    if reference.rate_hz != target.rate_hz:
        raise InvalidInputError("reference and target rates differ")
    if max_lag_samples < 0:
        raise InvalidInputError("max_lag_samples must be >= 0")
    x, y = reference.samples, target.samples
    best_lag, best_r = 0, -np.inf
    for lag in range(-max_lag_samples, max_lag_samples + 1):
        i0, i1 = _overlap(len(x), len(y), lag)
        if i1 - i0 < 2:
            continue
        xa = x[i0:i1] - x[i0:i1].mean()
        ya = y[i0 + lag : i1 + lag] - y[i0 + lag : i1 + lag].mean()
        denom = math.sqrt(np.dot(xa, xa) * np.dot(ya, ya))
        if denom == 0:
            continue
        r = np.dot(xa, ya) / denom
        if r > best_r:
            best_lag, best_r = lag, r
    if not np.isfinite(best_r):
        raise DegenerateSignalError("no lag gives a defined correlation")
    i0, i1 = _overlap(len(x), len(y), best_lag)
    shifted = UniformSeries(
        y[i0 + best_lag : i1 + best_lag],
        reference.rate_hz,
        reference.start_time_s + i0 / reference.rate_hz,
    )
    return best_lag, shifted


def shift_series(s: UniformSeries, k: int) -> UniformSeries:
    """Delay ``s`` by ``k`` samples (advance if negative), zero-filling."""
    out = np.zeros(len(s))
    if k >= 0:
        out[k:] = s.samples[: len(s) - k]
    else:
        out[:k] = s.samples[-k:]
    return s.with_samples(out)
