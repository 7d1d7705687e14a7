"""DSP primitives against closed-form and brute-force oracles."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import signal as sps

from physiocue import signal as sig
from physiocue.errors import DegenerateSignalError, InvalidInputError
from physiocue.series import UniformSeries, WindowSpec

RATE = 90.0


def tone(f, n=2700, rate=RATE, amp=1.0, phase=0.3):
    t = np.arange(n) / rate
    return UniformSeries(amp * np.sin(2 * np.pi * f * t + phase), rate)


def interior_amplitude(x, margin):
    seg = x[margin:-margin]
    return math.sqrt(2) * seg.std()


# -- series -------------------------------------------------------------------


def test_series_is_read_only_and_timed():
    s = UniformSeries([1, 2, 3], 10.0, 2.0)
    assert s.duration_s == pytest.approx(0.2)
    assert s.end_time_s == pytest.approx(2.2)
    np.testing.assert_allclose(s.times, [2.0, 2.1, 2.2])
    with pytest.raises(ValueError):
        s.samples[0] = 5.0
    assert s.slice(1, 3).start_time_s == pytest.approx(2.1)


def test_series_rejects_bad_rate_and_shape():
    with pytest.raises(InvalidInputError):
        UniformSeries([1.0], 0.0)
    with pytest.raises(InvalidInputError):
        UniformSeries(np.zeros((2, 2)), 1.0)


def test_window_spec_counts():
    assert WindowSpec(30, 1).n_windows(100) == 71
    assert WindowSpec(30, 10).n_windows(29) == 0
    with pytest.raises(InvalidInputError):
        WindowSpec(10, 11)


# -- detrending -----------------------------------------------------------------


def detrend_gain(f, rate, lam):
    # stationary frequency response of x - (I + lam^2 D'D)^-1 x
    w = 2 * np.pi * f / rate
    k = lam**2 * (2 - 2 * np.cos(w)) ** 2
    return k / (1 + k)


@pytest.mark.parametrize("f", [0.05, 0.3, 1.2])
def test_detrend_matches_frequency_response(f):
    # [DERIVED] interior behaves like the infinite-length filter
    n = 27000
    s = tone(f, n)
    out = sig.detrend_smoothness_priors(s)
    got = interior_amplitude(out.samples, 9000)
    assert got == pytest.approx(detrend_gain(f, RATE, sig.DEFAULT_DETREND_LAMBDA), rel=0.02, abs=1e-5)


def test_default_lambda_meets_attenuation_targets():
    # [DERIVED] >= 20 dB on a 0.05 Hz drift, < 1 dB loss at 72 bpm
    drift_db = -20 * math.log10(detrend_gain(0.05, RATE, sig.DEFAULT_DETREND_LAMBDA))
    pulse_db = -20 * math.log10(detrend_gain(1.2, RATE, sig.DEFAULT_DETREND_LAMBDA))
    assert drift_db >= 20
    assert pulse_db < 1


def test_detrend_removes_linear_trend_exactly():
    s = UniformSeries(3.0 + 0.5 * np.arange(200), RATE)
    # second differences of a line vanish; only solver round-off remains
    np.testing.assert_allclose(sig.detrend_smoothness_priors(s).samples, 0.0, atol=1e-6)


def test_detrend_validation():
    with pytest.raises(InvalidInputError):
        sig.detrend_smoothness_priors(UniformSeries([1.0, 2.0], RATE))
    with pytest.raises(InvalidInputError):
        sig.detrend_smoothness_priors(tone(1.0), lam=0)


# -- band-pass ---------------------------------------------------------------------


@pytest.mark.parametrize("f", [0.1, 0.65, 1.2, 3.0, 8.0])
def test_bandpass_gain_is_squared_butterworth_magnitude(f):
    # [DERIVED] forward-backward filtering squares the one-pass magnitude
    sos = sps.butter(2, sig.DEFAULT_BAND_HZ, btype="bandpass", fs=RATE, output="sos")
    _, h = sps.sosfreqz(sos, worN=[f], fs=RATE)
    expected = abs(h[0]) ** 2
    out = sig.bandpass_zero_phase(tone(f, 9000))
    assert interior_amplitude(out.samples, 2500) == pytest.approx(expected, rel=0.02, abs=2e-4)


def test_bandpass_is_zero_phase():
    s = tone(1.2, 2700)
    out = sig.bandpass_zero_phase(s)
    lag = np.argmax(np.correlate(out.samples[500:-500], s.samples[500:-500], "full")) - (len(s) - 1001)
    assert lag == 0


def test_bandpass_rejects_band_above_nyquist():
    with pytest.raises(InvalidInputError):
        sig.bandpass_zero_phase(tone(1.0, rate=5.0), 0.5, 3.0)


# -- spectral peak ------------------------------------------------------------------


def test_spectral_grid_spacing_is_at_most_quarter_bpm():
    for n, rate in [(2700, 90.0), (100, 30.0), (50000, 90.0)]:
        nfft, _, _ = sig.spectral_grid(n, rate, *sig.HR_BAND_HZ)
        assert rate / nfft <= 1 / 240 + 1e-15
        assert nfft >= n


@given(st.floats(0.7, 2.95), st.floats(-5, 5))
@settings(max_examples=40, deadline=None)
def test_peak_frequency_within_one_bin_and_ignores_offset(f, offset):
    s = tone(f, 2700)
    shifted = s.with_samples(s.samples + offset)
    got = sig.spectral_peak_frequency(shifted)
    assert abs(got - f) <= 1 / 240 + 1e-12
    assert got == sig.spectral_peak_frequency(s)


def test_peak_frequency_flat_signal_raises():
    with pytest.raises(DegenerateSignalError):
        sig.spectral_peak_frequency(UniformSeries(np.full(100, 2.0), RATE))


def test_peak_frequency_scale_invariant():
    s = tone(1.37, 2700)
    assert sig.spectral_peak_frequency(s.with_samples(7.5 * s.samples)) == sig.spectral_peak_frequency(s)


# -- moving average --------------------------------------------------------------------


def brute_moving_average(x, h):
    return np.array([x[max(0, i - h) : i + h + 1].mean() for i in range(len(x))])


@given(arrays(np.float64, st.integers(1, 80), elements=st.floats(-100, 100)), st.floats(0.02, 1.0))
@settings(max_examples=60, deadline=None)
def test_moving_average_matches_brute_force(x, width_s):
    s = UniformSeries(x, 20.0)
    h = int(round(width_s * 20.0)) // 2
    np.testing.assert_allclose(sig.moving_average(s, width_s).samples, brute_moving_average(x, h), atol=1e-9)


def test_moving_average_of_alternating_sign_interior():
    # interior windows of odd length average +-1 to +-1/(2h+1)
    x = np.array([1.0, -1.0] * 50)
    out = sig.moving_average(UniformSeries(x, 10.0), 0.5).samples
    assert np.all(np.abs(np.abs(out[2:-2]) - 1 / 5) < 1e-12)


@given(st.floats(-1e3, 1e3), st.integers(1, 60))
def test_moving_average_of_constant_is_constant(c, n):
    out = sig.moving_average(UniformSeries(np.full(n, c), 30.0), 1.0).samples
    np.testing.assert_allclose(out, c, rtol=1e-12, atol=1e-9)


# -- standardize / pearson ------------------------------------------------------------------


finite = st.floats(-1e3, 1e3, allow_nan=False)


@given(arrays(np.float64, st.integers(3, 200), elements=finite))
def test_standardize_properties(x):
    s = UniformSeries(x, 10.0)
    if sig.is_flat(x):
        with pytest.raises(DegenerateSignalError):
            sig.standardize(s)
        return
    z = sig.standardize(s).samples
    assert abs(z.mean()) < 1e-9
    assert abs(z.std() - 1) < 1e-9  # population sd


@given(arrays(np.float64, 40, elements=finite), arrays(np.float64, 40, elements=finite))
def test_pearson_matches_numpy_and_is_bounded(a, b):
    if sig.is_flat(a) or sig.is_flat(b):
        return
    r = sig.pearson_r(a, b)
    assert -1 <= r <= 1
    assert r == pytest.approx(np.corrcoef(a, b)[0, 1], abs=1e-8)
    assert r == pytest.approx(sig.pearson_r(b, a), abs=1e-12)


def test_neg_pearson_loss_extremes():
    x = np.sin(np.linspace(0, 10, 300)) + 0.1 * np.arange(300)
    assert abs(sig.neg_pearson_loss(x, x) + 1) <= 1e-12
    assert abs(sig.neg_pearson_loss(x, -x) - 1) <= 1e-12


def test_pearson_rejects_flat_and_mismatch():
    with pytest.raises(InvalidInputError):
        sig.pearson_r(np.ones(5), np.arange(5.0))
    with pytest.raises(InvalidInputError):
        sig.pearson_r(np.arange(5.0), np.arange(6.0))


# -- alignment / resampling ----------------------------------------------------------------


@pytest.mark.parametrize("delay", [-40, -3, 0, 7, 55])
def test_align_by_xcorr_recovers_delay(delay):
    rng = np.random.default_rng(4)
    base = rng.normal(size=3000)
    ref = UniformSeries(base[100:2100], RATE)
    tgt = UniformSeries(base[100 - delay : 2100 - delay], RATE)
    lag, shifted = sig.align_by_xcorr(ref, tgt, 90)
    assert lag == delay
    # shifted samples line up with the reference on its clock
    off = int(round((shifted.start_time_s - ref.start_time_s) * RATE))
    np.testing.assert_array_equal(shifted.samples, ref.samples[off : off + len(shifted)])


def test_shift_series_zero_fills():
    s = UniformSeries([1.0, 2.0, 3.0, 4.0], 1.0)
    np.testing.assert_array_equal(sig.shift_series(s, 1).samples, [0, 1, 2, 3])
    np.testing.assert_array_equal(sig.shift_series(s, -2).samples, [3, 4, 0, 0])


@given(st.floats(5, 200), st.floats(5, 200))
@settings(max_examples=30)
def test_resample_linear_matches_interp(src, dst):
    t = np.arange(200) / src
    s = UniformSeries(np.cos(t), src, 1.5)
    out = sig.resample_linear(s, dst)
    assert out.start_time_s == 1.5
    assert out.times[-1] <= s.end_time_s + 1e-9
    np.testing.assert_allclose(out.samples, np.interp(np.arange(len(out)) / dst, t, s.samples), atol=1e-12)


def test_oximeter_60hz_to_90hz_grid_length():
    s = UniformSeries(np.zeros(601), 60.0)  # 10 s
    assert len(sig.resample_linear(s, 90.0)) == 901
