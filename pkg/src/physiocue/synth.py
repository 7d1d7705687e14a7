"""Seeded synthetic recordings with known ground truth.

All randomness comes from ``numpy.random.default_rng(seed)`` (the PCG64 bit
generator), so a given spec and numpy version reproduce bit-identical
output.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidInputError
from .hr import HeartRateSeries, OximeterRecord
from .microexpression import N_AUS, FauTrace
from .oculomotor import (
    BLOCK,
    GazeTrace,
    IntervalAnnotation,
    SaccadeEvent,
    angular_velocity,
    preprocess_gaze,
)
from .rppg import ChannelTrace
from .series import UniformSeries
from .sync import SyncPattern, beacon_state

# -- pulse ------------------------------------------------------------------------


@dataclass(frozen=True)
class PulseSynthSpec:
    """Face-ROI colour trace carrying a pulse.

    Heart rate ramps linearly from ``hr_start_bpm`` to ``hr_end_bpm`` (constant
    when the latter is None).  Drift is a multiplicative illumination change
    shared by all channels; ``motion_sd`` adds a common random-walk
    illumination component (per-sample step sd, relative to baseline).
    With ``channel_drift`` each channel gets its own drift phase, drift
    frequency (within 0.5-1.5x ``drift_hz``) and random walk, so the drift
    cannot be unmixed as one source.
    """

    seed: int = 0
    duration_s: float = 60.0
    rate_hz: float = 90.0
    hr_start_bpm: float = 72.0
    hr_end_bpm: Optional[float] = None
    amp: float = 0.01
    baseline: tuple = (1.0, 1.0, 1.0)
    gains: tuple = (0.3, 0.5, 0.2)
    noise_sd: float = 0.002
    drift_hz: float = 0.05
    drift_amp: float = 0.0
    motion_sd: float = 0.0
    channel_drift: bool = False
    oximeter_rate_hz: float = 60.0
    oximeter_delay_s: float = 0.0
    oximeter_noise_sd: float = 0.0
    spo2_pct: float = 98.0


def _hr_hz(spec: PulseSynthSpec, t):
    end = spec.hr_start_bpm if spec.hr_end_bpm is None else spec.hr_end_bpm
    return (spec.hr_start_bpm + (end - spec.hr_start_bpm) * np.asarray(t) / spec.duration_s) / 60.0


def _phase(spec: PulseSynthSpec, t):
    f0 = spec.hr_start_bpm / 60.0
    f1 = (spec.hr_start_bpm if spec.hr_end_bpm is None else spec.hr_end_bpm) / 60.0
    t = np.asarray(t, dtype=float)
    return f0 * t + (f1 - f0) * t**2 / (2 * spec.duration_s)


def pulse_waveform(phase):
    """Fundamental plus a half-amplitude second harmonic."""
    return np.sin(2 * np.pi * phase) + 0.5 * np.sin(4 * np.pi * phase + np.pi / 4)


def synth_pulse_trace(spec: PulseSynthSpec = PulseSynthSpec()):
    """Return ``(ChannelTrace, true_waveform, true_hr)``, all at ``spec.rate_hz``."""
    for bpm in (spec.hr_start_bpm, spec.hr_end_bpm):
        if bpm is not None and not 40.0 <= bpm <= 180.0:
            raise InvalidInputError("pulse schedule must stay within 40-180 bpm")
    rng = np.random.default_rng(spec.seed)
    n = int(round(spec.duration_s * spec.rate_hz))
    t = np.arange(n) / spec.rate_hz
    wave = pulse_waveform(_phase(spec, t))
    base = np.asarray(spec.baseline, dtype=float)
    gains = np.asarray(spec.gains, dtype=float)
    drift_phase = rng.uniform(0, 2 * np.pi)
    if spec.channel_drift:
        ph = rng.uniform(0, 2 * np.pi, 3)
        fr = spec.drift_hz * rng.uniform(0.5, 1.5, 3)
        illum = 1.0 + spec.drift_amp * np.sin(2 * np.pi * fr[None, :] * t[:, None] + ph[None, :])
        if spec.motion_sd > 0:
            walk = np.cumsum(rng.normal(0.0, spec.motion_sd, (n, 3)), axis=0)
            illum = illum + walk - walk.mean(axis=0)
    else:
        illum = 1.0 + spec.drift_amp * np.sin(2 * np.pi * spec.drift_hz * t + drift_phase)
        if spec.motion_sd > 0:
            walk = np.cumsum(rng.normal(0.0, spec.motion_sd, n))
            illum = illum + walk - walk.mean()
        illum = illum[:, None]
    rgb = base[None, :] * illum + spec.amp * gains[None, :] * wave[:, None]
    rgb = rgb + rng.normal(0.0, spec.noise_sd, (n, 3))
    rgb = np.maximum(rgb, 0.0)
    trace = ChannelTrace.from_array(rgb, spec.rate_hz)
    gt_wave = UniformSeries(wave, spec.rate_hz)
    gt_hr = HeartRateSeries(UniformSeries(60.0 * _hr_hz(spec, t), spec.rate_hz), "oximeter")
    return trace, gt_wave, gt_hr


def synth_oximeter(spec: PulseSynthSpec = PulseSynthSpec()) -> OximeterRecord:
    """Finger-oximeter record of the same pulse, delayed by ``oximeter_delay_s``."""
    rate = spec.oximeter_rate_hz
    n = int(round(spec.duration_s * rate))
    t = np.arange(n) / rate
    # separate stream so the colour trace is unaffected by oximeter settings
    rng = np.random.default_rng([spec.seed, 1])
    tau = np.clip(t - spec.oximeter_delay_s, 0.0, None)
    wave = pulse_waveform(_phase(spec, tau))
    if spec.oximeter_noise_sd > 0:
        wave = wave + rng.normal(0.0, spec.oximeter_noise_sd, n)
    hr = 60.0 * _hr_hz(spec, tau)
    return OximeterRecord(
        UniformSeries(np.full(n, spec.spo2_pct), rate),
        UniformSeries(hr, rate),
        UniformSeries(wave, rate),
    )


# -- gaze -------------------------------------------------------------------------


@dataclass(frozen=True)
class GazeSynthSpec:
    """Binocular gaze with fixation jitter and minimum-jerk saccades.

    ``jitter_sd_deg`` is the per-eye, per-axis sample jitter.  Saccades whose
    noise-free processed peak speed falls below ``min_peak_dps`` have their
    amplitude scaled up to reach it.
    """

    seed: int = 0
    duration_s: float = 60.0
    rate_hz: float = 90.0
    n_saccades: int = 20
    amplitude_deg: tuple = (3.0, 8.0)
    saccade_ms: tuple = (20.0, 40.0)
    jitter_sd_deg: float = 0.1
    min_peak_dps: float = 0.0
    max_eccentricity_deg: float = 15.0


def jitter_for_velocity_noise(velocity_sd_dps: float, rate_hz: float = 90.0, block: int = BLOCK) -> float:
    """Per-eye jitter (deg) giving the requested per-axis processed speed noise.

    Averaging two eyes and ``block`` frames divides the variance by
    ``2 * block``; differencing doubles it.
    """
    proc_rate = rate_hz / block
    return velocity_sd_dps / (proc_rate * math.sqrt(2.0 / (2.0 * block)))


def _min_jerk(tau):
    tau = np.clip(tau, 0.0, 1.0)
    return 10 * tau**3 - 15 * tau**4 + 6 * tau**5


def _saccade_onsets(rng, spec, n):
    # one saccade per equal slot, kept clear of slot edges
    slot = spec.duration_s / max(n, 1)
    margin = min(0.4 * slot, 1.0)
    return np.sort(np.arange(n) * slot + rng.uniform(margin, slot - margin, n))


def synth_gaze_trace(spec: GazeSynthSpec = GazeSynthSpec()):
    """Return ``(GazeTrace, true_events)``.

    Event frames index the processed velocity series (eyes averaged, 3-frame
    blocks, then differenced); each event spans the velocity samples the
    noise-free saccade affects, and its peak is the noise-free peak speed.
    """
    rng = np.random.default_rng(spec.seed)
    n = int(round(spec.duration_s * spec.rate_hz))
    t = np.arange(n) / spec.rate_hz
    onsets = _saccade_onsets(rng, spec, spec.n_saccades)
    amps = rng.uniform(*spec.amplitude_deg, spec.n_saccades)
    durs = rng.uniform(*spec.saccade_ms, spec.n_saccades) / 1000.0
    dirs = rng.uniform(0, 2 * np.pi, spec.n_saccades)
    x = np.zeros(n)
    y = np.zeros(n)
    pos = np.zeros(2)
    steps = []
    for k in range(spec.n_saccades):
        theta = dirs[k]
        target = pos + amps[k] * np.array([np.cos(theta), np.sin(theta)])
        if np.hypot(*target) > spec.max_eccentricity_deg:
            theta = math.atan2(-pos[1], -pos[0]) + rng.uniform(-0.5, 0.5)
        steps.append((theta, amps[k]))
        pos = pos + amps[k] * np.array([np.cos(theta), np.sin(theta)])

    def render(scale):
        xs, ys = np.zeros(n), np.zeros(n)
        for k, (theta, a) in enumerate(steps):
            prof = _min_jerk((t - onsets[k]) / durs[k]) * a * scale[k]
            xs += prof * np.cos(theta)
            ys += prof * np.sin(theta)
        return xs, ys

    scale = np.ones(spec.n_saccades)
    xs, ys = render(scale)
    events = _true_events(xs, ys, spec, onsets, durs)
    if spec.min_peak_dps > 0:
        peaks = np.array([e.peak_velocity_dps for e in events])
        scale = np.where(peaks < spec.min_peak_dps, spec.min_peak_dps * 1.0001 / peaks, 1.0)
        xs, ys = render(scale)
        events = _true_events(xs, ys, spec, onsets, durs)
    jitter = rng.normal(0.0, spec.jitter_sd_deg, (4, n))
    rad = np.pi / 180.0
    gaze = GazeTrace.from_arrays(
        (xs + jitter[0]) * rad, (ys + jitter[1]) * rad, spec.rate_hz,
        x_right=(xs + jitter[2]) * rad, y_right=(ys + jitter[3]) * rad,
    )
    return gaze, events


def _true_events(xs, ys, spec, onsets, durs):
    rad = np.pi / 180.0
    clean = GazeTrace.from_arrays(xs * rad, ys * rad, spec.rate_hz)
    v = angular_velocity(preprocess_gaze(clean)).samples
    proc_rate = spec.rate_hz / BLOCK
    events = []
    for t0, d in zip(onsets, durs):
        first = max(int(math.floor(t0 * proc_rate)) - 1, 0)
        last = min(int(math.ceil((t0 + d) * proc_rate)), len(v) - 1)
        seg = v[first : last + 1]
        nz = np.flatnonzero(seg > 1e-9 * max(seg.max(), 1.0))
        s, e = first + int(nz[0]), first + int(nz[-1])
        events.append(SaccadeEvent(s, e, float(v[s : e + 1].max())))
    return events


def match_events(detected, truth, slack: int = 1):
    """Precision and recall of detected saccades against the truth.

    A detection matches an unused true event when their frame spans overlap
    after widening the true span by ``slack`` frames.
    """
    used = set()
    tp = 0
    for d in detected:
        for j, g in enumerate(truth):
            if j in used:
                continue
            if d.start_frame <= g.end_frame + slack and d.end_frame >= g.start_frame - slack:
                used.add(j)
                tp += 1
                break
    precision = tp / len(detected) if detected else (1.0 if not truth else 0.0)
    recall = tp / len(truth) if truth else 1.0
    return precision, recall


# -- facial action units ------------------------------------------------------------


@dataclass(frozen=True)
class FauSynthSpec:
    """Resting AU intensities (baseline + white Gaussian noise) with triangular bumps.

    Bumps of ``event_s`` duration and ``amplitude`` are placed one per equal
    slot, each in a randomly chosen AU.
    """

    seed: int = 0
    duration_s: float = 60.0
    rate_hz: float = 90.0
    n_events: int = 10
    amplitude: float = 1.0
    event_s: tuple = (0.1, 0.5)
    noise_sd: float = 0.05
    baseline: float = 1.0


def synth_fau_trace(spec: FauSynthSpec = FauSynthSpec()):
    """Return ``(FauTrace, true_intervals)``; intervals are ``(onset, offset)`` frames."""
    rng = np.random.default_rng(spec.seed)
    n = int(round(spec.duration_s * spec.rate_hz))
    arr = spec.baseline + rng.normal(0.0, spec.noise_sd, (n, N_AUS))
    intervals = []
    if spec.n_events:
        slot = n / spec.n_events
        for k in range(spec.n_events):
            length = int(round(rng.uniform(*spec.event_s) * spec.rate_hz))
            length = max(3, length + 1 - length % 2)  # odd, so the apex is a frame
            au = int(rng.integers(N_AUS))
            lo = int(k * slot) + int(0.1 * slot)
            hi = int((k + 1) * slot) - int(0.1 * slot) - length
            onset = int(rng.integers(lo, max(hi, lo + 1)))
            h = (length - 1) // 2
            ramp = spec.amplitude * (1.0 - np.abs(np.arange(-h, h + 1)) / h)
            arr[onset : onset + length, au] += ramp
            intervals.append((onset, onset + length - 1))
    arr = np.maximum(arr, 0.0)
    return FauTrace.from_array(arr, spec.rate_hz), intervals


# -- per-response values ----------------------------------------------------------


@dataclass(frozen=True)
class ResponseSynthSpec:
    """Per-response HR and eye-movement rate for a cohort of subjects."""

    seed: int = 0
    n_subjects: int = 30
    n_responses: int = 20
    deceptive_fraction: float = 0.5
    hr_mean_bpm: float = 75.0
    hr_subject_sd: float = 8.0
    hr_sd: float = 3.0
    hr_deceptive_offset: float = 0.0
    emr_mean: float = 0.4
    emr_subject_sd: float = 0.1
    emr_sd: float = 0.05
    emr_deceptive_offset: float = 0.0


def synth_responses(spec: ResponseSynthSpec = ResponseSynthSpec()) -> list:
    """Rows ``(subject_id, question_id, label, hr_bpm, emr)``."""
    rng = np.random.default_rng(spec.seed)
    rows = []
    n_dec = int(round(spec.deceptive_fraction * spec.n_responses))
    for s in range(spec.n_subjects):
        sid = f"S{s:03d}"
        hr0 = spec.hr_mean_bpm + rng.normal(0, spec.hr_subject_sd)
        emr0 = max(spec.emr_mean + rng.normal(0, spec.emr_subject_sd), 0.05)
        deceptive = np.zeros(spec.n_responses, dtype=bool)
        deceptive[rng.permutation(spec.n_responses)[:n_dec]] = True
        for q in range(spec.n_responses):
            dec = bool(deceptive[q])
            hr = hr0 + rng.normal(0, spec.hr_sd) + (spec.hr_deceptive_offset if dec else 0.0)
            emr = emr0 + rng.normal(0, spec.emr_sd) + (spec.emr_deceptive_offset if dec else 0.0)
            rows.append((sid, q, "deceptive" if dec else "truthful", float(hr), float(max(emr, 0.0))))
    return rows


def synth_annotations(subject_id: str, duration_s: float, n_questions: int, seed: int = 0,
                      start_s: float = 0.0) -> list:
    """Alternating question/response intervals filling ``[start_s, duration_s)``."""
    rng = np.random.default_rng([seed, 7])
    slot = (duration_s - start_s) / n_questions
    out = []
    labels = np.array(["truthful", "deceptive"] * ((n_questions + 1) // 2))[:n_questions]
    labels = labels[rng.permutation(n_questions)]
    for q in range(n_questions):
        t0 = start_s + q * slot
        split = t0 + slot * rng.uniform(0.3, 0.45)
        out.append(IntervalAnnotation(q, "question", round(t0, 6), round(split, 6), None, subject_id))
        out.append(IntervalAnnotation(q, "response", round(split, 6), round(t0 + slot, 6), str(labels[q]), subject_id))
    return out


# -- synchronisation beacon -----------------------------------------------------------


def synth_sync_trace(
    pattern: SyncPattern = SyncPattern(),
    rate_hz: float = 90.0,
    duration_s: float = 200.0,
    offset_s: float = 0.0,
    sensor: str = "rgb",
    noise_sd: float = 0.0,
    seed: int = 0,
    low: float = 0.1,
    high: float = 0.9,
) -> UniformSeries:
    """Point-sampled beacon intensity seen by a sensor whose clock leads by ``offset_s``.

    The LWIR channel additionally lags by the shutter delay.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(int(round(duration_s * rate_hz))) / rate_hz
    delay = offset_s + (pattern.lwir_extra_delay_s if sensor == "lwir" else 0.0)
    on = beacon_state(pattern, t - delay)
    x = np.where(on, high, low)
    if noise_sd > 0:
        x = x + rng.normal(0.0, noise_sd, len(x))
    return UniformSeries(x, rate_hz)
