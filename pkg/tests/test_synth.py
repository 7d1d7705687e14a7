"""Seeded generators: construction checks, null cases and golden digests."""
import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from physiocue.errors import InvalidInputError
from physiocue.hr import windowed_hr
from physiocue.microexpression import FauTrace
from physiocue.oculomotor import detect_from_gaze
from physiocue.rppg import chrom_pulse
from physiocue.stats import paired_samples_from_records, paired_t_test
from physiocue.sync import SyncPattern
from physiocue.synth import (
    FauSynthSpec,
    GazeSynthSpec,
    PulseSynthSpec,
    ResponseSynthSpec,
    synth_annotations,
    synth_fau_trace,
    synth_gaze_trace,
    synth_oximeter,
    synth_pulse_trace,
    synth_responses,
    synth_sync_trace,
)

GOLDEN = Path(__file__).parent / "golden" / "synth_sha256.json"


def _digest(*arrays):
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(np.asarray(a, dtype=np.float64)).tobytes())
    return h.hexdigest()


def current_digests():
    trace, wave, hr = synth_pulse_trace(PulseSynthSpec(seed=7, duration_s=20.0, drift_amp=0.05, motion_sd=1e-4))
    ox = synth_oximeter(PulseSynthSpec(seed=7, duration_s=20.0, oximeter_delay_s=0.2, oximeter_noise_sd=0.01))
    gaze, events = synth_gaze_trace(GazeSynthSpec(seed=7, duration_s=20.0, n_saccades=5))
    fau, ivs = synth_fau_trace(FauSynthSpec(seed=7, duration_s=20.0, n_events=4))
    rows = synth_responses(ResponseSynthSpec(seed=7, n_subjects=3, n_responses=4))
    anns = synth_annotations("S", 30.0, 3, seed=7)
    sync = synth_sync_trace(SyncPattern(), 9.0, 100.0, 1.234, "lwir", noise_sd=0.01, seed=7)
    return {
        "pulse": _digest(trace.array, wave.samples, hr.hr_bpm.samples),
        "oximeter": _digest(ox.waveform.samples, ox.hr_bpm.samples, ox.spo2_pct.samples),
        "gaze": _digest(*(c.samples for c in gaze.channels),
                        [(e.start_frame, e.end_frame, e.peak_velocity_dps) for e in events]),
        "fau": _digest(fau.array, ivs),
        "responses": _digest([r[3:] for r in rows], [r[2] == "deceptive" for r in rows]),
        "annotations": _digest([(a.start_s, a.end_s, a.label == "deceptive") for a in anns]),
        "sync": _digest(sync.samples),
    }


def test_outputs_match_golden_digests():
    # regenerate with: python -c "from tests.test_synth import write_golden; write_golden()"
    assert current_digests() == json.loads(GOLDEN.read_text())


def write_golden():
    GOLDEN.parent.mkdir(exist_ok=True)
    GOLDEN.write_text(json.dumps(current_digests(), indent=1, sort_keys=True) + "\n")


def test_same_seed_bit_identical_and_seeds_differ():
    a = synth_pulse_trace(PulseSynthSpec(seed=1, duration_s=5.0))[0].array
    b = synth_pulse_trace(PulseSynthSpec(seed=1, duration_s=5.0))[0].array
    c = synth_pulse_trace(PulseSynthSpec(seed=2, duration_s=5.0))[0].array
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


# -- pulse ------------------------------------------------------------------------------------


def test_constant_rate_ground_truth():
    _, _, hr = synth_pulse_trace(PulseSynthSpec(noise_sd=0.0, duration_s=10.0))
    np.testing.assert_array_equal(hr.hr_bpm.samples, 72.0)
    assert hr.source == "oximeter"


def test_ramp_ground_truth_and_phase():
    spec = PulseSynthSpec(duration_s=60.0, hr_start_bpm=60.0, hr_end_bpm=90.0, noise_sd=0.0)
    _, wave, hr = synth_pulse_trace(spec)
    t = np.arange(5400) / 90.0
    np.testing.assert_allclose(hr.hr_bpm.samples, 60.0 + 30.0 * t / 60.0, atol=1e-12)
    # instantaneous frequency of the phase equals the schedule
    phi = 1.0 * t + 0.5 * t**2 / 120.0
    expect = np.sin(2 * np.pi * phi) + 0.5 * np.sin(4 * np.pi * phi + np.pi / 4)
    np.testing.assert_allclose(wave.samples, expect, atol=1e-9)


def test_zero_amplitude_gives_no_false_pulse():
    trace, _, _ = synth_pulse_trace(PulseSynthSpec(seed=4, amp=0.0, duration_s=60.0))
    hr = windowed_hr(chrom_pulse(trace), stride_frames=90).hr_bpm.samples
    assert np.mean(np.abs(hr - 72.0) <= 1.0) < 0.5


def test_schedule_outside_band_rejected():
    with pytest.raises(InvalidInputError):
        synth_pulse_trace(PulseSynthSpec(hr_start_bpm=200.0))


def test_oximeter_is_delayed_copy():
    spec = PulseSynthSpec(duration_s=20.0, oximeter_delay_s=0.25)
    ox = synth_oximeter(spec)
    assert ox.rate_hz == 60.0 and len(ox.waveform) == 1200
    _, wave, _ = synth_pulse_trace(spec)
    # oximeter sample k at 60 Hz equals the face waveform at t - 0.25 s
    k = np.arange(61, 1200, 2)  # odd k keep 1.5 k - 22.5 integral
    np.testing.assert_allclose(ox.waveform.samples[k], wave.samples[(3 * k - 45) // 2], atol=1e-9)


# -- gaze / FAU -----------------------------------------------------------------------------------


def test_zero_saccades_detects_nothing():
    gaze, events = synth_gaze_trace(GazeSynthSpec(seed=1, n_saccades=0, jitter_sd_deg=0.02))
    assert events == []
    assert detect_from_gaze(gaze)[0] == []


def test_twenty_saccades_with_known_frames():
    gaze, events = synth_gaze_trace(GazeSynthSpec(seed=2))
    assert len(events) == 20
    starts = [e.start_frame for e in events]
    assert starts == sorted(starts)
    assert all(1 <= e.duration_frames for e in events)
    assert np.all(np.abs(np.concatenate([c.samples for c in gaze.channels])) <= np.pi / 2)


def test_min_peak_enforced():
    _, events = synth_gaze_trace(GazeSynthSpec(seed=3, min_peak_dps=150.0))
    assert min(e.peak_velocity_dps for e in events) >= 150.0


def test_fau_schedule():
    fau, ivs = synth_fau_trace(FauSynthSpec(seed=0, n_events=0))
    assert ivs == [] and isinstance(fau, FauTrace)
    fau, ivs = synth_fau_trace(FauSynthSpec(seed=0, n_events=6, noise_sd=0.0, amplitude=2.0))
    assert len(ivs) == 6
    arr = fau.array
    for on, off in ivs:
        assert (off - on) % 2 == 0 and 0.1 * 90 - 1 <= off - on + 1 <= 0.5 * 90 + 1
        apex = (on + off) // 2
        assert arr[apex].max() == pytest.approx(3.0)
        assert np.all(arr[on] == 1.0) and np.all(arr[off] == 1.0)


# -- responses / annotations -----------------------------------------------------------------------


def _hr_p(seed, offset):
    rows = synth_responses(ResponseSynthSpec(seed=seed, n_subjects=20, n_responses=10, hr_deceptive_offset=offset))
    return paired_t_test(paired_samples_from_records((r[0], r[2], r[3]) for r in rows)).p_two_sided


def test_zero_offset_rarely_significant():
    # [DERIVED] under the null, p < 0.01 in about 1 % of runs
    sig_runs = sum(_hr_p(s, 0.0) < 0.01 for s in range(100))
    assert sig_runs <= 5


def test_large_offset_highly_significant():
    # [DERIVED] +5 sd of the response noise
    assert all(_hr_p(s, 15.0) < 1e-4 for s in range(20))


def test_single_subject_t_test_invalid():
    rows = synth_responses(ResponseSynthSpec(seed=0, n_subjects=1, n_responses=6))
    with pytest.raises(InvalidInputError):
        paired_t_test(paired_samples_from_records((r[0], r[2], r[3]) for r in rows))


def test_annotations_tile_the_recording():
    anns = synth_annotations("S9", 60.0, 6, seed=1)
    assert len(anns) == 12
    for a, b in zip(anns, anns[1:]):
        assert a.end_s == b.start_s
    assert anns[0].start_s == 0.0 and anns[-1].end_s == 60.0
    labels = [a.label for a in anns if a.phase == "response"]
    assert labels.count("deceptive") == 3


def test_sync_trace_lwir_extra_delay():
    a = synth_sync_trace(SyncPattern(), 100.0, 20.0, 1.0, "rgb").samples
    b = synth_sync_trace(SyncPattern(), 100.0, 20.0, 1.0, "lwir").samples
    np.testing.assert_array_equal(a[:-5], b[5:])


def test_channel_drift_differs_between_channels():
    common = synth_pulse_trace(PulseSynthSpec(seed=3, amp=0.0, noise_sd=0.0, drift_amp=0.1))[0].array
    np.testing.assert_array_equal(common[:, 0], common[:, 1])
    own = synth_pulse_trace(PulseSynthSpec(seed=3, amp=0.0, noise_sd=0.0, drift_amp=0.1, motion_sd=1e-3,
                                           channel_drift=True))[0].array
    # rank 3: no single illumination source explains the three channels
    s = np.linalg.svd(own - own.mean(0), compute_uv=False)
    assert s[2] / s[0] > 1e-2
