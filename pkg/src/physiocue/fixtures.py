"""Write a complete synthetic recording set in the on-disk formats.

The set mirrors a real session: a face colour trace, a finger oximeter, a
facial-analysis export, question/response annotations and three beacon
traces per subject, plus a manifest.  ``truth.json`` records what was
injected so analyses can be checked end to end.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import io
from .microexpression import dynamic_threshold
from .synth import (
    FauSynthSpec,
    GazeSynthSpec,
    PulseSynthSpec,
    ResponseSynthSpec,
    jitter_for_velocity_noise,
    synth_annotations,
    synth_fau_trace,
    synth_gaze_trace,
    synth_oximeter,
    synth_pulse_trace,
    synth_responses,
    synth_sync_trace,
)
from .sync import SyncPattern

SENSOR_RATES_HZ = {"rgb": 90.0, "nir": 90.0, "lwir": 9.0}


def _landmarks(rng, n, rate_hz):
    # a fixed 68-point template (ellipse) translated by slow head sway
    ang = np.linspace(0, 2 * np.pi, io.N_LANDMARKS, endpoint=False)
    bx, by = 320 + 80 * np.cos(ang), 240 + 100 * np.sin(ang)
    t = np.arange(n) / rate_hz
    sway = rng.uniform(2, 6) * np.sin(2 * np.pi * 0.1 * t + rng.uniform(0, 2 * np.pi))
    return bx[None, :] + sway[:, None], by[None, :] + 0.5 * sway[:, None]


def _split(i: int) -> str:
    return ("train", "train", "val", "test")[i % 4]


def write_synthetic_dataset(
    out_dir,
    seed: int = 0,
    n_subjects: int = 4,
    duration_s: float = 60.0,
    rate_hz: float = 90.0,
    n_questions: int = 8,
    pattern: SyncPattern = SyncPattern(),
) -> Path:
    """Generate the set under ``out_dir`` and return the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng([seed, 99])
    recordings = []
    truth = {"subjects": {}}
    for i in range(n_subjects):
        sid = f"S{i:03d}"
        sub_seed = seed * 1000 + i
        d = out / sid
        hr0 = float(rng.uniform(60, 90))
        pspec = PulseSynthSpec(
            seed=sub_seed, duration_s=duration_s, rate_hz=rate_hz,
            hr_start_bpm=hr0, hr_end_bpm=hr0 + float(rng.uniform(-6, 6)),
            oximeter_delay_s=float(rng.uniform(0.1, 0.4)),
        )
        trace, _, _ = synth_pulse_trace(pspec)
        io.write_channel_trace(d / "channels.csv", trace)
        io.write_oximeter(d / "oximeter.csv", synth_oximeter(pspec))

        gaze, events = synth_gaze_trace(GazeSynthSpec(
            seed=sub_seed, duration_s=duration_s, rate_hz=rate_hz,
            jitter_sd_deg=jitter_for_velocity_noise(10.0, rate_hz), min_peak_dps=100.0,
        ))
        fau0, _ = synth_fau_trace(FauSynthSpec(seed=sub_seed + 10_000, duration_s=duration_s,
                                               rate_hz=rate_hz, n_events=0))
        amp = 3.0 * dynamic_threshold(fau0)
        fau, me_intervals = synth_fau_trace(FauSynthSpec(seed=sub_seed, duration_s=duration_s,
                                                         rate_hz=rate_hz, amplitude=amp))
        lx, ly = _landmarks(rng, len(gaze), rate_hz)
        io.write_facial_csv(d / "facial.csv", gaze, fau, lx, ly)

        ann = synth_annotations(sid, duration_s, n_questions, seed=sub_seed)
        io.write_annotations(d / "annotations.json", ann)

        sync_files = {}
        offsets = {}
        for k, (sensor, srate) in enumerate(SENSOR_RATES_HZ.items()):
            off = float(np.round(rng.uniform(0.0, 5.0), 4))
            s = synth_sync_trace(pattern, srate, duration_s, off, sensor,
                                 noise_sd=0.01, seed=sub_seed * 10 + k)
            io.write_sync_trace(d / f"sync_{sensor}.csv", s)
            sync_files[sensor] = d / f"sync_{sensor}.csv"
            offsets[sensor] = off
        recordings.append(io.RecordingManifest(
            sid, _split(i), (d / "channels.csv").resolve(), (d / "facial.csv").resolve(),
            (d / "oximeter.csv").resolve(), (d / "annotations.json").resolve(),
            {k: v.resolve() for k, v in sync_files.items()},
        ))
        truth["subjects"][sid] = {
            "hr_start_bpm": pspec.hr_start_bpm,
            "hr_end_bpm": pspec.hr_end_bpm,
            "oximeter_delay_s": pspec.oximeter_delay_s,
            "saccades": [[e.start_frame, e.end_frame] for e in events],
            "microexpressions": [list(iv) for iv in me_intervals],
            "sync_offsets_s": offsets,
        }
    manifest = out / "manifest.json"
    io.write_manifest(manifest, recordings)
    rows = synth_responses(ResponseSynthSpec(
        seed=seed, n_subjects=max(n_subjects, 2) * 5, hr_deceptive_offset=3.0, emr_deceptive_offset=0.05,
    ))
    io.write_responses(out / "responses.csv", rows)
    (out / "truth.json").write_text(json.dumps(truth, indent=1, sort_keys=True) + "\n")
    return manifest
