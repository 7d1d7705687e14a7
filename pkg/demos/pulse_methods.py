"""Compare the four pulse estimators on a clean and a drifted synthetic recording.

    python demos/pulse_methods.py
"""
from physiocue.hr import evaluate_method
from physiocue.synth import PulseSynthSpec, synth_oximeter, synth_pulse_trace

SCENARIOS = {
    "clean": PulseSynthSpec(seed=1, duration_s=90.0, hr_start_bpm=65.0, hr_end_bpm=80.0),
    "drifted": PulseSynthSpec(seed=1, duration_s=90.0, hr_start_bpm=65.0, hr_end_bpm=80.0,
                              drift_amp=0.1, motion_sd=2e-3, channel_drift=True),
}

if __name__ == "__main__":
    for name, spec in SCENARIOS.items():
        pair = (synth_pulse_trace(spec)[0], synth_oximeter(spec))
        print(name)
        for m in ("CHROM", "POS", "POH10", "POH11"):
            r = evaluate_method([pair], m)
            print(f"  {m:6s} ME {r.me_bpm:7.3f}  MAE {r.mae_bpm:7.3f}  RMSE {r.rmse_bpm:7.3f}  "
                  f"r {r.pearson_r if r.pearson_r is None else round(r.pearson_r, 4)}")
