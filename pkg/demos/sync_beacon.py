"""Recover camera clock offsets from a simulated beacon at 90 Hz and 9 Hz.

    python demos/sync_beacon.py
"""
from physiocue.sync import SyncPattern, binarize_intensity, estimate_offset
from physiocue.synth import synth_sync_trace

if __name__ == "__main__":
    pat = SyncPattern()
    for sensor, rate in (("rgb", 90.0), ("nir", 90.0), ("lwir", 9.0)):
        for true in (0.4, 17.25, 63.9):
            trace = synth_sync_trace(pat, rate, 170.0, true, sensor, noise_sd=0.02, seed=4)
            est = estimate_offset(binarize_intensity(trace), pat, sensor)
            print(f"{sensor:4s} {rate:4.0f} Hz  true {true:7.3f}  est {est.offset_s:8.4f}  "
                  f"rms {est.residual_rms_s:.4f} s  edges {est.n_edges}")
