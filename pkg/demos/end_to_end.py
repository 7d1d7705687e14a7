"""Generate a small synthetic recording set and run every experiment on it.

    python demos/end_to_end.py [out_dir]
"""
import json
import sys
from pathlib import Path

from physiocue.cli import EXPERIMENTS, run_experiment
from physiocue.fixtures import write_synthetic_dataset

if __name__ == "__main__":
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
    manifest = write_synthetic_dataset(out / "data", seed=0, n_subjects=4, duration_s=60.0)
    for exp in EXPERIMENTS:
        path = run_experiment(manifest, exp, out_dir=out / exp, jobs=2)
        doc = json.loads(path.read_text())
        print(f"{exp}: {path}")
        if exp == "pulse-eval":
            for r in doc["reports"]:
                print(f"  {r['method']:6s} MAE {r['mae_bpm']:.3f} bpm over {r['n_windows']} windows")
        elif exp.endswith("ttest"):
            print(f"  t {doc['t_stat']:.3f}  p {doc['p_two_sided']:.4f}  trend {doc['pct_following_trend']:.0f}%")
        elif exp == "fusion":
            print("  " + ", ".join(f"{k} {v:.2f}" for k, v in sorted(doc["accuracy"].items())))
        else:
            for r in doc["offsets"][:3]:
                print(f"  {r['subject_id']} {r['sensor']:4s} offset {r['offset_s']:.4f} s")
