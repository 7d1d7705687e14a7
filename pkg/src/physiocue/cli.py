"""Batch command line: one subcommand per analysis, reports written to ``--out``.

Exit codes: 0 success, 2 unreadable or malformed input, 3 analysis failure,
4 bad configuration.  Reports are JSON (sorted keys) plus CSV tables and
depend only on inputs, configuration and seed, never on ``--jobs``.
"""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .config import Config, format_defaults, load_config
from .errors import ConfigError, ParseError, PhysiocueError
from .fusion import (
    accuracy,
    classify,
    features_from_values,
    fuse_boolean,
    response_hr,
    threshold_predict,
    train_margin_classifier,
)
from .hr import evaluate_method, windowed_hr
from .microexpression import (
    default_window_lens,
    dynamic_threshold,
    me_rate_over_interval,
    scan_window_likelihood,
    select_candidates,
)
from .oculomotor import angular_velocity, detect_saccades, emr_over_interval, median_threshold_classify, preprocess_gaze
from .rppg import estimate_pulse
from .stats import paired_samples_from_records, paired_t_test
from .sync import SENSORS, SyncPattern, binarize_intensity, estimate_offset

EXIT_OK, EXIT_PARSE, EXIT_ANALYSIS, EXIT_CONFIG = 0, 2, 3, 4
EXPERIMENTS = ("pulse-eval", "saccade-ttest", "microexp-ttest", "fusion", "sync-offsets")


def write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _pmap(fn, items, jobs: int):
    # ordered results, so reports never depend on scheduling
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def _need(rec, key):
    p = getattr(rec, key)
    if p is None:
        raise ParseError(f"recording {rec.subject_id!r} has no {key} file")
    return p


def _annotations(rec):
    ann = io.ingest_annotations(_need(rec, "annotations"))
    for a in ann:
        if a.subject_id != rec.subject_id:
            raise ParseError(f"annotation for subject {a.subject_id!r} in recording {rec.subject_id!r}",
                             rec.annotations)
    return ann


def _estimator_kwargs(cfg: Config, method: str) -> dict:
    if method == "CHROM":
        return {"window_s": cfg.rppg_window_s, "band_hz": cfg.bandpass_hz, "order": cfg.bandpass_order}
    if method == "POS":
        return {"window_s": cfg.rppg_window_s}
    return {"detrend_lambda": cfg.detrend_lambda, "band_hz": cfg.bandpass_hz,
            "smooth_points": cfg.ica_smooth_points}


def _hr_kwargs(cfg: Config) -> dict:
    return {"band_hz": cfg.hr_band_hz, "max_bin_hz": cfg.hr_bin_hz}


def _pulse(cfg, trace, method, seed):
    return estimate_pulse(trace, method, seed=seed, **_estimator_kwargs(cfg, method))


def _hr_series(cfg, pulse):
    return windowed_hr(pulse, cfg.hr_window_s, cfg.hr_stride_frames, cfg.hr_smooth_s,
                       cfg.hr_band_hz, max_bin_hz=cfg.hr_bin_hz)


# -- per-recording analyses ------------------------------------------------------------


def _saccades(cfg, rec):
    facial = io.ingest_facial_csv(_need(rec, "facial"))
    v = angular_velocity(preprocess_gaze(facial.gaze, cfg.gaze_block_frames))
    events = detect_saccades(v, cfg.saccade_threshold_dps, cfg.saccade_max_frames)
    return events, v


def _emr_rows(cfg, rec):
    events, v = _saccades(cfg, rec)
    ann = _annotations(rec)
    rows = [(a.subject_id, a.question_id, a.phase, a.label,
             emr_over_interval(events, a, v.rate_hz, v.start_time_s)) for a in ann]
    return rows, len(events)


def _microexp(cfg, rec):
    facial = io.ingest_facial_csv(_need(rec, "facial"))
    fau = facial.fau
    lens = default_window_lens(fau.rate_hz, cfg.me_window_frames_90hz)
    lmap = scan_window_likelihood(fau, lens)
    thr = dynamic_threshold(fau, cfg.me_k, lens, cfg.me_baseline_min_s)
    cands = select_candidates(lmap, thr, cfg.me_scale_tol)
    ann = _annotations(rec)
    rates = [(a.subject_id, a.question_id, a.phase, a.label,
              me_rate_over_interval(cands, a, fau.rate_hz, fau.start_time_s)) for a in ann]
    return cands, rates, thr


def _response_values(cfg, rec, seed):
    """``(subject_id, question_id, label, hr_bpm, emr)`` for every response interval."""
    trace = io.ingest_channel_trace(_need(rec, "channel_trace"))
    hr = _hr_series(cfg, _pulse(cfg, trace, cfg.feature_pulse_method, seed))
    events, v = _saccades(cfg, rec)
    out = []
    for a in _annotations(rec):
        if a.phase != "response":
            continue
        out.append((a.subject_id, a.question_id, a.label, response_hr(hr, a.start_s, a.end_s),
                    emr_over_interval(events, a, v.rate_hz, v.start_time_s)))
    return out


# -- commands ----------------------------------------------------------------------------


def cmd_pulse(recs, cfg, out: Path, seed: int, jobs: int):
    def one(rec):
        trace = io.ingest_channel_trace(_need(rec, "channel_trace"))
        res = {}
        for m in cfg.methods:
            p = _pulse(cfg, trace, m, seed)
            hr = _hr_series(cfg, p).hr_bpm
            io.write_csv(out / "pulse" / f"{rec.subject_id}_{m}_pulse.csv", ("t_sec", "pulse"),
                         zip(p.waveform.times.tolist(), p.waveform.samples.tolist()))
            io.write_csv(out / "pulse" / f"{rec.subject_id}_{m}_hr.csv", ("t_sec", "hr_bpm"),
                         zip(hr.times.tolist(), hr.samples.tolist()))
            res[m] = {"median_hr_bpm": float(np.median(hr.samples)), "n_hr_samples": len(hr)}
        return rec.subject_id, res

    summary = dict(_pmap(one, recs, jobs))
    write_json(out / "pulse.json", {"seed": seed, "subjects": summary})
    return out / "pulse.json"


def cmd_hr_eval(recs, cfg, out: Path, seed: int, jobs: int):
    def load(rec):
        return (io.ingest_channel_trace(_need(rec, "channel_trace")),
                io.ingest_oximeter(_need(rec, "oximeter")))

    pairs = _pmap(load, recs, jobs)

    def run(method):
        return evaluate_method(pairs, method, seed, cfg.hr_window_s, cfg.hr_smooth_s, cfg.gt_max_lag_s,
                               _estimator_kwargs(cfg, method), _hr_kwargs(cfg))

    reports = _pmap(run, cfg.methods, jobs)
    docs = [r.to_dict() for r in reports]
    write_json(out / "hr_eval.json", {"seed": seed, "n_recordings": len(pairs), "reports": docs})
    cols = ("method", "me_bpm", "mae_bpm", "rmse_bpm", "pearson_r", "n_windows")
    io.write_csv(out / "hr_eval.csv", cols, [[d[c] for c in cols] for d in docs])
    return out / "hr_eval.json"


def cmd_saccade(recs, cfg, out: Path, seed: int, jobs: int):
    results = _pmap(lambda r: _emr_rows(cfg, r), recs, jobs)
    rows = [row for rs, _ in results for row in rs]
    io.write_csv(out / "emr.csv", ("subject_id", "question_id", "phase", "label", "emr"), rows)
    resp = [(sid, label, emr) for sid, _, phase, label, emr in rows if phase == "response"]
    doc = {"n_saccades": {r.subject_id: n for r, (_, n) in zip(recs, results)}}
    try:
        th = median_threshold_classify(resp)
        doc["median_threshold_accuracy"] = th.accuracy
    except PhysiocueError as exc:
        doc["median_threshold_accuracy"] = None
        doc["note"] = str(exc)
    write_json(out / "saccade.json", doc)
    return out / "saccade.json"


def cmd_microexp(recs, cfg, out: Path, seed: int, jobs: int):
    results = _pmap(lambda r: _microexp(cfg, r), recs, jobs)
    cand_rows, rate_rows, summary = [], [], {}
    for rec, (cands, rates, thr) in zip(recs, results):
        cand_rows += [(rec.subject_id, c.onset_frame, c.apex_frame, c.offset_frame, c.likelihood, c.window_len)
                      for c in cands]
        rate_rows += rates
        summary[rec.subject_id] = {"threshold": thr, "n_candidates": len(cands)}
    io.write_csv(out / "candidates.csv",
                 ("subject_id", "onset_frame", "apex_frame", "offset_frame", "likelihood", "window_len"),
                 cand_rows)
    io.write_csv(out / "me_rates.csv", ("subject_id", "question_id", "phase", "label", "me_rate"), rate_rows)
    write_json(out / "microexp.json", {"subjects": summary})
    return out / "microexp.json"


def _ttest_doc(records, feature):
    samples = paired_samples_from_records(records)
    res = paired_t_test(samples)
    doc = res.to_dict()
    doc["feature"] = feature
    doc["subjects"] = [s.subject_id for s in samples]
    return doc


def cmd_ttest(recs, cfg, out: Path, seed: int, jobs: int, feature="emr", responses=None):
    if responses is not None:
        col = {"emr": 4, "hr": 3}.get(feature)
        if col is None:
            raise ParseError(f"feature {feature!r} is not available in a responses table")
        records = [(r[0], r[2], r[col]) for r in io.read_responses(responses)]
    elif feature == "me_rate":
        results = _pmap(lambda r: _microexp(cfg, r), recs, jobs)
        records = [(sid, label, v) for _, rates, _ in results for sid, _, ph, label, v in rates if ph == "response"]
    elif feature == "emr":
        results = _pmap(lambda r: _emr_rows(cfg, r), recs, jobs)
        records = [(sid, label, v) for rows, _ in results for sid, _, ph, label, v in rows if ph == "response"]
    else:
        vals = [row for rows in _pmap(lambda r: _response_values(cfg, r, seed), recs, jobs) for row in rows]
        records = [(sid, label, hr) for sid, _, label, hr, _ in vals]
    doc = _ttest_doc(records, feature)
    write_json(out / f"ttest_{feature}.json", doc)
    return out / f"ttest_{feature}.json"


def cmd_fuse(recs, cfg, out: Path, seed: int, jobs: int, responses=None):
    if responses is not None:
        rows = io.read_responses(responses)
        split_of = {}
    else:
        rows = [row for rs in _pmap(lambda r: _response_values(cfg, r, seed), recs, jobs) for row in rs]
        split_of = {r.subject_id: r.split for r in recs}
    feats = features_from_values(rows)
    labels = [f.label for f in feats]
    pulse = threshold_predict([f.pulse_feat for f in feats])
    sacc = threshold_predict([f.saccade_feat for f in feats])
    acc = {
        "pulse": accuracy(pulse, labels),
        "saccades": accuracy(sacc, labels),
        "pulse_and_saccades": accuracy(fuse_boolean(pulse, sacc, "AND"), labels),
        "pulse_or_saccades": accuracy(fuse_boolean(pulse, sacc, "OR"), labels),
    }
    train = [f for f in feats if split_of.get(f.subject_id) == "train"]
    test = [f for f in feats if split_of.get(f.subject_id) == "test"]
    protocol = "train/test split"
    if not train or not test or len({f.label for f in train}) < 2:
        train, test, protocol = feats, feats, "train = test (no usable split)"
    gamma = cfg.svm_rbf_gamma or None
    for kind in ("linear", "rbf"):
        model = train_margin_classifier(train, kind, seed, lam=cfg.svm_lambda, epochs=cfg.svm_epochs, gamma=gamma)
        acc[f"svm_{kind}"] = classify(model, test)[1]
        (out / f"model_{kind}.json").parent.mkdir(parents=True, exist_ok=True)
        (out / f"model_{kind}.json").write_text(model.to_json() + "\n")
    io.write_csv(out / "features.csv", ("subject_id", "question_id", "label", "pulse_feat", "saccade_feat"),
                 [(f.subject_id, f.question_id, f.label, f.pulse_feat, f.saccade_feat) for f in feats])
    write_json(out / "fusion.json", {"accuracy": acc, "svm_protocol": protocol, "n_responses": len(feats),
                                     "n_train": len(train), "n_test": len(test), "seed": seed})
    return out / "fusion.json"


def cmd_sync(recs, cfg, out: Path, seed: int, jobs: int):
    pattern = SyncPattern(cfg.sync_periods_s, cfg.sync_duty, cfg.sync_lwir_delay_s, cfg.sync_rising_first)

    def one(rec):
        if not rec.sync:
            raise ParseError(f"recording {rec.subject_id!r} lists no sync traces")
        res = []
        for sensor in SENSORS:
            if sensor not in rec.sync:
                continue
            edges = binarize_intensity(io.ingest_sync_trace(rec.sync[sensor]), cfg.sync_hysteresis)
            est = estimate_offset(edges, pattern, sensor, cfg.sync_grid_s)
            res.append(dict(est.to_dict(), subject_id=rec.subject_id))
        return res

    rows = [r for rs in _pmap(one, recs, jobs) for r in rs]
    write_json(out / "sync.json", {"offsets": rows})
    cols = ("subject_id", "sensor", "offset_s", "residual_rms_s", "n_edges")
    io.write_csv(out / "sync.csv", cols, [[r[c] for c in cols] for r in rows])
    return out / "sync.json"


COMMANDS = {
    "pulse": cmd_pulse,
    "hr-eval": cmd_hr_eval,
    "saccade": cmd_saccade,
    "microexp": cmd_microexp,
    "ttest": cmd_ttest,
    "fuse": cmd_fuse,
    "sync": cmd_sync,
}


def run_experiment(manifest, experiment: str, config: Config = Config(), out_dir=".", seed: int = 0,
                   jobs: int = 1) -> Path:
    """Run one named experiment over a manifest set and return the main report path.

    ``experiment`` is one of ``pulse-eval``, ``saccade-ttest``,
    ``microexp-ttest``, ``fusion`` or ``sync-offsets``.
    """
    recs = io.load_manifest(manifest) if not isinstance(manifest, list) else manifest
    out = Path(out_dir)
    if experiment == "pulse-eval":
        return cmd_hr_eval(recs, config, out, seed, jobs)
    if experiment == "saccade-ttest":
        return cmd_ttest(recs, config, out, seed, jobs, feature="emr")
    if experiment == "microexp-ttest":
        return cmd_ttest(recs, config, out, seed, jobs, feature="me_rate")
    if experiment == "fusion":
        return cmd_fuse(recs, config, out, seed, jobs)
    if experiment == "sync-offsets":
        return cmd_sync(recs, config, out, seed, jobs)
    raise ConfigError(f"unknown experiment {experiment!r}; choose from {EXPERIMENTS}")


# -- argument handling ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--manifest", type=Path, help="manifest JSON listing the recordings")
    common.add_argument("--out", type=Path, default=Path("."), help="report directory")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int, default=1, help="recordings processed concurrently")
    common.add_argument("--config", type=Path, help="flat key = value configuration file")

    p = argparse.ArgumentParser(prog="physiocue", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("pulse", parents=[common], help="pulse waveforms and tracked HR per recording")
    sub.add_parser("hr-eval", parents=[common], help="HR error metrics against the oximeter")
    sub.add_parser("saccade", parents=[common], help="saccades and eye-movement rate per interval")
    sub.add_parser("microexp", parents=[common], help="microexpression candidates and rates")
    t = sub.add_parser("ttest", parents=[common], help="paired deceptive-vs-truthful t-test")
    t.add_argument("--feature", choices=("emr", "me_rate", "hr"), default="emr")
    t.add_argument("--responses", type=Path, help="responses CSV instead of a manifest")
    f = sub.add_parser("fuse", parents=[common], help="threshold, fused and margin classifiers")
    f.add_argument("--responses", type=Path, help="responses CSV instead of a manifest")
    sub.add_parser("sync", parents=[common], help="per-sensor clock offsets from the beacon")
    s = sub.add_parser("synth", parents=[common], help="write a synthetic recording set")
    s.add_argument("--subjects", type=int, default=4)
    s.add_argument("--duration", type=float, default=60.0, help="seconds per recording")
    c = sub.add_parser("config", parents=[common], help="print or check configuration")
    c.add_argument("--print-defaults", action="store_true")
    return p


def _run(args) -> int:
    cfg = load_config(args.config) if args.config else Config()
    if args.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    if args.command == "config":
        if args.print_defaults or not args.config:
            sys.stdout.write(format_defaults())
        else:
            sys.stdout.write(f"{args.config}: ok\n")
        return EXIT_OK
    if args.command == "synth":
        from .fixtures import write_synthetic_dataset

        if args.subjects < 1 or args.duration < 40:
            raise ConfigError("synth needs --subjects >= 1 and --duration >= 40")
        path = write_synthetic_dataset(args.out, args.seed, args.subjects, args.duration)
        print(path)
        return EXIT_OK
    extra = {}
    if args.command in ("ttest", "fuse") and args.responses is not None:
        extra["responses"] = args.responses
        recs = []
    else:
        if args.manifest is None:
            raise ParseError("--manifest is required")
        recs = io.load_manifest(args.manifest)
    if args.command == "ttest":
        extra["feature"] = args.feature
    report = COMMANDS[args.command](recs, cfg, args.out, args.seed, args.jobs, **extra)
    print(report)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PhysiocueError, ValueError, ArithmeticError) as exc:
        print(f"analysis error: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS


if __name__ == "__main__":
    sys.exit(main())
