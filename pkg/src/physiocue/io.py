"""Readers and writers for the on-disk recording formats.

Every CSV has a header row.  Time columns must increase strictly and be
uniform to within half a sample period; the sample rate is taken from the
first and last timestamp.  Rows are numbered from 0 (first data row) in
error messages.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidInputError, ParseError
from .hr import OximeterRecord
from .microexpression import AU_NAMES, N_AUS, FauTrace, MicroexpressionCandidate
from .oculomotor import GazeTrace, IntervalAnnotation
from .rppg import ChannelTrace, RoiBox
from .series import UniformSeries

CHANNEL_COLUMNS = ("frame_idx", "t_sec", "mean_r", "mean_g", "mean_b")
GAZE_COLUMNS = ("gaze_x_rad_left", "gaze_y_rad_left", "gaze_x_rad_right", "gaze_y_rad_right")
AU_COLUMNS = tuple(f"{a}_r" for a in AU_NAMES)
N_LANDMARKS = 68
LANDMARK_COLUMNS = tuple(f"x_{i}" for i in range(N_LANDMARKS)) + tuple(f"y_{i}" for i in range(N_LANDMARKS))
FACIAL_COLUMNS = ("frame_idx", "t_sec", "confidence") + GAZE_COLUMNS + AU_COLUMNS + LANDMARK_COLUMNS
OXIMETER_COLUMNS = ("t_sec", "spo2_pct", "hr_bpm", "waveform")
SYNC_COLUMNS = ("t_sec", "intensity")
SPLITS = ("train", "val", "test")
RATE_DECIMALS = 6


def _fmt(v) -> str:
    # repr round-trips doubles exactly
    return repr(float(v))


# -- generic table reading -----------------------------------------------------------


def read_table(path, required: Sequence[str], optional: Sequence[str] = ()) -> dict:
    """Read a numeric CSV into ``{column: float array}``.

    Header names are stripped of surrounding blanks.  Missing required
    columns, unparsable or non-finite cells and ragged rows are reported
    with their row index and column name.
    """
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ParseError(f"cannot open file: {exc.strerror}", path) from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("empty file, expected a header row", path) from None
        missing = [c for c in required if c not in header]
        if missing:
            raise ParseError(f"missing columns {missing}", path, column=missing[0])
        wanted = list(required) + [c for c in optional if c in header]
        idx = {c: header.index(c) for c in wanted}
        cols = {c: [] for c in wanted}
        for row_i, row in enumerate(reader):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, found {len(row)}", path, row_i)
            for c in wanted:
                cell = row[idx[c]].strip()
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(f"not a number: {cell!r}", path, row_i, c) from None
                if not math.isfinite(v):
                    raise ParseError(f"non-finite value {cell!r}", path, row_i, c)
                cols[c].append(v)
    return {c: np.asarray(v, dtype=float) for c, v in cols.items()}


def _timebase(t: np.ndarray, path, column="t_sec"):
    """Start time and rate of a strictly increasing, uniform time column."""
    if len(t) < 2:
        raise ParseError("need at least 2 rows to infer a sample rate", path)
    dt = np.diff(t)
    bad = np.flatnonzero(dt <= 0)
    if bad.size:
        raise ParseError("timestamps must increase strictly", path, int(bad[0]) + 1, column)
    rate = round((len(t) - 1) / (t[-1] - t[0]), RATE_DECIMALS)
    dev = np.abs(t - (t[0] + np.arange(len(t)) / rate))
    bad = np.flatnonzero(dev > 0.5 / rate)
    if bad.size:
        raise ParseError(f"timestamp deviates from a uniform {rate} Hz grid", path, int(bad[0]), column)
    return float(t[0]), rate


def _check_frames(frames: np.ndarray, path):
    step = np.diff(frames)
    bad = np.flatnonzero(step != 1)
    if bad.size:
        raise ParseError("frame_idx must increase by exactly 1", path, int(bad[0]) + 1, "frame_idx")
    if frames.size and frames[0] != int(frames[0]):
        raise ParseError("frame_idx must be an integer", path, 0, "frame_idx")


def _wrap(path, fn):
    # type invariants violated by well-formed numbers are still input errors
    try:
        return fn()
    except InvalidInputError as exc:
        raise ParseError(str(exc), path) from None


def _write_rows(path, header, columns):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*columns):
            w.writerow(row)


def _times(s: UniformSeries):
    return [_fmt(t) for t in s.times]


# -- channel traces ----------------------------------------------------------------


def ingest_channel_trace(path) -> ChannelTrace:
    t = read_table(path, CHANNEL_COLUMNS, ("mean_nir",))
    _check_frames(t["frame_idx"], path)
    start, rate = _timebase(t["t_sec"], path)
    rgb = np.column_stack([t["mean_r"], t["mean_g"], t["mean_b"]])
    return _wrap(path, lambda: ChannelTrace.from_array(rgb, rate, start, t.get("mean_nir")))


def write_channel_trace(path, trace: ChannelTrace) -> None:
    header = list(CHANNEL_COLUMNS)
    cols = [range(trace.frame_count), _times(trace.rgb[0])]
    cols += [[_fmt(v) for v in c.samples] for c in trace.rgb]
    if trace.nir is not None:
        header.append("mean_nir")
        cols.append([_fmt(v) for v in trace.nir.samples])
    _write_rows(path, header, cols)


# -- facial analysis -----------------------------------------------------------------


@dataclass(frozen=True)
class FacialRecord:
    gaze: GazeTrace
    fau: FauTrace
    boxes: tuple
    confidence: UniformSeries

    def __iter__(self):
        # unpacks as (gaze, fau, boxes)
        return iter((self.gaze, self.fau, self.boxes))


def ingest_facial_csv(path) -> FacialRecord:
    """Gaze angles, AU intensities and a landmark bounding box per frame."""
    t = read_table(path, FACIAL_COLUMNS)
    _check_frames(t["frame_idx"], path)
    start, rate = _timebase(t["t_sec"], path)
    conf = t["confidence"]
    bad = np.flatnonzero((conf < 0) | (conf > 1))
    if bad.size:
        raise ParseError("confidence must lie in [0, 1]", path, int(bad[0]), "confidence")
    xs = np.column_stack([t[f"x_{i}"] for i in range(N_LANDMARKS)])
    ys = np.column_stack([t[f"y_{i}"] for i in range(N_LANDMARKS)])
    for name in GAZE_COLUMNS:
        bad = np.flatnonzero(np.abs(t[name]) > np.pi / 2)
        if bad.size:
            raise ParseError("gaze angle outside [-pi/2, pi/2]", path, int(bad[0]), name)
    for name in AU_COLUMNS:
        bad = np.flatnonzero(t[name] < 0)
        if bad.size:
            raise ParseError("AU intensity must be >= 0", path, int(bad[0]), name)

    def build():
        gaze = GazeTrace.from_arrays(
            t["gaze_x_rad_left"], t["gaze_y_rad_left"], rate, start,
            t["gaze_x_rad_right"], t["gaze_y_rad_right"],
        )
        fau = FauTrace.from_array(np.column_stack([t[c] for c in AU_COLUMNS]), rate, start)
        boxes = tuple(RoiBox.from_landmarks(xs[i], ys[i]) for i in range(len(xs)))
        return FacialRecord(gaze, fau, boxes, UniformSeries(conf, rate, start))

    return _wrap(path, build)


def write_facial_csv(path, gaze: GazeTrace, fau: FauTrace, landmarks_x, landmarks_y, confidence=None) -> None:
    """Write a facial-analysis file; landmarks are ``(n_frames, 68)`` arrays."""
    n = len(gaze)
    lx, ly = np.asarray(landmarks_x, float), np.asarray(landmarks_y, float)
    if len(fau) != n or lx.shape != (n, N_LANDMARKS) or ly.shape != (n, N_LANDMARKS):
        raise InvalidInputError("gaze, AU and landmark arrays must cover the same frames")
    if not gaze.binocular:
        raise InvalidInputError("facial files store both eyes")
    conf = np.ones(n) if confidence is None else np.asarray(confidence, float)
    cols = [range(n), _times(gaze.gaze_x_rad), [_fmt(v) for v in conf]]
    for s in (gaze.gaze_x_rad, gaze.gaze_y_rad, gaze.gaze_x_right_rad, gaze.gaze_y_right_rad):
        cols.append([_fmt(v) for v in s.samples])
    for c in fau.au_intensities:
        cols.append([_fmt(v) for v in c.samples])
    for arr in (lx, ly):
        for i in range(N_LANDMARKS):
            cols.append([_fmt(v) for v in arr[:, i]])
    _write_rows(path, FACIAL_COLUMNS, cols)


# -- oximeter -------------------------------------------------------------------------


def ingest_oximeter(path) -> OximeterRecord:
    t = read_table(path, OXIMETER_COLUMNS)
    start, rate = _timebase(t["t_sec"], path)
    bad = np.flatnonzero((t["spo2_pct"] < 0) | (t["spo2_pct"] > 100))
    if bad.size:
        raise ParseError("SpO2 must lie in [0, 100]", path, int(bad[0]), "spo2_pct")
    mk = lambda c: UniformSeries(t[c], rate, start)
    return _wrap(path, lambda: OximeterRecord(mk("spo2_pct"), mk("hr_bpm"), mk("waveform")))


def write_oximeter(path, ox: OximeterRecord) -> None:
    cols = [_times(ox.waveform)] + [
        [_fmt(v) for v in s.samples] for s in (ox.spo2_pct, ox.hr_bpm, ox.waveform)
    ]
    _write_rows(path, OXIMETER_COLUMNS, cols)


# -- sync intensity traces ------------------------------------------------------------


def ingest_sync_trace(path) -> UniformSeries:
    t = read_table(path, SYNC_COLUMNS)
    start, rate = _timebase(t["t_sec"], path)
    return UniformSeries(t["intensity"], rate, start)


def write_sync_trace(path, trace: UniformSeries) -> None:
    _write_rows(path, SYNC_COLUMNS, [_times(trace), [_fmt(v) for v in trace.samples]])


# -- annotations -----------------------------------------------------------------------


_ANNOTATION_KEYS = ("subject_id", "question_id", "phase", "start_s", "end_s", "label")


def ingest_annotations(path) -> list:
    """A JSON array of interval objects, returned sorted by start time."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ParseError(f"cannot open file: {exc.strerror}", path) from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg} (line {exc.lineno})", path) from None
    if not isinstance(doc, list):
        raise ParseError("expected a JSON array of intervals", path)
    out = []
    for i, item in enumerate(doc):
        if not isinstance(item, dict):
            raise ParseError("interval must be an object", path, i)
        for k in _ANNOTATION_KEYS:
            if k not in item:
                raise ParseError("missing key", path, i, k)
        for k in ("start_s", "end_s"):
            v = item[k]
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ParseError("expected a finite number", path, i, k)
        if isinstance(item["question_id"], bool) or not isinstance(item["question_id"], int):
            raise ParseError("expected an integer", path, i, "question_id")
        try:
            out.append(IntervalAnnotation(
                item["question_id"], item["phase"], float(item["start_s"]), float(item["end_s"]),
                item["label"], str(item["subject_id"]),
            ))
        except InvalidInputError as exc:
            raise ParseError(str(exc), path, i) from None
    out.sort(key=lambda a: (a.start_s, a.question_id, a.phase))
    return out


def write_annotations(path, annotations: Sequence[IntervalAnnotation]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps([a.to_dict() for a in annotations], indent=1, sort_keys=True) + "\n")


# -- report tables ---------------------------------------------------------------------


def write_csv(path, header: Sequence[str], rows) -> None:
    """Write report rows; floats are written with full precision."""
    conv = lambda v: _fmt(v) if isinstance(v, (float, np.floating)) else ("" if v is None else v)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([conv(v) for v in r])


def write_candidates(path, subject_id: str, candidates: Sequence[MicroexpressionCandidate]) -> None:
    rows = [(subject_id, c.onset_frame, c.apex_frame, c.offset_frame, c.likelihood, c.window_len)
            for c in candidates]
    write_csv(path, ("subject_id", "onset_frame", "apex_frame", "offset_frame", "likelihood", "window_len"), rows)


# -- manifests ----------------------------------------------------------------------------


@dataclass(frozen=True)
class RecordingManifest:
    """Files belonging to one subject recording; paths are absolute."""

    subject_id: str
    split: str = "test"
    channel_trace: Optional[Path] = None
    facial: Optional[Path] = None
    oximeter: Optional[Path] = None
    annotations: Optional[Path] = None
    sync: dict = field(default_factory=dict)

    def to_dict(self, base: Optional[Path] = None):
        rel = lambda p: None if p is None else (str(p.relative_to(base)) if base else str(p))
        return {
            "subject_id": self.subject_id,
            "split": self.split,
            "channel_trace": rel(self.channel_trace),
            "facial": rel(self.facial),
            "oximeter": rel(self.oximeter),
            "annotations": rel(self.annotations),
            "sync": {k: rel(v) for k, v in sorted(self.sync.items())},
        }


_FILE_KEYS = ("channel_trace", "facial", "oximeter", "annotations")


def load_manifest(path) -> list:
    """Read a manifest set: ``{"recordings": [...]}`` or a bare array.

    Relative file paths are resolved against the manifest's directory and
    must exist.  Subject ids must be unique.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ParseError(f"cannot open manifest: {exc.strerror}", path) from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg} (line {exc.lineno})", path) from None
    items = doc.get("recordings") if isinstance(doc, dict) else doc
    if not isinstance(items, list) or not items:
        raise ParseError("manifest must list at least one recording", path)
    base = path.parent.resolve()
    seen = set()
    out = []
    for i, item in enumerate(items):
        if not isinstance(item, dict) or "subject_id" not in item:
            raise ParseError("recording entry needs a subject_id", path, i, "subject_id")
        sid = str(item["subject_id"])
        if sid in seen:
            raise ParseError(f"duplicate subject_id {sid!r}", path, i, "subject_id")
        seen.add(sid)
        split = item.get("split", "test")
        if split not in SPLITS:
            raise ParseError(f"split must be one of {SPLITS}", path, i, "split")

        def resolve(rel, key):
            if rel is None:
                return None
            p = (base / rel).resolve()
            if not p.is_file():
                raise ParseError(f"referenced file not found: {rel}", path, i, key)
            return p

        files = {k: resolve(item.get(k), k) for k in _FILE_KEYS}
        sync = item.get("sync") or {}
        if not isinstance(sync, dict) or any(k not in ("rgb", "nir", "lwir") for k in sync):
            raise ParseError("sync must map rgb/nir/lwir to files", path, i, "sync")
        sync = {k: resolve(v, "sync") for k, v in sync.items()}
        out.append(RecordingManifest(sid, split, sync=sync, **files))
    return out


def write_manifest(path, recordings: Sequence[RecordingManifest]) -> None:
    path = Path(path)
    base = path.parent.resolve()
    doc = {"recordings": [r.to_dict(base) for r in recordings]}
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def read_responses(path) -> list:
    """Rows ``(subject_id, question_id, label, hr_bpm, emr)`` from a responses CSV."""
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ParseError(f"cannot open file: {exc.strerror}", path) from None
    need = ("subject_id", "question_id", "label", "hr_bpm", "emr")
    out = []
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or any(c not in reader.fieldnames for c in need):
            raise ParseError(f"header must contain {need}", path)
        for i, row in enumerate(reader):
            if row["label"] not in ("truthful", "deceptive"):
                raise ParseError(f"unknown label {row['label']!r}", path, i, "label")
            try:
                q = int(row["question_id"])
            except ValueError:
                raise ParseError("not an integer", path, i, "question_id") from None
            vals = []
            for c in ("hr_bpm", "emr"):
                try:
                    v = float(row[c])
                except (TypeError, ValueError):
                    raise ParseError("not a number", path, i, c) from None
                if not math.isfinite(v):
                    raise ParseError("non-finite value", path, i, c)
                vals.append(v)
            out.append((row["subject_id"], q, row["label"], vals[0], vals[1]))
    return out


def write_responses(path, rows) -> None:
    write_csv(path, ("subject_id", "question_id", "label", "hr_bpm", "emr"), rows)
