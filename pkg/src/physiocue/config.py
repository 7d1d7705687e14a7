"""Flat ``key = value`` configuration covering every tunable analysis choice.

Lines starting with ``#`` are comments.  Lists are comma separated.  Unknown
keys and unparsable values raise :class:`~physiocue.errors.ConfigError`.
"""
from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

from . import signal as sig
from .errors import ConfigError
from .microexpression import DEFAULT_K, DEFAULT_SCALE_TOL, DEFAULT_WINDOW_FRAMES_90HZ


@dataclass(frozen=True)
class Config:
    # signal-core
    detrend_lambda: float = sig.DEFAULT_DETREND_LAMBDA
    bandpass_low_hz: float = sig.DEFAULT_BAND_HZ[0]
    bandpass_high_hz: float = sig.DEFAULT_BAND_HZ[1]
    bandpass_order: int = 2
    hr_min_hz: float = sig.HR_BAND_HZ[0]
    hr_max_hz: float = sig.HR_BAND_HZ[1]
    hr_bin_hz: float = sig.MAX_BIN_SPACING_HZ
    # rppg
    rppg_window_s: float = 1.6
    ica_smooth_points: int = 5
    clip_len: int = 135
    roi_expand_side: float = 0.05
    roi_expand_top: float = 0.30
    roi_expand_bottom: float = 0.05
    # heart-rate tracking
    hr_window_s: float = 30.0
    hr_stride_frames: int = 1
    hr_smooth_s: float = 5.0
    gt_max_lag_s: float = 2.0
    methods: tuple = ("CHROM", "POS", "POH10", "POH11")
    feature_pulse_method: str = "CHROM"
    # oculomotor
    gaze_block_frames: int = 3
    saccade_threshold_dps: float = 50.0
    saccade_max_frames: int = 10
    # microexpression
    me_window_frames_90hz: tuple = DEFAULT_WINDOW_FRAMES_90HZ
    me_k: float = DEFAULT_K
    me_scale_tol: float = DEFAULT_SCALE_TOL
    me_baseline_min_s: float = 10.0
    me_iou_min: float = 0.5
    # classifiers
    svm_lambda: float = 1e-3
    svm_epochs: int = 200
    svm_rbf_gamma: float = 0.0
    # sync
    sync_periods_s: tuple = (5, 6, 7, 8, 9, 10, 11, 12, 13)
    sync_duty: float = 0.5
    sync_rising_first: bool = True
    sync_lwir_delay_s: float = 0.05
    sync_hysteresis: float = 0.1
    sync_grid_s: float = 0.001

    @property
    def bandpass_hz(self):
        return (self.bandpass_low_hz, self.bandpass_high_hz)

    @property
    def hr_band_hz(self):
        return (self.hr_min_hz, self.hr_max_hz)


HELP = {
    "detrend_lambda": "smoothness-priors detrend weight; 2000 removes a 0.05 Hz drift by > 60 dB at 90 Hz",
    "bandpass_low_hz": "band-pass lower edge (Hz)",
    "bandpass_high_hz": "band-pass upper edge (Hz)",
    "bandpass_order": "Butterworth order, applied forward and backward",
    "hr_min_hz": "lowest heart-rate frequency searched (Hz)",
    "hr_max_hz": "highest heart-rate frequency searched (Hz)",
    "hr_bin_hz": "maximum spectral bin spacing after zero padding (Hz); 1/240 Hz = 0.25 bpm",
    "rppg_window_s": "CHROM / POS internal window (s)",
    "ica_smooth_points": "POH11 moving-average length (frames)",
    "clip_len": "clip length (frames) for stitching per-clip waveform predictions",
    "roi_expand_side": "face box expansion on each side, fraction of width",
    "roi_expand_top": "face box expansion above, fraction of height",
    "roi_expand_bottom": "face box expansion below, fraction of height",
    "hr_window_s": "heart-rate tracking window (s)",
    "hr_stride_frames": "heart-rate window stride (frames)",
    "hr_smooth_s": "centred moving-average width applied to tracked HR (s); 0 disables",
    "gt_max_lag_s": "largest oximeter-to-face shift searched during alignment (s)",
    "methods": "pulse estimators evaluated by hr-eval",
    "feature_pulse_method": "estimator whose tracked HR feeds per-response pulse features",
    "gaze_block_frames": "non-overlapping gaze averaging block (frames)",
    "saccade_threshold_dps": "angular-velocity threshold (deg/s)",
    "saccade_max_frames": "longer supra-threshold runs are discarded as tracking noise",
    "me_window_frames_90hz": "microexpression window lengths in frames at 90 Hz; rescaled for other rates",
    "me_k": "dynamic threshold = median + k * MAD of baseline likelihoods",
    "me_scale_tol": "a kept candidate shrinks to the shortest window reaching this fraction of its likelihood",
    "me_baseline_min_s": "minimum AU recording length for the baseline statistic (s)",
    "me_iou_min": "IoU needed for a spotted interval to match ground truth",
    "svm_lambda": "L2 weight of the margin classifiers",
    "svm_epochs": "passes over the training set",
    "svm_rbf_gamma": "RBF kernel gamma on standardized features; 0 selects the median heuristic",
    "sync_periods_s": "beacon periods in order (s)",
    "sync_duty": "beacon duty cycle",
    "sync_rising_first": "whether each period begins with the on segment",
    "sync_lwir_delay_s": "extra LWIR shutter delay subtracted from its offset (s)",
    "sync_hysteresis": "half-width of the binarisation hysteresis band (normalised intensity)",
    "sync_grid_s": "offset search grid step (s)",
}


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


def _parse_scalar(kind, text):
    if kind is bool:
        t = text.lower()
        if t in ("true", "yes", "1"):
            return True
        if t in ("false", "no", "0"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    return kind(text)


def _parse(key: str, text: str, default):
    text = text.strip()
    if isinstance(default, tuple):
        kind = type(default[0])
        items = [t.strip() for t in text.split(",") if t.strip()]
        if not items:
            raise ValueError("empty list")
        return tuple(_parse_scalar(kind, t) for t in items)
    return _parse_scalar(type(default), text)


def format_defaults() -> str:
    """The default configuration as a commented document."""
    lines = ["# physiocue configuration: one 'key = value' per line, lists comma separated", ""]
    for f in fields(Config):
        lines.append(f"# {HELP[f.name]}")
        lines.append(f"{f.name} = {_fmt(f.default)}")
    return "\n".join(lines) + "\n"


def parse_config(text: str, source: str = "<config>") -> Config:
    defaults = Config()
    known = {f.name for f in fields(Config)}
    updates = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}, line {lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"{source}, line {lineno}: unknown key {key!r}")
        try:
            updates[key] = _parse(key, value, getattr(defaults, key))
        except ValueError as exc:
            raise ConfigError(f"{source}, line {lineno}: bad value for {key}: {exc}") from None
    cfg = replace(defaults, **updates)
    validate(cfg)
    return cfg


def load_config(path) -> Config:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path))


def validate(cfg: Config) -> None:
    """Range checks that do not need any data."""
    checks = [
        (cfg.detrend_lambda > 0, "detrend_lambda must be > 0"),
        (0 < cfg.bandpass_low_hz < cfg.bandpass_high_hz, "need 0 < bandpass_low_hz < bandpass_high_hz"),
        (cfg.bandpass_order >= 1, "bandpass_order must be >= 1"),
        (0 <= cfg.hr_min_hz < cfg.hr_max_hz, "need 0 <= hr_min_hz < hr_max_hz"),
        (cfg.hr_bin_hz > 0, "hr_bin_hz must be > 0"),
        (cfg.rppg_window_s > 0, "rppg_window_s must be > 0"),
        (cfg.ica_smooth_points >= 1, "ica_smooth_points must be >= 1"),
        (cfg.clip_len >= 2, "clip_len must be >= 2"),
        (cfg.hr_window_s > 0 and cfg.hr_stride_frames >= 1, "bad heart-rate window"),
        (cfg.hr_smooth_s >= 0 and cfg.gt_max_lag_s >= 0, "smoothing and lag must be >= 0"),
        (all(m in ("CHROM", "POS", "POH10", "POH11") for m in cfg.methods), "unknown method in methods"),
        (cfg.feature_pulse_method in ("CHROM", "POS", "POH10", "POH11"), "unknown feature_pulse_method"),
        (cfg.gaze_block_frames >= 1, "gaze_block_frames must be >= 1"),
        (cfg.saccade_threshold_dps > 0 and cfg.saccade_max_frames >= 1, "bad saccade settings"),
        (cfg.me_k >= 0 and 0 < cfg.me_scale_tol <= 1, "bad microexpression threshold settings"),
        (0 < cfg.me_iou_min <= 1, "me_iou_min must be in (0, 1]"),
        (cfg.svm_lambda > 0 and cfg.svm_epochs >= 1 and cfg.svm_rbf_gamma >= 0, "bad classifier settings"),
        (all(p > 0 for p in cfg.sync_periods_s) and 0 < cfg.sync_duty < 1, "bad beacon pattern"),
        (0 <= cfg.sync_hysteresis < 0.5 and cfg.sync_grid_s > 0, "bad sync settings"),
    ]
    for ok, msg in checks:
        if not ok:
            raise ConfigError(msg)
