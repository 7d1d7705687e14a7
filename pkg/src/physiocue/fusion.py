"""Per-response pulse and saccade features, and classifiers that fuse them."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidInputError
from .hr import HeartRateSeries
from .oculomotor import emr_over_interval

MODEL_FORMAT = "physiocue.margin_classifier"
MODEL_VERSION = 1


@dataclass(frozen=True)
class ResponseFeature:
    """Pulse (bpm) and saccade (saccades/s) deltas from the subject's median."""

    subject_id: str
    question_id: int
    pulse_feat: float
    saccade_feat: float
    label: str

    def __post_init__(self):
        if not (np.isfinite(self.pulse_feat) and np.isfinite(self.saccade_feat)):
            raise InvalidInputError(f"non-finite feature for {self.subject_id}/{self.question_id}")
        if self.label not in ("truthful", "deceptive"):
            raise InvalidInputError(f"unknown label {self.label!r}")

    @property
    def vector(self):
        return (self.pulse_feat, self.saccade_feat)


def response_hr(hr: HeartRateSeries, start_s: float, end_s: float) -> float:
    """Mean HR over ``[start_s, end_s)``; falls back to the value at the midpoint."""
    s = hr.hr_bpm
    t = s.times
    m = (t >= start_s) & (t < end_s)
    if m.any():
        return float(s.samples[m].mean())
    return float(np.interp((start_s + end_s) / 2, t, s.samples))


def median_centre(values: Sequence[float]) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    return v - np.median(v) if v.size else v


def build_features(hr: HeartRateSeries, saccade_events, annotations, gaze_rate_hz: float, gaze_start_time_s: float = 0.0):
    """Features for the response intervals of one subject.

    Raw response HR and eye-movement rate are each centred on the subject's
    median over all of their responses.
    """
    responses = [a for a in annotations if a.phase == "response"]
    if not responses:
        return []
    hrs = [response_hr(hr, a.start_s, a.end_s) for a in responses]
    emrs = [emr_over_interval(saccade_events, a, gaze_rate_hz, gaze_start_time_s) for a in responses]
    return features_from_values(
        [(a.subject_id, a.question_id, a.label, h, e) for a, h, e in zip(responses, hrs, emrs)]
    )


def features_from_values(rows) -> list:
    """Median-centre raw ``(subject_id, question_id, label, hr, emr)`` rows per subject.

    Output keeps input order.
    """
    rows = list(rows)
    idx_by_subject = {}
    for i, r in enumerate(rows):
        idx_by_subject.setdefault(r[0], []).append(i)
    pulse = np.zeros(len(rows))
    sacc = np.zeros(len(rows))
    for idxs in idx_by_subject.values():
        pulse[idxs] = median_centre([rows[i][3] for i in idxs])
        sacc[idxs] = median_centre([rows[i][4] for i in idxs])
    return [
        ResponseFeature(r[0], int(r[1]), float(pulse[i]), float(sacc[i]), r[2])
        for i, r in enumerate(rows)
    ]


def threshold_predict(values) -> list:
    """The median-threshold classifier on centred features: deceptive iff > 0."""
    return [bool(v > 0) for v in values]


def fuse_boolean(pred_a, pred_b, mode: str) -> list:
    """Element-wise AND / OR of two deceptive(True)/truthful(False) sequences."""
    a, b = list(pred_a), list(pred_b)
    if len(a) != len(b):
        raise InvalidInputError("prediction sequences differ in length")
    if mode == "AND":
        return [bool(x and y) for x, y in zip(a, b)]
    if mode == "OR":
        return [bool(x or y) for x, y in zip(a, b)]
    raise InvalidInputError(f"unknown fusion mode {mode!r}")


def accuracy(predictions, labels) -> float:
    truth = [l == "deceptive" if isinstance(l, str) else bool(l) for l in labels]
    if len(truth) != len(predictions) or not truth:
        raise InvalidInputError("predictions and labels must be non-empty and aligned")
    return float(np.mean([bool(p) == t for p, t in zip(predictions, truth)]))


# -- margin classifiers ---------------------------------------------------------


@dataclass
class MarginClassifier:
    kind: str
    mean: np.ndarray
    scale: np.ndarray
    weights: Optional[np.ndarray] = None
    bias: float = 0.0
    support: Optional[np.ndarray] = None
    dual_coef: Optional[np.ndarray] = None
    rbf_gamma: Optional[float] = None
    lam: float = 1e-3
    training_seed: int = 0
    n_iter: int = 0

    def decision_function(self, x) -> np.ndarray:
        z = (np.atleast_2d(np.asarray(x, dtype=float)) - self.mean) / self.scale
        if self.kind == "linear":
            return z @ self.weights + self.bias
        k = rbf_kernel(z, self.support, self.rbf_gamma) + 1.0
        return k @ self.dual_coef

    def to_dict(self):
        d = {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "kind": self.kind,
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
            "lam": self.lam,
            "training_seed": self.training_seed,
            "n_iter": self.n_iter,
        }
        if self.kind == "linear":
            d.update(weights=self.weights.tolist(), bias=self.bias)
        else:
            d.update(support=self.support.tolist(), dual_coef=self.dual_coef.tolist(), rbf_gamma=self.rbf_gamma)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d) -> "MarginClassifier":
        if d.get("format") != MODEL_FORMAT or d.get("version") != MODEL_VERSION:
            raise InvalidInputError(f"unsupported model document {d.get('format')} v{d.get('version')}")
        arr = lambda k: None if d.get(k) is None else np.asarray(d[k], dtype=float)
        return cls(
            kind=d["kind"], mean=arr("mean"), scale=arr("scale"), weights=arr("weights"),
            bias=float(d.get("bias", 0.0)), support=arr("support"), dual_coef=arr("dual_coef"),
            rbf_gamma=d.get("rbf_gamma"), lam=d["lam"], training_seed=d["training_seed"],
            n_iter=d["n_iter"],
        )

    @classmethod
    def from_json(cls, text: str) -> "MarginClassifier":
        return cls.from_dict(json.loads(text))


def rbf_kernel(a, b, gamma):
    sq = (a**2).sum(1)[:, None] + (b**2).sum(1)[None, :] - 2 * a @ b.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


def median_gamma(z) -> float:
    """``1 / (2 * median pairwise squared distance)``."""
    n = len(z)
    iu = np.triu_indices(n, 1)
    sq = ((z[:, None, :] - z[None, :, :]) ** 2).sum(-1)[iu]
    med = float(np.median(sq)) if sq.size else 1.0
    return 1.0 / (2.0 * med) if med > 0 else 1.0


def _xy(features, labels=None):
    if labels is None:
        x = np.array([f.vector for f in features], dtype=float)
        y = np.array([1.0 if f.label == "deceptive" else -1.0 for f in features])
        return x, y
    x = np.atleast_2d(np.asarray(features, dtype=float))
    y = np.array([1.0 if (l == "deceptive" if isinstance(l, str) else l) else -1.0 for l in labels])
    return x, y


def train_margin_classifier(
    features,
    kind: str = "linear",
    seed: int = 0,
    labels=None,
    lam: float = 1e-3,
    epochs: int = 200,
    gamma: Optional[float] = None,
) -> MarginClassifier:
    """Hinge-loss, L2-regularised classifier trained by stochastic subgradient steps.

    Inputs are standardized with training statistics.  The linear kind
    optimises the primal; the rbf kind runs the same updates on kernel
    expansion coefficients.  A bias is learnt by appending a constant
    feature (a constant added to the kernel).  ``features`` is a sequence of
    :class:`ResponseFeature` or an array paired with ``labels``.
    """
    if kind not in ("linear", "rbf"):
        raise InvalidInputError(f"unknown classifier kind {kind!r}")
    x, y = _xy(features, labels)
    if len(np.unique(y)) < 2:
        raise InvalidInputError("training data must contain both classes")
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale == 0] = 1.0
    z = (x - mean) / scale
    n = len(z)
    rng = np.random.default_rng(seed)
    n_iter = epochs * n
    order = np.concatenate([rng.permutation(n) for _ in range(epochs)])
    if kind == "linear":
        za = np.hstack([z, np.ones((n, 1))])
        w = np.zeros(za.shape[1])
        for t, i in enumerate(order, start=1):
            eta = 1.0 / (lam * t)
            margin = y[i] * (za[i] @ w)
            w *= 1.0 - eta * lam
            if margin < 1:
                w += eta * y[i] * za[i]
        return MarginClassifier("linear", mean, scale, weights=w[:-1].copy(), bias=float(w[-1]),
                                lam=lam, training_seed=seed, n_iter=n_iter)
    g = median_gamma(z) if gamma is None else gamma
    k = rbf_kernel(z, z, g) + 1.0
    counts = np.zeros(n)
    for t, i in enumerate(order, start=1):
        f = (counts * y) @ k[:, i] / (lam * t)
        if y[i] * f < 1:
            counts[i] += 1
    dual = counts * y / (lam * n_iter)
    return MarginClassifier("rbf", mean, scale, support=z.copy(), dual_coef=dual, rbf_gamma=g,
                            lam=lam, training_seed=seed, n_iter=n_iter)


def classify(model: MarginClassifier, features, labels=None):
    """Hard predictions (True = deceptive) and accuracy against the labels."""
    x, y = _xy(features, labels)
    preds = [bool(v > 0) for v in model.decision_function(x)]
    acc = float(np.mean([p == (t > 0) for p, t in zip(preds, y)]))
    return preds, acc
