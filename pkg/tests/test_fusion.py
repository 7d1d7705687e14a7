"""Response features, boolean fusion and the margin classifiers."""
import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize

from physiocue.errors import InvalidInputError
from physiocue.fusion import (
    MarginClassifier,
    ResponseFeature,
    accuracy,
    build_features,
    classify,
    features_from_values,
    fuse_boolean,
    median_gamma,
    response_hr,
    threshold_predict,
    train_margin_classifier,
)
from physiocue.hr import HeartRateSeries
from physiocue.oculomotor import IntervalAnnotation, SaccadeEvent
from physiocue.series import UniformSeries
from physiocue.synth import ResponseSynthSpec, synth_responses

XOR = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
XOR_Y = ["truthful", "truthful", "deceptive", "deceptive"]


def blobs(seed=0, n=40, sep=4.0):
    rng = np.random.default_rng(seed)
    x = np.vstack([rng.normal(0, 1, (n, 2)), rng.normal(sep, 1, (n, 2))])
    y = ["truthful"] * n + ["deceptive"] * n
    return x, y


# -- features -------------------------------------------------------------------------------


def test_median_centred_pulse_features():
    rows = [("S", q, "truthful", h, 0.0) for q, h in enumerate([70, 72, 74, 80])]
    assert [f.pulse_feat for f in features_from_values(rows)] == [-3.0, -1.0, 1.0, 7.0]


def test_single_response_feature_is_zero():
    f = features_from_values([("S", 1, "deceptive", 81.0, 0.7)])
    assert (f[0].pulse_feat, f[0].saccade_feat) == (0.0, 0.0)


def test_build_features_from_series():
    hr = HeartRateSeries(UniformSeries(np.r_[np.full(100, 70.0), np.full(100, 80.0)], 10.0))
    anns = [
        IntervalAnnotation(1, "question", 0.0, 2.0, None, "S"),
        IntervalAnnotation(1, "response", 2.0, 8.0, "truthful", "S"),
        IntervalAnnotation(2, "response", 11.0, 17.0, "deceptive", "S"),
    ]
    ev = [SaccadeEvent(f, f, 80.0) for f in (70, 80, 90, 350)]  # 30 Hz frames
    feats = build_features(hr, ev, anns, 30.0)
    assert [(f.question_id, f.label) for f in feats] == [(1, "truthful"), (2, "deceptive")]
    # HR 70 vs 80 around a median of 75; EMR 3/6 vs 1/6 around 1/3
    assert [f.pulse_feat for f in feats] == pytest.approx([-5.0, 5.0])
    assert [f.saccade_feat for f in feats] == pytest.approx([1 / 6, -1 / 6])


def test_response_hr_falls_back_to_interpolation():
    hr = HeartRateSeries(UniformSeries([60.0, 70.0], 1.0))
    assert response_hr(hr, 0.2, 0.8) == pytest.approx(65.0)


def test_feature_validation():
    with pytest.raises(InvalidInputError):
        ResponseFeature("S", 1, np.nan, 0.0, "truthful")
    with pytest.raises(InvalidInputError):
        ResponseFeature("S", 1, 0.0, 0.0, "maybe")


def test_constructed_offsets_are_linearly_separable():
    # [DERIVED] +5 bpm and +0.2 saccades/s with no within-subject spread
    rows = synth_responses(ResponseSynthSpec(seed=3, n_subjects=6, n_responses=10, hr_sd=0.0, emr_sd=0.0,
                                             hr_deceptive_offset=5.0, emr_deceptive_offset=0.2))
    feats = features_from_values(rows)
    model = train_margin_classifier(feats, "linear")
    assert classify(model, feats)[1] == 1.0


# -- boolean fusion -----------------------------------------------------------------------------


def test_truth_tables_exhaustive():
    for a, b in itertools.product([False, True], repeat=2):
        assert fuse_boolean([a], [b], "AND") == [a and b]
        assert fuse_boolean([a], [b], "OR") == [a or b]


@given(st.lists(st.booleans(), max_size=20))
def test_fusion_identities(x):
    assert fuse_boolean(x, x, "AND") == x
    assert fuse_boolean(x, [False] * len(x), "OR") == x
    assert fuse_boolean(x, [True] * len(x), "AND") == x


def test_fusion_validation():
    with pytest.raises(InvalidInputError):
        fuse_boolean([True], [True, False], "AND")
    with pytest.raises(InvalidInputError):
        fuse_boolean([True], [True], "XOR")


def test_threshold_and_accuracy():
    assert threshold_predict([-1.0, 0.0, 0.5]) == [False, False, True]
    assert accuracy([True, False], ["deceptive", "deceptive"]) == 0.5
    with pytest.raises(InvalidInputError):
        accuracy([], [])


# -- margin classifiers --------------------------------------------------------------------------


@pytest.mark.parametrize("kind", ["linear", "rbf"])
def test_separable_blobs_fit_perfectly(kind):
    x, y = blobs()
    model = train_margin_classifier(x, kind, labels=y)
    assert classify(model, x, y)[1] == 1.0


def test_xor_linear_at_most_three_quarters_rbf_perfect():
    lin = train_margin_classifier(XOR, "linear", labels=XOR_Y)
    rbf = train_margin_classifier(XOR, "rbf", labels=XOR_Y)
    assert classify(lin, XOR, XOR_Y)[1] <= 0.75
    assert classify(rbf, XOR, XOR_Y)[1] == 1.0


def test_no_line_separates_xor():
    # [DERIVED] exhaustive: every sign pattern a line can cut from 4 XOR points
    # misses the XOR labelling, since a.x + b.y + c would need
    # c < 0, a+b+c < 0, b+c > 0, a+c > 0, and the last two sum to more than the first two
    y = np.array([-1, -1, 1, 1])
    rng = np.random.default_rng(0)
    w = rng.normal(size=(20000, 3))
    s = np.sign(np.c_[XOR, np.ones(4)] @ w.T).T
    assert not np.any(np.all(s == y, axis=1))


def primal_objective(w, b, z, y, lam):
    return lam / 2 * (w @ w + b * b) + np.mean(np.maximum(0, 1 - y * (z @ w + b)))


def test_linear_reaches_primal_optimum():
    # [DERIVED] compare against a constrained QP solve of the same objective
    rng = np.random.default_rng(5)
    x = np.vstack([rng.normal(0, 1, (15, 2)), rng.normal(1.2, 1, (15, 2))])
    y = np.r_[-np.ones(15), np.ones(15)]
    lam = 0.05
    model = train_margin_classifier(x, "linear", labels=y > 0, lam=lam, epochs=2000)
    z = (x - model.mean) / model.scale
    n = len(z)

    def obj(p):
        return lam / 2 * (p[0] ** 2 + p[1] ** 2 + p[2] ** 2) + p[3:].mean()

    cons = [{"type": "ineq", "fun": lambda p: p[3:] - (1 - y * (z @ p[:2] + p[2]))},
            {"type": "ineq", "fun": lambda p: p[3:]}]
    res = optimize.minimize(obj, np.r_[0, 0, 0, np.ones(n)], constraints=cons, method="SLSQP",
                            options={"maxiter": 500, "ftol": 1e-12})
    best = primal_objective(res.x[:2], res.x[2], z, y, lam)
    got = primal_objective(model.weights, model.bias, z, y, lam)
    assert got <= best * 1.02 + 1e-9


def test_training_is_seed_deterministic():
    x, y = blobs(1)
    a = train_margin_classifier(x, "rbf", seed=7, labels=y)
    b = train_margin_classifier(x, "rbf", seed=7, labels=y)
    assert a.to_json() == b.to_json()


@pytest.mark.parametrize("kind", ["linear", "rbf"])
def test_model_json_round_trip(kind):
    x, y = blobs(2, n=10)
    m = train_margin_classifier(x, kind, labels=y)
    m2 = MarginClassifier.from_json(m.to_json())
    np.testing.assert_array_equal(m.decision_function(x), m2.decision_function(x))


def test_model_document_version_checked():
    with pytest.raises(InvalidInputError):
        MarginClassifier.from_dict({"format": "other", "version": 1})


@given(st.floats(0.01, 100), st.floats(-50, 50))
@settings(max_examples=20, deadline=None)
def test_predictions_invariant_to_affine_rescaling(a, c):
    # internal standardization absorbs a positive affine map of one feature
    x, y = blobs(3, n=15, sep=1.5)
    x2 = x.copy()
    x2[:, 0] = a * x2[:, 0] + c
    p1 = classify(train_margin_classifier(x, "linear", labels=y), x, y)[0]
    p2 = classify(train_margin_classifier(x2, "linear", labels=y), x2, y)[0]
    assert p1 == p2


def test_single_class_rejected():
    with pytest.raises(InvalidInputError):
        train_margin_classifier(XOR, labels=["truthful"] * 4)
    with pytest.raises(InvalidInputError):
        train_margin_classifier(XOR, "poly", labels=XOR_Y)


def test_median_gamma():
    z = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])
    # squared distances 1, 4, 5 -> median 4
    assert median_gamma(z) == pytest.approx(1 / 8)
