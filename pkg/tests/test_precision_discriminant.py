import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from hdqc.discriminant import (
    FitOptions,
    TrainedClassifier,
    bayes_rule_known_params,
    classify,
    decide,
    discriminant_score,
    fit,
    fit_summaries,
    oracle_classifier,
)
from hdqc.errors import DegenerateFeatureError, DimensionError, SingularPrecisionError, DataError
from hdqc.precision import Diagonal, FeatureRestricted, Full, Identity, ScaledIdentity, spec_from_dict
from hdqc.summaries import ClassSummary, Dataset, fit_class_summary
from hdqc.theory import PopulationModel, delta_i, population_specs


def random_spd(rng, p, jitter=0.5):
    M = rng.normal(size=(p, p))
    return M @ M.T / p + jitter * np.eye(p)


def two_class_data(rng, p=6, n=(7, 9), shift=1.0):
    return Dataset((rng.normal(size=(n[0], p)), shift + 1.5 * rng.normal(size=(n[1], p))), ("a", "b"))


# -- scores ----------------------------------------------------------------


def test_scalar_score_by_hand():
    s = fit_class_summary(np.array([[-1.0], [1.0]]))
    assert discriminant_score([2.0], s, Identity(1)) == 3.0


def test_score_at_mean_is_minus_bias():
    rng = np.random.default_rng(0)
    s = fit_class_summary(rng.normal(size=(5, 4)))
    assert discriminant_score(s.mean, s, Identity(4)) == pytest.approx(-s.trace / 5, rel=1e-14)


def test_diagonal_score_matches_scalar_loop():
    rng = np.random.default_rng(1)
    s = fit_class_summary(rng.normal(size=(6, 2)))
    a = [2.0, 4.0]
    x0 = rng.normal(size=2)
    ref = sum((x0[j] - s.mean[j]) ** 2 * a[j] - s.cov_diag[j] * a[j] / s.n - math.log(a[j]) for j in range(2))
    assert discriminant_score(x0, s, Diagonal(np.array(a))) == pytest.approx(ref, rel=1e-12)


def test_full_score_matches_double_loop():
    rng = np.random.default_rng(2)
    for _ in range(5):
        p = 10
        C = random_spd(rng, p)
        X = rng.normal(size=(15, p))
        s = fit_class_summary(X, full_cov=True)
        x0 = rng.normal(size=p)
        A = np.linalg.inv(C)
        d = x0 - s.mean
        quad = sum(d[a] * A[a, b] * d[b] for a in range(p) for b in range(p))
        tr = sum(s.cov[a, b] * A[b, a] for a in range(p) for b in range(p))
        ref = quad - tr / s.n - np.linalg.slogdet(A)[1]
        got = discriminant_score(x0, s, Full.from_covariance(C))
        assert abs(got - ref) <= 1e-10 * max(1.0, abs(ref))


def test_score_rejects_bad_input():
    s = fit_class_summary(np.eye(3))
    with pytest.raises(DimensionError):
        discriminant_score(np.zeros(2), s, Identity(3))
    with pytest.raises(DataError):
        discriminant_score(np.array([np.inf, 0, 0]), s, Identity(3))


def test_spec_invariants():
    with pytest.raises(SingularPrecisionError):
        Diagonal(np.array([1.0, 0.0]))
    with pytest.raises(SingularPrecisionError):
        Full.from_covariance(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(DataError):
        FeatureRestricted(np.array([2, 1]), Diagonal(np.ones(2)), 4)
    with pytest.raises(DataError):
        FeatureRestricted(np.array([], dtype=int), Diagonal(np.ones(0) + 1), 4)
    rng = np.random.default_rng(3)
    C = random_spd(rng, 5)
    assert Full.from_covariance(C).logdet == pytest.approx(-np.linalg.slogdet(C)[1], rel=1e-12)


def test_spec_round_trip_is_bit_faithful():
    rng = np.random.default_rng(4)
    specs = [
        Identity(4),
        ScaledIdentity(rng.uniform(0.1, 3), 4),
        Diagonal(rng.uniform(0.1, 3, 4)),
        Full.from_covariance(random_spd(rng, 4)),
        FeatureRestricted(np.array([0, 3]), Diagonal(rng.uniform(0.1, 3, 2)), 4),
    ]
    import json

    for spec in specs:
        back = spec_from_dict(json.loads(json.dumps(spec.to_dict())))
        assert back.to_dict() == spec.to_dict()
        assert np.array_equal(back.dense(), spec.dense())
        assert back.logdet == spec.logdet


# -- decision rule ---------------------------------------------------------


def test_identical_classes_tie_to_first():
    s = fit_class_summary(np.array([[0.0, 1.0], [1.0, 0.0], [2.0, 2.0]]))
    data = Dataset((np.array([[0.0, 1.0], [1.0, 0.0], [2.0, 2.0]]),) * 2, ("a", "b"))
    m = fit(data, "dbda")
    idx, tie = classify(np.array([0.3, 0.1]), m)
    assert (idx, tie) == (0, True)
    strict = fit(data, "dbda", FitOptions(strict_ties=True))
    assert classify(np.array([0.3, 0.1]), strict) == (1, True)
    assert s.n == 3


def test_dbda_large_separation():
    X1 = np.array([[0.5, 0.0], [-0.5, 0.0], [0.0, 0.5], [0.0, -0.5]])
    m = fit(Dataset((X1, X1 + 10), ("1", "2")), "dbda")
    assert classify(np.array([0.1, 0.0]), m) == (0, False)


def test_three_class_argmin():
    rng = np.random.default_rng(5)
    data = Dataset(tuple(rng.normal(loc=k, size=(5, 4)) for k in range(3)), ("a", "b", "c"))
    m = fit(data, "dqda_bc")
    X0 = rng.normal(loc=1, size=(50, 4))
    S = m.scores(X0)
    idx, _ = m.predict(X0)
    for r in range(50):
        scores = [discriminant_score(X0[r], fit_class_summary(x), c.precision) for x, c in zip(data.classes, m.classes)]
        assert_allclose(S[r], scores, rtol=1e-12)
        assert idx[r] == int(np.argmin(scores))


def test_decide_tie_rules():
    S = np.array([[1.0, 1.0, 2.0], [3.0, 2.0, 2.0], [0.0, 1.0, -1.0]])
    idx, tie = decide(S)
    assert idx.tolist() == [0, 1, 2] and tie.tolist() == [True, True, False]
    idx, tie = decide(S, strict_ties=True)
    assert idx.tolist() == [1, 2, 2]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["dbda", "gqda", "dlda_bc", "dqda_bc"]))
def test_label_permutation_equivariance(seed, variant):
    rng = np.random.default_rng(seed)
    classes = tuple(rng.normal(loc=k, scale=1 + k / 2, size=(4 + k, 3)) for k in range(3))
    perm = [2, 0, 1]
    m = fit(Dataset(classes, ("a", "b", "c")), variant)
    mp = fit(Dataset(tuple(classes[k] for k in perm), ("c", "a", "b")), variant)
    X0 = rng.normal(loc=1, scale=2, size=(20, 3))
    i, t = m.predict(X0)
    ip, tp = mp.predict(X0)
    for r in range(20):
        if not t[r] and not tp[r]:
            assert perm[ip[r]] == i[r]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_dbda_translation_invariance(seed):
    rng = np.random.default_rng(seed)
    data = two_class_data(rng, p=4)
    c = rng.normal(scale=5, size=4)
    X0 = rng.normal(size=(10, 4))
    a = fit(data, "dbda").scores(X0)
    b = fit(Dataset(tuple(x + c for x in data.classes), data.labels), "dbda").scores(X0 + c)
    assert_allclose(a[:, 0] - a[:, 1], b[:, 0] - b[:, 1], atol=1e-8 * (1 + np.abs(a).max()))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_choice_one_is_nearest_centroid_with_equal_sizes_and_traces(seed):
    rng = np.random.default_rng(seed)
    p = 5
    X1 = rng.normal(size=(6, p))
    X2 = rng.normal(loc=0.5, size=(6, p))
    X2 = (X2 - X2.mean(0)) * math.sqrt(fit_class_summary(X1).trace / fit_class_summary(X2).trace) + X2.mean(0)
    data = Dataset((X1, X2), ("a", "b"))
    m = fit(data, "dbda")
    X0 = rng.normal(loc=0.25, size=(40, p))
    idx, tie = m.predict(X0)
    d = np.stack([((X0 - x.mean(0)) ** 2).sum(1) for x in data.classes], axis=1)
    gap = np.abs(d[:, 0] - d[:, 1])
    ok = ~tie & (gap > 1e-9)
    assert np.all(idx[ok] == np.argmin(d, axis=1)[ok])


# -- fitting every variant -------------------------------------------------


def test_gqda_equals_dbda_when_traces_equal_p():
    rng = np.random.default_rng(6)
    p = 5
    X = [rng.normal(size=(n, p)) for n in (6, 8)]
    X = [(x - x.mean(0)) * math.sqrt(p / fit_class_summary(x).trace) + x.mean(0) for x in X]
    data = Dataset(tuple(X), ("a", "b"))
    g = fit(data, "gqda")
    d = fit(data, "dbda")
    for c in g.classes:
        assert c.precision.scale == pytest.approx(1.0, rel=1e-12)
        assert c.logdet == pytest.approx(0.0, abs=1e-12)
    X0 = rng.normal(size=(10, p))
    assert_allclose(g.scores(X0), d.scores(X0), rtol=1e-10)


def test_gqda_bias_and_logdet_terms():
    rng = np.random.default_rng(7)
    data = two_class_data(rng)
    m = fit(data, "gqda")
    for c, x in zip(m.classes, data.classes):
        t = fit_class_summary(x).trace
        assert c.bias == data.p / x.shape[0]
        assert c.logdet == pytest.approx(data.p * math.log(data.p / t), rel=1e-12)


def test_dlda_bc_scalar_difference():
    X1 = np.array([[0.0], [1.0], [3.0]])
    X2 = np.array([[2.0], [5.0]])
    s1, s2 = fit_class_summary(X1), fit_class_summary(X2)
    sn = (2 * s1.cov_diag[0] + 1 * s2.cov_diag[0]) / 3
    x0 = 1.7
    ref = ((x0 - s1.mean[0]) ** 2 - (x0 - s2.mean[0]) ** 2) / sn - (s1.cov_diag[0] / 3 - s2.cov_diag[0] / 2) / sn
    m = fit(Dataset((X1, X2), ("1", "2")), "dlda_bc")
    S = m.scores([x0])[0]
    assert S[0] - S[1] == pytest.approx(ref, rel=1e-12)


def test_fs_dqda_selects_the_informative_coordinate():
    rng = np.random.default_rng(8)
    p, n = 6, 60
    X1 = rng.normal(size=(n, p))
    X2 = rng.normal(size=(n, p))
    X2[:, 3] = 3 + 2 * X2[:, 3]
    m = fit(Dataset((X1, X2), ("1", "2")), "fs_dqda", FitOptions(gamma=0.5))
    assert m.selected.tolist() == [3]
    assert isinstance(m.classes[0].precision, FeatureRestricted)
    assert m.classes[0].bias == 1 / n


def test_fs_dqda_empty_selection_falls_back(caplog):
    X = np.array([[0.0, 1.0], [1.0, 0.0], [2.0, 2.0]])
    with caplog.at_level(logging.WARNING):
        m = fit(Dataset((X, X), ("a", "b")), "fs_dqda")
    assert m.selected.size == 0
    assert isinstance(m.classes[0].precision, Identity)
    assert "falling back" in caplog.text


def test_degenerate_feature_is_named():
    X1 = np.array([[1.0, 0.0], [1.0, 1.0], [1.0, 2.0]])
    X2 = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 5.0]])
    with pytest.raises(DegenerateFeatureError) as err:
        fit(Dataset((X1, X2), ("a", "b")), "dqda_bc")
    assert err.value.coordinate == 0


def test_sample_precision_needs_enough_samples():
    rng = np.random.default_rng(9)
    data = Dataset((rng.normal(size=(6, 5)), rng.normal(size=(9, 5))), ("a", "b"))
    with pytest.raises(SingularPrecisionError):
        fit(data, "sample_precision")
    data = Dataset((rng.normal(size=(30, 5)), rng.normal(size=(40, 5))), ("a", "b"))
    m = fit(data, "sample_precision")
    S = np.cov(data.classes[0], rowvar=False)
    assert m.classes[0].logdet == pytest.approx(-np.linalg.slogdet(S)[1], rel=1e-10)
    assert m.classes[0].bias == 5 / 30


def test_thresholded_variant():
    rng = np.random.default_rng(10)
    p = 4
    data = Dataset((rng.normal(size=(200, p)), 2 * rng.normal(size=(150, p))), ("a", "b"))
    m = fit(data, "thresholded", FitOptions())
    S = np.cov(data.classes[0], rowvar=False)
    tau = 2.0 * math.sqrt(math.log(p) / 200)
    T = np.where(np.abs(S) >= tau, S, 0)
    assert_allclose(m.classes[0].precision.dense(), np.linalg.inv(T), rtol=1e-10)


def test_thresholded_singular_is_hard_error():
    rng = np.random.default_rng(11)
    data = Dataset((0.1 * rng.normal(size=(5, 3)), 0.1 * rng.normal(size=(5, 3))), ("a", "b"))
    with pytest.raises(SingularPrecisionError):
        fit(data, "thresholded")


def test_standardized_fit_scales_observations():
    rng = np.random.default_rng(12)
    data = two_class_data(rng)
    X0 = rng.normal(size=(7, data.p)) * 10
    m = fit(Dataset(tuple(10 * x for x in data.classes), data.labels), "dqda_bc", FitOptions(standardize=True))
    ref = fit(data, "dqda_bc", FitOptions(standardize=True))
    assert m.predict(X0)[0].tolist() == ref.predict(X0 / 10)[0].tolist()


@pytest.mark.parametrize("variant", ["dbda", "gqda", "dlda_bc", "dqda_bc", "fs_dqda", "sample_precision", "thresholded"])
def test_model_json_round_trip(tmp_path, variant):
    rng = np.random.default_rng(13)
    p = 4
    X1 = rng.normal(size=(60, p))
    X2 = rng.normal(size=(60, p))
    X2[:, 2] = 3 + 2 * X2[:, 2]
    m = fit(Dataset((X1, X2), ("x", "y")), variant, FitOptions(standardize=True))
    path = tmp_path / "m.json"
    m.save(path)
    back = TrainedClassifier.load(path)
    X0 = rng.normal(size=(10, p))
    assert np.array_equal(back.scores(X0), m.scores(X0))
    assert back.to_dict() == m.to_dict()


# -- oracle and Bayes rule -------------------------------------------------


def test_oracle_specs():
    rng = np.random.default_rng(14)
    pop = PopulationModel((np.zeros(1), np.ones(1)), (np.array([[1.0]]), np.array([[2.0]])))
    data = Dataset((rng.normal(size=(4, 1)), rng.normal(size=(5, 1))), ("1", "2"))
    m = oracle_classifier(pop, "IV", data)
    spec = m.classes[1].precision
    assert_allclose(spec.dense(), [[0.5]], rtol=1e-15)
    assert spec.logdet == pytest.approx(-math.log(2), rel=1e-15)
    assert isinstance(oracle_classifier(pop, "I", data).classes[0].precision, Identity)
    pop2 = PopulationModel((np.zeros(3), np.ones(3)), (np.diag([0.5, 1.0, 1.5]), np.eye(3)))
    spec = oracle_classifier(pop2, "II", Dataset((rng.normal(size=(4, 3)),) * 2, ("1", "2"))).classes[0].precision
    assert spec.scale == 1.0 and spec.logdet == 0.0


def test_bayes_rule_examples():
    I = np.eye(2)
    pop = PopulationModel((np.zeros(2), np.array([2.0, 0.0])), (I, I))
    assert bayes_rule_known_params(np.array([0.5, 0.0]), pop) == (0, False)
    assert bayes_rule_known_params(np.array([1.0, 3.0]), pop) == (0, True)
    pop = PopulationModel((np.zeros(1), np.zeros(1)), (np.eye(1), 4 * np.eye(1)))
    assert bayes_rule_known_params(np.zeros(1), pop) == (0, False)


@pytest.mark.slow
@pytest.mark.parametrize("choice", ["I", "II", "III", "IV"])
def test_bias_correction_matches_delta(choice):
    # Monte Carlo mean of W_other - W_i over fresh x0 and training sets equals Delta_i
    rng = np.random.default_rng(15)
    p, n, R = 4, (5, 7), 20_000
    pop = PopulationModel((np.zeros(p), rng.normal(scale=0.5, size=p)), (random_spd(rng, p), random_spd(rng, p)))
    specs = population_specs(pop, choice)
    L = pop.factors
    for i in (0, 1):
        j = 1 - i
        X = [pop.mu[c] + rng.standard_normal((R, n[c], p)) @ L[c].T for c in (0, 1)]
        x0 = pop.mu[i] + rng.standard_normal((R, p)) @ L[i].T
        W = []
        for c in (0, 1):
            xbar = X[c].mean(axis=1)
            Xc = X[c] - xbar[:, None, :]
            bias = specs[c].quad(Xc).sum(axis=1) / ((n[c] - 1) * n[c])
            W.append(specs[c].quad(x0 - xbar) - bias - specs[c].logdet)
        diff = W[j] - W[i]
        se = diff.std(ddof=1) / math.sqrt(R)
        assert abs(diff.mean() - delta_i(pop, specs, i)) <= 3 * se
