import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hdqc.discriminant import FitOptions, fit
from hdqc.errors import DataError, InsufficientSamplesError
from hdqc.evaluation import LoocvOptions, _ClassMoments, evaluate_split, gamma_sweep, loocv
from hdqc.summaries import Dataset, fit_class_summary, standardize_global
from hdqc.theory import normal_cdf

DIAG = ["dbda", "gqda", "dlda_bc", "dqda_bc", "fs_dqda"]


def random_dataset(rng, sizes, p, shift=0.8):
    return Dataset(tuple(rng.normal(loc=k * shift, scale=1 + 0.5 * k, size=(n, p)) for k, n in enumerate(sizes)), tuple(f"c{k}" for k in range(len(sizes))))


def naive_loocv(data, variant, opts):
    """Refit from scratch on every N - 1 subset."""
    pred = []
    for c, X in enumerate(data.classes):
        for r in range(X.shape[0]):
            model = fit(data.without(c, r), variant, opts)
            pred.append(int(model.predict(X[r][None, :])[0][0]))
    return np.array(pred)


def dbda_resubstitution(data):
    wrong = []
    for c, X in enumerate(data.classes):
        for x in X:
            w = []
            for Y in data.classes:
                m = Y.mean(axis=0)
                tr = sum(np.var(Y[:, j], ddof=1) for j in range(Y.shape[1]))
                w.append(float(np.sum((x - m) ** 2)) - tr / Y.shape[0])
            wrong.append(int(np.argmin(w)) != c)
    return sum(wrong)


@pytest.mark.parametrize("standardize", [True, False])
def test_loocv_matches_naive_refits(standardize):
    rng = np.random.default_rng(0)
    data = random_dataset(rng, (3, 3), 8)
    opts = FitOptions(standardize=standardize)
    rep = loocv(data, DIAG, LoocvOptions(fit=opts))
    for v in DIAG:
        assert np.array_equal(rep.result(v).predictions, naive_loocv(data, v, opts)), v


def test_loocv_full_covariance_variant_matches_naive():
    rng = np.random.default_rng(1)
    data = random_dataset(rng, (6, 7), 3)
    opts = FitOptions(standardize=True)
    rep = loocv(data, ["sample_precision"], LoocvOptions(fit=opts))
    assert np.array_equal(rep.result("sample_precision").predictions, naive_loocv(data, "sample_precision", opts))


def test_downdate_matches_recomputation():
    rng = np.random.default_rng(2)
    X = rng.normal(loc=50.0, size=(9, 30))
    mom = _ClassMoments(X)
    for r in range(9):
        a, b = mom.without(r), fit_class_summary(np.delete(X, r, axis=0))
        np.testing.assert_allclose(a.mean, b.mean, rtol=1e-12)
        np.testing.assert_allclose(a.cov_diag, b.cov_diag, rtol=1e-10)
        assert a.trace == pytest.approx(b.trace, rel=1e-10) and a.n == b.n


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_loocv_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    data = random_dataset(rng, (5, 6), 12)
    perm = Dataset(tuple(rng.permutation(x) for x in data.classes), data.labels)
    a, b = loocv(data, DIAG), loocv(perm, DIAG)
    for v in DIAG:
        assert a.result(v).errors == b.result(v).errors


def test_separated_clusters_have_zero_loocv_error():
    rng = np.random.default_rng(3)
    data = Dataset((rng.normal(size=(8, 20)) * 0.01, 5 + rng.normal(size=(9, 20)) * 0.01), ("a", "b"))
    r = loocv(data, ["dbda"]).result("dbda")
    assert r.fractions()[-1] == "0/17"


def test_signal_coordinate_selected_in_most_folds():
    rng = np.random.default_rng(4)
    p, n = 50, 15
    X1, X2 = rng.normal(size=(n, p)), rng.normal(size=(n, p))
    X2[:, 0] += 3.0
    data = Dataset((X1, X2), ("a", "b"))
    hits = 0
    for c in range(2):
        for r in range(n):
            hits += 0 in fit(data.without(c, r), "fs_dqda", FitOptions(standardize=True)).selected
    assert hits / (2 * n) >= 0.9
    counts = loocv(data, ["fs_dqda"]).result("fs_dqda").selected_counts
    assert counts.size == 2 * n and np.all(counts >= 1)


def test_cohort_standardization_is_cohort_scaling_then_plain_folds():
    rng = np.random.default_rng(5)
    data = random_dataset(rng, (6, 5), 15).scaled(0.01)
    a = loocv(data, DIAG, LoocvOptions(cohort_standardization=True))
    b = loocv(standardize_global(data)[0], DIAG, LoocvOptions(fit=FitOptions(standardize=False)))
    assert a.protocol == "LOOCV (cohort standardization)"
    for v in DIAG:
        assert np.array_equal(a.result(v).predictions, b.result(v).predictions)


def test_loocv_workers_do_not_change_report():
    rng = np.random.default_rng(6)
    data = random_dataset(rng, (7, 8), 25)
    a = loocv(data, DIAG, LoocvOptions(workers=1)).to_csv()
    b = loocv(data, DIAG, LoocvOptions(workers=3)).to_csv()
    assert a == b


def test_loocv_requires_three_per_class():
    rng = np.random.default_rng(7)
    with pytest.raises(InsufficientSamplesError):
        loocv(random_dataset(rng, (2, 5), 4), ["dbda"])


def test_resubstitution_matches_direct_loop():
    rng = np.random.default_rng(8)
    data = random_dataset(rng, (10, 12), 30, shift=0.3)
    for opts in (FitOptions(), FitOptions(standardize=True)):
        r = evaluate_split(data, data, ["dbda"], opts).result("dbda")
        assert r.total_errors == dbda_resubstitution(data)


def test_split_report_invariants_and_failures():
    rng = np.random.default_rng(9)
    train, test = random_dataset(rng, (5, 6), 40), random_dataset(rng, (4, 3), 40)
    rep = evaluate_split(train, test, ["dbda", "sample_precision", "fs_dqda"])
    for r in rep.results:
        assert all(e <= n for e, n in zip(r.errors, r.sizes))
        assert r.total_errors == sum(r.errors)
    bad = rep.result("sample_precision")
    assert bad.failures == 7 and bad.failure_message
    assert rep.result("dbda").failures == 0
    with pytest.raises(DataError):
        evaluate_split(train, random_dataset(rng, (4, 3), 5), ["dbda"])


def test_dbda_error_at_p1_matches_closed_form():
    rng = np.random.default_rng(10)
    train = Dataset((rng.normal(size=(5000, 1)), 2 + rng.normal(size=(5000, 1))), ("a", "b"))
    N = 20_000
    test = Dataset((rng.normal(size=(N, 1)), 2 + rng.normal(size=(N, 1))), ("a", "b"))
    r = evaluate_split(train, test, ["dbda"]).result("dbda")
    exact = normal_cdf(-1.0)
    e = r.total_errors / r.total
    assert abs(e - exact) <= 2 * math.sqrt(exact * (1 - exact) / r.total)


def test_fraction_formatting():
    truth = np.array([0] * 20 + [1] * 14)
    pred = truth.copy()
    pred[25] = 0
    from hdqc.evaluation import ClassifierResult, EvaluationReport

    r = ClassifierResult("dbda", ("ALL", "AML"), truth, pred, np.zeros(34, bool))
    assert r.fractions() == ["0/20", "1/14", "1/34"]
    rep = EvaluationReport("LOOCV", ("ALL", "AML"), (r,))
    assert "1/34" in rep.table() and "DBDA" in rep.table()
    assert "dbda,total,1,34,1/34,0," in rep.to_csv()


def test_gamma_sweep_matches_individual_runs():
    rng = np.random.default_rng(11)
    data = random_dataset(rng, (6, 6), 40)
    pts = gamma_sweep(data, [0.3, 0.7])
    for pt in pts:
        r = loocv(data, ["fs_dqda"], LoocvOptions(fit=FitOptions(gamma=pt.gamma, standardize=True))).result("fs_dqda")
        assert pt.errors == r.total_errors and pt.total == 12
