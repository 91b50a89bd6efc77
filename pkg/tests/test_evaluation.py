import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

import oracles
from pif.errors import DegenerateLabels, DimensionMismatch, ZeroVarianceWarning
from pif.evaluation import (
    T_CRITICAL_05,
    EvalReport,
    ExperimentConfig,
    MethodSpec,
    RunResult,
    cell_seed,
    paired_t_test,
    roc_auc,
    run_experiment,
)

# t statistic of the reference differences, from scipy.stats.ttest_1samp
T_REFERENCE = 7.570719217728539
D_REFERENCE = [0.02, 0.03, 0.01, 0.02, 0.04, 0.02, 0.01, 0.03, 0.02, 0.02]


# -- AUC ------------------------------------------------------------------


@pytest.mark.parametrize(
    "scores, labels, expected",
    [((0.9, 0.8, 0.2, 0.1), (1, 1, 0, 0), 1.0), ((0.5,) * 4, (1, 0, 1, 0), 0.5),
     ((0.9, 0.4, 0.6, 0.1), (1, 0, 1, 0), 1.0), ((0.1, 0.9), (1, 0), 0.0),
     ((0.3, 0.3, 0.1), (1, 0, 0), 0.75)],
)
def test_auc_examples(scores, labels, expected):
    assert roc_auc(scores, labels) == expected


def test_auc_degenerate_labels():
    with pytest.raises(DegenerateLabels):
        roc_auc([0.1, 0.2], [0, 0])
    with pytest.raises(DegenerateLabels):
        roc_auc([0.1, 0.2], [True, True])
    with pytest.raises(DimensionMismatch):
        roc_auc([0.1, 0.2], [0, 1, 1])


labelled_scores = st.integers(2, 200).flatmap(
    lambda n: st.tuples(
        st.lists(st.integers(0, 20).map(lambda v: v / 20), min_size=n, max_size=n),
        st.lists(st.booleans(), min_size=n, max_size=n).filter(lambda y: 0 < sum(y) < len(y)),
    )
)


@settings(max_examples=200, deadline=None)
@given(labelled_scores)
def test_auc_matches_pair_counting(case):
    scores, labels = case
    assert abs(roc_auc(scores, labels) - oracles.auc_pairs(scores, labels)) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(labelled_scores)
def test_auc_invariant_to_monotone_transform(case):
    scores, labels = case
    s = np.array(scores)
    base = roc_auc(s, labels)
    assert roc_auc(np.exp(3 * s) - 7, labels) == pytest.approx(base, abs=1e-12)
    assert roc_auc(s**3, labels) == pytest.approx(base, abs=1e-12)


# -- paired t-test --------------------------------------------------------


def test_t_critical_table_matches_distribution():
    for df, value in enumerate(T_CRITICAL_05, start=1):
        assert value == pytest.approx(stats.t.ppf(0.975, df), abs=5e-4)
    assert T_CRITICAL_05[8] == 2.262


def test_t_reference_differences():
    res = paired_t_test(np.array(D_REFERENCE) + 0.5, np.full(10, 0.5))
    assert res.t == pytest.approx(T_REFERENCE, rel=1e-9)
    assert res.t == pytest.approx(stats.ttest_rel(np.array(D_REFERENCE) + 0.5,
                                                  np.full(10, 0.5)).statistic, rel=1e-9)
    assert res.significant and res.df == 9


def test_t_equal_samples():
    with pytest.warns(ZeroVarianceWarning):
        res = paired_t_test([0.3, 0.4, 0.5], [0.3, 0.4, 0.5])
    assert res.t == 0.0 and not res.significant and res.zero_variance


def test_t_constant_difference():
    with pytest.warns(ZeroVarianceWarning):
        res = paired_t_test(np.ones(10) + 1, np.ones(10))
    assert res.t == math.inf and res.significant
    with pytest.warns(ZeroVarianceWarning):
        assert paired_t_test(np.zeros(4), np.ones(4)).t == -math.inf


def test_t_not_significant_and_errors():
    res = paired_t_test([0.1, 0.5, 0.3, 0.2], [0.2, 0.3, 0.35, 0.2])
    assert not res.significant
    with pytest.raises(ValueError):
        paired_t_test([0.1], [0.2])
    with pytest.raises(DimensionMismatch):
        paired_t_test([0.1, 0.2], [0.2])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=2, max_size=40))
def test_t_matches_scipy(d):
    d = np.array(d)
    if np.all(d == d[0]):
        return
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        ref = stats.ttest_1samp(d, 0.0).statistic
    if not np.isfinite(ref):
        return
    assert paired_t_test(d, np.zeros_like(d)).t == pytest.approx(ref, rel=1e-6, abs=1e-9)


# -- seeds and method ids -------------------------------------------------


def test_cell_seed_is_stable_and_separates_cells():
    assert cell_seed(0, "stair4", 1) == cell_seed(0, "stair4", 1)
    seeds = {cell_seed(0, ds, r) for ds in ("stair4", "star5") for r in range(10)}
    assert len(seeds) == 20
    assert cell_seed(1, "stair4", 1) != cell_seed(0, "stair4", 1)


def test_method_ids():
    assert MethodSpec("pif").id("continuous") == "pif-tanimoto"
    assert MethodSpec("pif").id("binary") == "pif-jaccard"
    assert MethodSpec("pif").id("ambient") == "pif-euclidean"
    assert MethodSpec("ifor").id("binary") == "ifor"
    assert MethodSpec("lof", {"k": 25}).id("continuous") == "lof-k25-tanimoto"
    assert MethodSpec("lof", {"k": 25, "metric": "euclidean"}).id("continuous") == "lof-k25-euclidean"
    with pytest.raises(ValueError):
        MethodSpec("svm")


# -- experiment harness ---------------------------------------------------

FAST = [MethodSpec("pif", {"t": 10}), MethodSpec("ifor", {"t": 10})]


@pytest.fixture(scope="module")
def small_report():
    config = ExperimentConfig(["stair4"], FAST, embeddings=("ambient", "continuous"),
                              runs=3, seed=1)
    return run_experiment(config)


def test_report_shape(small_report):
    assert len(small_report.cells) == 4
    assert {c.runs for c in small_report.cells} == {3}
    for c in small_report.cells:
        aucs = small_report.aucs(c.method, c.dataset, c.embedding)
        assert aucs.min() <= c.mean_auc <= aucs.max()
        assert c.std_auc >= 0
    assert small_report.cell("pif-tanimoto", "stair4").mean_auc > 0.8


def test_report_metadata(small_report):
    meta = small_report.metadata
    assert meta["runs"] == 3
    pif = next(m for m in meta["methods"] if m["name"] == "pif")
    assert (pif["t"], pif["psi"], pif["b"]) == (10, 256, 2)
    default = EvalReport.from_results([], ExperimentConfig(["stair4"], [MethodSpec("pif")]))
    assert default.metadata["methods"][0] == {"name": "pif", "t": 100, "psi": 256, "b": 2}


def test_report_csv_and_text(small_report):
    lines = small_report.to_csv().splitlines()
    assert lines[0] == "method,dataset,embedding,mean_auc,std_auc,runs"
    assert len(lines) == 5
    text = small_report.to_text()
    assert "Mean" in text and "*" in text
    assert small_report.raw_csv().count("\n") == 13


def test_adding_a_method_keeps_other_cells():
    base = ExperimentConfig(["stair4"], FAST[:1], embeddings=("continuous",), runs=2, seed=4)
    more = ExperimentConfig(["stair4"], FAST + [MethodSpec("lof", {"k": 25})],
                            embeddings=("continuous",), runs=2, seed=4)
    a = run_experiment(base).aucs("pif-tanimoto", "stair4")
    b = run_experiment(more).aucs("pif-tanimoto", "stair4")
    np.testing.assert_array_equal(a, b)


def test_single_cell_report():
    config = ExperimentConfig(["star5"], [MethodSpec("pif", {"t": 5})],
                              embeddings=("continuous",), runs=1)
    report = run_experiment(config)
    assert len(report.cells) == 1 and report.cells[0].runs == 1


def test_errors_are_recorded_per_cell():
    config = ExperimentConfig(["stair4"], [MethodSpec("lof", {"k": 5000})],
                              embeddings=("ambient",), runs=2)
    report = run_experiment(config)
    assert report.cells[0].runs == 0
    assert all("KTooLarge" in r.error for r in report.results)


def test_significance_marks():
    rng = np.random.default_rng(0)
    results = []
    for run in range(10):
        results.append(RunResult("good", "d", "continuous", 0, 0.9 + rng.normal(0, 0.01), run))
        results.append(RunResult("bad", "d", "continuous", 0, 0.6 + rng.normal(0, 0.01), run))
    report = EvalReport.from_results(results)
    assert report.significantly_best("d", "continuous") == "good"
    assert "*!" in report.to_text()
    (row,) = report.t_tests()
    assert row["significant"]


def test_sweep_cells():
    config = ExperimentConfig([], [MethodSpec("pif", {"t": 5})], embeddings=("continuous",),
                              runs=1, sweep={"bases": ["stair3"], "ratios": [0.1, 0.5]})
    report = run_experiment(config)
    lines = report.sweep_csv().splitlines()
    assert lines[0] == "base,ratio,method,embedding,mean_auc"
    assert [l.split(",")[:2] for l in lines[1:]] == [["stair3", "0.1"], ["stair3", "0.5"]]


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(["stair4"], FAST, runs=0)
    with pytest.raises(ValueError):
        ExperimentConfig(["stair4"], FAST, embeddings=("spectral",))
