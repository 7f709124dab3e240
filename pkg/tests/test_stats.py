"""Statistics: oracle fixtures, decision tree, summaries, speedups."""

import json
import math
import pathlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mandelbench import stats
from mandelbench.stats import (Method, SampleSummary, TooFewPointsError,
                               ZeroVarianceError, compare_samples, levene,
                               mood_median, shapiro_wilk, speedup_triple,
                               student_t, summarize, welch_t,
                               wilcoxon_mann_whitney)

FIXTURES = json.loads(
    (pathlib.Path(__file__).parent / "fixtures" / "stat_fixtures.json")
    .read_text())
PAIRS = FIXTURES["pairs"]
PAIR_IDS = [p["name"] for p in PAIRS]

SW_TOL = 1e-4
P_TOL = 1e-6


# -- frozen reference oracle ---------------------------------------------

@pytest.mark.parametrize("pair", PAIRS, ids=PAIR_IDS)
def test_shapiro_wilk_matches_reference(pair):
    for sample, key in ((pair["a"], "shapiro_a"), (pair["b"], "shapiro_b")):
        w, p = shapiro_wilk(sample)
        assert w == pytest.approx(pair["oracle"][key][0], abs=SW_TOL)
        assert p == pytest.approx(pair["oracle"][key][1], abs=SW_TOL)


@pytest.mark.parametrize("pair", PAIRS, ids=PAIR_IDS)
def test_test_pvalues_match_reference(pair):
    a, b, oracle = pair["a"], pair["b"], pair["oracle"]
    assert levene(a, b)[1] == pytest.approx(oracle["levene_p"], abs=P_TOL)
    assert student_t(a, b)[1] == pytest.approx(oracle["student_p"], abs=P_TOL)
    assert welch_t(a, b)[1] == pytest.approx(oracle["welch_p"], abs=P_TOL)
    assert wilcoxon_mann_whitney(a, b)[1] == pytest.approx(oracle["wmw_p"],
                                                           abs=P_TOL)
    assert mood_median(a, b)[1] == pytest.approx(oracle["mood_p"], abs=P_TOL)


@pytest.mark.parametrize("pair", PAIRS, ids=PAIR_IDS)
def test_decision_tree_classification(pair):
    result = compare_samples(pair["a"], pair["b"])
    assert result.method.letter == pair["expected_method"]


# -- input validation ------------------------------------------------------

def test_shapiro_wilk_errors():
    with pytest.raises(TooFewPointsError):
        shapiro_wilk([1.0, 2.0])
    with pytest.raises(ZeroVarianceError):
        shapiro_wilk([3.25] * 50)


def test_levene_degenerate_error():
    with pytest.raises(ZeroVarianceError):
        levene([5.0, 5.0, 5.0], [7.0, 7.0, 7.0])


def test_rejects_non_finite():
    with pytest.raises(ValueError):
        shapiro_wilk([1.0, float("nan"), 2.0, 3.0])


# -- behavior on trivial inputs --------------------------------------------

def test_identical_samples_compare_equal():
    rng = np.random.default_rng(3)
    a = rng.normal(50, 5, 40)
    result = compare_samples(a, a.copy())
    assert result.method is Method.STUDENT_T
    assert result.statistic == 0.0
    assert result.p_value == 1.0
    assert not result.significant


def test_levene_identical_nondegenerate_lists():
    a = [1.0, 2.0, 3.0, 4.0, 7.0]
    stat, p = levene(a, list(a))
    assert stat == 0.0
    assert p == 1.0


def test_levene_detects_variance_ratio():
    rng = np.random.default_rng(11)
    a = rng.normal(0, 1, 50)
    b = rng.normal(0, 10, 50)
    assert levene(a, b)[1] < 0.05


def test_constant_samples_route_to_rank_branch():
    # constants fail normality screening, hit the shape gate with d=0
    result = compare_samples([4.0] * 10, [4.0] * 12)
    assert result.method is Method.WILCOXON_MANN_WHITNEY
    assert result.p_value == 1.0


def test_clear_location_shift_is_significant():
    rng = np.random.default_rng(5)
    a = rng.normal(0.0, 1.0, 50)
    b = rng.normal(1.0, 1.0, 50)
    result = compare_samples(a, b)
    assert result.method is Method.STUDENT_T
    assert result.significant


def test_exact_wmw_backend_small_samples():
    # n < 20 without ties: the exact count distribution is used; compare
    # against a value computed from the full combinatorial table
    a = [1.0, 3.0, 5.0, 7.0]
    b = [2.0, 4.0, 6.0, 8.0]
    _, p = wilcoxon_mann_whitney(a, b)
    assert 0.0 < p <= 1.0
    # swapping arguments cannot change the two-sided p
    assert p == wilcoxon_mann_whitney(b, a)[1]


# -- distributional invariants as properties ---------------------------------

normalish = st.lists(st.floats(1.0, 1000.0), min_size=5, max_size=60)


@given(normalish, normalish)
@settings(max_examples=60, deadline=None)
def test_symmetry_and_totality(a, b):
    try:
        r1 = compare_samples(a, b)
        r2 = compare_samples(b, a)
    except ZeroVarianceError:
        return  # degenerate Levene branch; propagation is the contract
    assert r1.method is r2.method
    assert r1.p_value == pytest.approx(r2.p_value, abs=1e-9)
    assert 0.0 <= r1.p_value <= 1.0
    assert r1.significant == (r1.p_value < 0.05)
    assert r1.method in set(Method)


@given(normalish, normalish, st.floats(1e-3, 1e3))
@settings(max_examples=60, deadline=None)
def test_scale_invariance(a, b, scale):
    try:
        base = compare_samples(a, b)
        scaled = compare_samples([x * scale for x in a],
                                 [x * scale for x in b])
    except ZeroVarianceError:
        return
    assert base.method is scaled.method
    assert base.p_value == pytest.approx(scaled.p_value, abs=1e-9)


@pytest.mark.parametrize("fn", [levene, student_t, welch_t,
                                wilcoxon_mann_whitney, mood_median])
def test_all_tests_emit_probabilities(fn):
    rng = np.random.default_rng(17)
    for _ in range(5):
        a = rng.gamma(3.0, 2.0, 25)
        b = rng.gamma(3.0, 2.5, 30)
        _, p = fn(a, b)
        assert 0.0 <= p <= 1.0


# -- summaries ---------------------------------------------------------------

def test_summary_normal_sample_gets_t_interval():
    rng = np.random.default_rng(23)
    x = rng.normal(100.0, 5.0, 50)
    s = summarize(x)
    assert s.normal
    assert s.center == pytest.approx(float(np.mean(x)), abs=1e-12)
    lo, hi = s.ci95
    assert lo < s.center < hi
    # reference interval: mean +- t(0.975, 49) * sd/sqrt(n)
    half = 2.009575234489209 * np.std(x, ddof=1) / math.sqrt(50)
    assert lo == pytest.approx(s.center - half, abs=1e-6)
    assert hi == pytest.approx(s.center + half, abs=1e-6)


def test_summary_skewed_sample_gets_median_no_interval():
    rng = np.random.default_rng(29)
    x = rng.lognormal(0.0, 1.5, 50)
    s = summarize(x)
    assert not s.normal
    assert s.ci95 is None
    assert s.center == pytest.approx(float(np.median(x)), abs=1e-12)


def test_summary_constant_sample_short_circuits_to_median():
    s = summarize([7.5] * 50)
    assert not s.normal
    assert s.ci95 is None
    assert s.center == 7.5


def test_summary_too_few_points():
    with pytest.raises(TooFewPointsError):
        summarize([1.0, 2.0])


# -- speedups -----------------------------------------------------------------

def summary_of(center):
    return SampleSummary(n=50, center=center, ci95=None, normal=False)


def test_speedup_triple_arithmetic():
    t = speedup_triple(summary_of(25.0), summary_of(100.0),
                       summary_of(50.0), summary_of(100.0))
    assert (t.vs_baseline_same_config,
            t.vs_same_method_one_thread,
            t.vs_single_thread_baseline) == (4.0, 2.0, 4.0)


def test_speedup_triple_identity():
    s = summary_of(33.0)
    t = speedup_triple(s, s, s, s)
    assert (t.vs_baseline_same_config,
            t.vs_same_method_one_thread,
            t.vs_single_thread_baseline) == (1.0, 1.0, 1.0)


def test_speedup_triple_rejects_nonpositive_center():
    with pytest.raises(ValueError):
        speedup_triple(summary_of(0.0), summary_of(1.0), summary_of(1.0),
                       summary_of(1.0))
