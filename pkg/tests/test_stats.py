from __future__ import annotations

import itertools
import math
import random

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from srsa.core import METRICS
from srsa.evalkit.stats import (
    InsufficientSamples,
    ZeroVarianceBoth,
    betainc,
    mean_ci95,
    t_quantile,
    t_two_sided_p,
    welch_t,
    win_rates,
)


# -- Welch t ------------------------------------------------------------------------


def test_hand_case():
    r = welch_t([5, 4, 5, 4], [2, 3, 2, 3])
    assert abs(r.t_stat - 2 * math.sqrt(6)) <= 1e-9
    assert r.df == pytest.approx(6.0)


def test_equal_groups():
    r = welch_t([2, 3, 4], [2, 3, 4])
    assert r.t_stat == 0 and r.p_value == pytest.approx(1.0, abs=1e-12)


def test_degenerate_inputs():
    with pytest.raises(InsufficientSamples):
        welch_t([1], [1, 2])
    with pytest.raises(ZeroVarianceBoth):
        welch_t([3, 3], [4, 4])


def random_groups(rng: random.Random):
    n1, n2 = rng.randint(2, 60), rng.randint(2, 60)
    a = [rng.gauss(rng.uniform(0, 5), rng.uniform(0.1, 2)) for _ in range(n1)]
    b = [rng.gauss(rng.uniform(0, 5), rng.uniform(0.1, 2)) for _ in range(n2)]
    return a, b


def test_matches_reference_oracle():
    rng = random.Random(20240701)
    for _ in range(100):
        a, b = random_groups(rng)
        ours = welch_t(a, b)
        ref = sps.ttest_ind(a, b, equal_var=False)
        assert abs(ours.t_stat - ref.statistic) <= 1e-9
        assert abs(ours.p_value - ref.pvalue) <= 1e-9


def test_matches_oracle_on_likert_scale_data():
    rng = random.Random(7)
    for _ in range(50):
        a = [rng.randint(0, 10) / 2 for _ in range(rng.randint(3, 40))]
        b = [rng.randint(0, 10) / 2 for _ in range(rng.randint(3, 40))]
        if len(set(a)) == 1 and len(set(b)) == 1:
            continue
        ref = sps.ttest_ind(a, b, equal_var=False)
        ours = welch_t(a, b)
        assert abs(ours.t_stat - ref.statistic) <= 1e-9 and abs(ours.p_value - ref.pvalue) <= 1e-9


# half-point scores, like averaged judge marks; integer shifts and power-of-two
# scales are exact on these, so any drift would come from welch_t itself
half_points = st.lists(st.integers(0, 10).map(lambda k: k / 2), min_size=2, max_size=40)


@settings(max_examples=300, deadline=None)
@given(half_points, half_points, st.integers(-1000, 1000), st.sampled_from([0.125, 0.5, 2.0, 8.0, 64.0]))
def test_invariances(a, b, shift, scale):
    assume(len(set(a)) > 1 or len(set(b)) > 1)
    base = welch_t(a, b)
    shifted = welch_t([x + shift for x in a], [x + shift for x in b])
    scaled = welch_t([x * scale for x in a], [x * scale for x in b])
    flipped = welch_t(b, a)
    for other in (shifted, scaled):
        assert abs(other.t_stat - base.t_stat) <= 1e-12
        assert abs(other.p_value - base.p_value) <= 1e-12
    assert abs(flipped.t_stat + base.t_stat) <= 1e-12
    assert abs(flipped.p_value - base.p_value) <= 1e-12


@pytest.mark.parametrize(
    "a, b, shift, scale",
    [
        ([5, 4, 5, 4], [2, 3, 2, 3], 10.0, 2.0),
        ([1.5, 2.5, 3.0, 4.5], [2.0, 2.5, 2.0, 3.5, 4.0], -3.0, 0.5),
        ([0, 1, 2, 3, 4, 5], [1, 1, 2, 2, 3], 100.0, 4.0),
    ],
)
def test_invariances_exact_on_dyadic_data(a, b, shift, scale):
    # on dyadic rationals every transform is exact, so the 1e-12 bound applies directly
    base = welch_t(a, b)
    for other in (
        welch_t([x + shift for x in a], [x + shift for x in b]),
        welch_t([x * scale for x in a], [x * scale for x in b]),
    ):
        assert abs(other.t_stat - base.t_stat) <= 1e-12
        assert abs(other.p_value - base.p_value) <= 1e-12
    flipped = welch_t(b, a)
    assert abs(flipped.t_stat + base.t_stat) <= 1e-12 and abs(flipped.p_value - base.p_value) <= 1e-12


@given(st.floats(0, 50), st.floats(0, 50), st.floats(1, 200))
def test_p_monotone_in_abs_t(t1, t2, df):
    lo, hi = sorted((t1, t2))
    assert t_two_sided_p(hi, df) <= t_two_sided_p(lo, df) + 1e-15
    assert 0 <= t_two_sided_p(hi, df) <= 1


@pytest.mark.parametrize(
    "a, b, x, rel",
    [
        (0.5, 0.5, 0.3, 1e-12),
        (3, 7, 0.2, 1e-12),
        (50, 2.5, 0.97, 1e-12),
        # the lgamma prefactor cancels two terms near 6e3 here, costing a few ulps of 1e-12
        (1e3, 0.5, 0.999, 1e-10),
    ],
)
def test_betainc_matches_scipy(a, b, x, rel):
    from scipy.special import betainc as ref

    assert betainc(a, b, x) == pytest.approx(ref(a, b, x), rel=rel, abs=1e-15)


# -- confidence interval -------------------------------------------------------------


def test_ci_two_points():
    mean, half = mean_ci95([3, 5])
    assert mean == 4 and half == pytest.approx(12.7062, abs=1e-4)


def test_ci_zero_variance():
    assert mean_ci95([4, 4, 4, 4]) == (4, 0)


@pytest.mark.parametrize("df", [1, 2, 5, 30, 181])
def test_t_quantile_matches_scipy(df):
    assert t_quantile(0.975, df) == pytest.approx(sps.t.ppf(0.975, df), rel=1e-9)


# -- win rates ---------------------------------------------------------------------


def row(**scores):
    return {agent: {m: value for m in METRICS} for agent, value in scores.items()}


def test_strict_winner():
    table = win_rates([row(A=5, B=3, C=2), row(A=4, B=1, C=1)])
    assert table.rates["novelty"] == {"A": 1.0, "B": 0.0, "C": 0.0}


def test_two_way_tie():
    assert win_rates([row(A=5, B=5, C=3)]).rates["informativeness"] == {"A": 0.5, "B": 0.5, "C": 0.0}


def test_three_way_tie():
    table = win_rates([row(A=5, B=3, C=2), row(A=4, B=4, C=4)])
    assert table.counts["completeness"] == {"A": 2, "B": 1, "C": 1}
    assert table.rates["completeness"] == {"A": 0.5, "B": 0.25, "C": 0.25}


def test_empty_table():
    with pytest.raises(ValueError):
        win_rates([])


def random_table(rng: random.Random, agents=("SRSA", "Simple", "ReAct")):
    return [
        {a: {m: rng.randint(0, 10) / 2 for m in METRICS} for a in agents}
        for _ in range(rng.randint(1, 30))
    ]


def test_rates_form_distribution():
    rng = random.Random(1)
    for _ in range(1000):
        table = win_rates(random_table(rng))
        for m in METRICS:
            rates = table.rates[m].values()
            assert all(r >= 0 for r in rates)
            assert abs(sum(rates) - 1) <= 1e-12


def brute_force_counts(table, metric):
    # an agent wins a question when no other agent scores strictly higher
    counts = {}
    for question in table:
        for agent, scores in question.items():
            beaten = any(other[metric] > scores[metric] for name, other in question.items() if name != agent)
            counts[agent] = counts.get(agent, 0) + (0 if beaten else 1)
    return counts


def test_ties_match_brute_force_enumeration():
    # every single-question score triple on a coarse grid, then pairs of them
    grid = [0, 2.5, 5]
    singles = [dict(zip("ABC", combo)) for combo in itertools.product(grid, repeat=3)]
    for first, second in itertools.product(singles, repeat=2):
        table = [{a: {"novelty": v} for a, v in first.items()}, {a: {"novelty": v} for a, v in second.items()}]
        ours = win_rates(table, metrics=("novelty",))
        expected = brute_force_counts(table, "novelty")
        assert ours.counts["novelty"] == expected
        total = sum(expected.values())
        assert ours.rates["novelty"] == {a: c / total for a, c in expected.items()}
