"""Monte Carlo estimators and their reporting conventions."""
import math
import random

import pytest

from treecolour.estimators import (
    CONSISTENT,
    NOT_APPLICABLE,
    VIOLATED,
    BoundParams,
    estimate_branching,
    estimate_event_A,
    estimate_level_disagreements,
    estimate_list_statistics,
    estimate_tv_upper,
    gof_both_marginals,
    run_trials,
    trial_rng,
    wilson_interval,
)
from treecolour.tree_model import TreeShape


def test_trial_rng_streams_are_reproducible_and_distinct():
    assert trial_rng(3, 7).random() == trial_rng(3, 7).random()
    assert trial_rng(3, 7).random() != trial_rng(3, 8).random()
    assert trial_rng(3, 7).random() != trial_rng(4, 7).random()


def test_run_trials_is_order_stable_across_thread_counts():
    fn = lambda rng: rng.random()
    base = run_trials(fn, 37, seed=5, threads=1)
    for threads in (2, 3, 8):
        assert run_trials(fn, 37, seed=5, threads=threads) == base
    with pytest.raises(ValueError):
        run_trials(fn, 0, seed=0)


def test_wilson_interval_brackets_the_frequency():
    lo, hi = wilson_interval(3, 100)
    assert 0.0 <= lo < 3 / 100 < hi <= 1.0
    lo0, hi0 = wilson_interval(0, 50)
    assert lo0 == 0.0 and hi0 > 0.0
    with pytest.raises(ValueError):
        wilson_interval(0, 0)


def test_bound_params_exponent_forms():
    assert BoundParams(1.0, "ratio").exponent() == 0.0
    assert BoundParams(3.0, "ratio").exponent() == pytest.approx(0.5)
    assert BoundParams(2.0, "shift").exponent() == pytest.approx(0.5)
    assert BoundParams(2.0, "ratio").k_for(100) == math.ceil(
        3.0 * 100 / math.log(100))
    bp = BoundParams(3.0, "ratio")
    assert bp.level_bound(100, 2) == pytest.approx(100 ** -0.05)
    with pytest.raises(ValueError):
        BoundParams(0.0)
    with pytest.raises(ValueError):
        BoundParams(1.0, "weird")


def test_branching_naive_matches_the_two_level_rate():
    d, k = 6, 5
    report = estimate_branching(d, k, 1, 2, trials=20000, seed=1,
                                coupling="naive")
    rate = (d / (k - 1)) ** 2
    assert abs(report.mean - rate) < 4 * report.stderr
    naive_bound = next(b for b in report.bounds if "naive" in b.label)
    assert naive_bound.verdict == CONSISTENT


def test_branching_improved_sources_sum_to_the_mean():
    report = estimate_branching(5, 6, 1, 2, trials=4000, seed=2)
    assert report.extra["coupling"] == "improved"
    total = sum(report.extra["source_means"].values())
    assert total == pytest.approx(report.mean, abs=1e-9)


@pytest.mark.parametrize("d,k", [(2, 4), (3, 5), (4, 6)])
def test_level_four_mean_is_the_square_of_the_branching_mean(d, k):
    trials = 4000
    branch = estimate_branching(d, k, 1, 2, trials=trials, seed=11)
    levels = estimate_level_disagreements(
        TreeShape(d, 4), k, 1, 2, "improved", trials=trials, seed=12)
    w4 = levels[3]
    m, se_m = branch.mean, branch.stderr
    combined = math.sqrt(w4.stderr ** 2 + (2 * m * se_m) ** 2)
    assert abs(w4.mean - m * m) <= 4 * combined


def test_level_reports_cover_every_level():
    shape = TreeShape(2, 3)
    reports = estimate_level_disagreements(shape, 4, 1, 2, "improved",
                                           trials=500, seed=3)
    assert len(reports) == shape.height
    again = estimate_level_disagreements(shape, 4, 1, 2, "improved",
                                         trials=500, seed=3)
    assert [r.mean for r in again] == [r.mean for r in reports]
    with pytest.raises(ValueError):
        estimate_level_disagreements(shape, 4, 1, 2, "midway",
                                     trials=500, seed=3)


def test_list_statistics_match_their_exact_annotations():
    reports = estimate_list_statistics(4, 6, 1, 2, trials=20000, seed=4)
    for key in ("beta", "free", "delta"):
        for bound in reports[key].bounds:
            assert bound.verdict in (CONSISTENT, NOT_APPLICABLE), (key, bound)
    assert reports["h"].extra["rescuable_pairs_seen"] >= 0


def test_event_a_components_and_union():
    reports = estimate_event_A(10, 4, trials=3000, seed=5)
    assert reports["E1"].mean == 0.0
    assert reports["E2"].mean > 0.0
    top = max(reports[key].mean for key in ("E1", "E2", "E3"))
    assert reports["union"].mean >= top - 1e-12
    easy = estimate_event_A(30, 30, trials=500, seed=6)
    assert easy["E1"].mean == 0.0


def test_tv_upper_extremes():
    sure = estimate_tv_upper(TreeShape(1, 2), 2, 1, 2, "naive",
                             trials=200, seed=7)
    assert sure.mean == 1.0
    assert sure.extra["tv_exact"] == "1/1"
    none = estimate_tv_upper(TreeShape(2, 2), 5, 3, 3, "improved",
                             trials=200, seed=8)
    assert none.mean == 0.0


def test_tv_upper_dominates_the_exact_distance():
    report = estimate_tv_upper(TreeShape(2, 2), 4, 1, 2, "improved",
                               trials=20000, seed=9)
    bound = report.bounds[0]
    assert bound.value is not None
    assert report.mean + 4 * report.stderr >= bound.value
    assert bound.verdict == CONSISTENT


def test_gof_accepts_both_marginals_of_the_improved_coupling():
    results = gof_both_marginals(TreeShape(2, 1), 4, 1, 2, "improved",
                                 trials=6000, seed=10)
    assert set(results) == {"X", "Y"}
    for side in ("X", "Y"):
        assert results[side].p_value > 0.001
        assert results[side].dof >= 1
