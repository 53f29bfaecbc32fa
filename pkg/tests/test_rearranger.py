import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from block_model import decompose_blocks
from config import RearrangeConfig
from conftest import naive_greedy
from errors import ArithmeticOverflowError, HorizonCapExceededError
from permutation_engine import is_type_r, verify_sandwich
from rearranger import (assess_fixing_evidence, block_growth_profile,
                        convergence_report, greedy_rearrange, run_targets,
                        run_targets_async, summarize_trace,
                        trace_from_indices)
from series_core import (ArithmeticMode, generate_prefix,
                         make_explicit_prefix)


def test_explicit_example(small_explicit):
    trace = greedy_rearrange(small_explicit, 0, 5)
    assert trace.indices == [1, 0, 2, 4, 3]
    assert trace.partial_sums == [2, 2, 1, -2, -1]
    assert not trace.truncated
    assert trace.rule_violation() is None


def test_explicit_example_runs_out_of_positives(small_explicit):
    trace = greedy_rearrange(small_explicit, 0, 6)
    assert len(trace) == 5
    assert trace.truncated
    assert trace.next_positive is None
    assert trace.frontier[0] is None


def test_steps_precondition(square):
    with pytest.raises(ValueError):
        greedy_rearrange(square, 0, 0)


def test_matches_linear_search_on_square_blocks(square):
    terms = generate_prefix(square, 5000)
    for r in (0, F(1, 2), 1, F(-1, 3)):
        trace = greedy_rearrange(square, r, 1000)
        assert trace.indices == naive_greedy(terms, r, 1000)


@given(st.lists(st.fractions(min_value=-3, max_value=3, max_denominator=8), min_size=1, max_size=30),
       st.fractions(min_value=-2, max_value=2, max_denominator=6))
@settings(max_examples=200, deadline=None)
def test_matches_linear_search_on_explicit_series(values, r):
    spec = make_explicit_prefix(values, leading_zero=False)
    steps = len(values) + 5
    trace = greedy_rearrange(spec, r, steps)
    expected = naive_greedy(list(values) + [F(0)] * steps, r, steps)
    assert trace.indices == expected
    assert trace.truncated == (len(expected) < steps)


@pytest.mark.parametrize("r", [0, "1/2", 1, "-7/3", "2.5"])
def test_greedy_traces_are_type_r_and_follow_the_rule(escalating, r):
    trace = greedy_rearrange(escalating, r, 800)
    assert trace.type_r_check().ok
    assert trace.rule_violation() is None
    assert trace.block_number_sequence == trace.prefix().block_number_sequence
    # each class is consumed in increasing index order
    for positive in (True, False):
        chosen = [i for i, v in zip(trace.indices, trace.terms) if (v > 0) == positive]
        assert chosen == sorted(chosen)


@pytest.mark.parametrize("series, steps", [("square", 500), ("escalating", 300)])
def test_random_targets_satisfy_type_r_and_sandwich(request, series, steps):
    spec = request.getfixturevalue(series)
    rng = random.Random(series)
    checked_rows = 0
    for _ in range(50):
        r = F(rng.randint(-500, 500), 100)
        trace = greedy_rearrange(spec, r, steps)
        assert len(trace) == steps
        assert trace.rule_violation() is None
        assert is_type_r(trace.prefix(), spec)
        decomp = decompose_blocks(spec, 2 * (max(trace.indices) + 1))
        report = verify_sandwich(trace, decomp, trace.max_block_number)
        assert report.passed, f"sandwich failed for r={r}"
        checked_rows += len(report.rows)
    assert checked_rows > 0


def test_rule_violation_reported(square):
    trace = trace_from_indices(square, 0, [1, 0])
    assert trace.rule_violation() == 0
    assert trace.type_r_check().ok


def test_trace_from_indices_recomputes_values(square):
    greedy = greedy_rearrange(square, "1/2", 300)
    rebuilt = trace_from_indices(square, "1/2", greedy.indices)
    assert rebuilt.partial_sums == greedy.partial_sums
    assert rebuilt.block_number_sequence == greedy.block_number_sequence
    assert rebuilt.sign_switches == greedy.sign_switches


def test_truncation_at_horizon_cap(square):
    config = RearrangeConfig(initial_horizon=64, horizon_cap=256)
    trace = greedy_rearrange(square, 10 ** 6, 1000, config)
    assert trace.truncated
    assert len(trace) < 1000
    assert trace.horizon == 256
    assert all(v > 0 for v in trace.terms)
    with pytest.raises(HorizonCapExceededError):
        greedy_rearrange(square, 10 ** 6, 1000, config, raise_on_truncation=True)


def test_float_overflow_raises():
    spec = make_explicit_prefix(["1e308", "1e308"], leading_zero=False,
                                arithmetic=ArithmeticMode.FLOAT)
    with pytest.raises(ArithmeticOverflowError):
        greedy_rearrange(spec, "1.7e308", 2)


def test_square_blocks_toward_zero_stays_bounded(square):
    trace = greedy_rearrange(square, 0, 10 ** 4)
    assert trace.max_block_number <= 2
    assert assess_fixing_evidence(trace)


def test_square_blocks_toward_one_grows(square_float):
    trace = greedy_rearrange(square_float, 1, 5000)
    profile = block_growth_profile(trace, [100, 1000, 5000])
    values = [m for _, m in profile]
    assert values == sorted(values)
    assert values[0] < values[-1]
    assert values[-1] > 10


@pytest.mark.slow
def test_escalating_toward_three_converges(escalating_float):
    trace = greedy_rearrange(escalating_float, 3, 10 ** 5)
    report = convergence_report(trace)
    assert report.overshoot_bounded
    assert report.converging_evidence
    assert report.tail_bounded
    assert report.tail_max_error <= report.tail_max_term
    assert report.tail_max_term < 0.01
    for _, error in report.switch_errors[-report.tail_switches:]:
        assert error <= report.tail_max_term


class TestReports:
    def test_convergence_on_square_blocks(self, square):
        trace = greedy_rearrange(square, 0, 2000)
        report = convergence_report(trace)
        assert report.overshoot_bounded
        assert report.converging_evidence
        assert report.tail_switches == -(-len(report.switch_errors) // 4)
        for t, error in report.switch_errors:
            assert error == abs(trace.partial_sums[t - 1])
            assert error <= abs(trace.terms[t - 1])

    def test_no_switches_means_no_evidence(self):
        spec = make_explicit_prefix([1, 1, 1], leading_zero=False)
        trace = greedy_rearrange(spec, 10, 3)
        report = convergence_report(trace)
        assert report.switch_errors == []
        assert not report.tail_bounded
        assert not report.converging_evidence
        assert not assess_fixing_evidence(trace, report)

    def test_profile_preconditions(self, square):
        trace = greedy_rearrange(square, 0, 50)
        assert block_growth_profile(trace, [1, 50]) == [(1, 1), (50, trace.max_block_number)]
        with pytest.raises(ValueError):
            block_growth_profile(trace, [10, 5])
        with pytest.raises(ValueError):
            block_growth_profile(trace, [0])
        with pytest.raises(ValueError):
            block_growth_profile(trace, [51])

    def test_summary(self, square):
        trace = greedy_rearrange(square, "1/2", 300)
        summary = summarize_trace(trace, [10, 100, 10 ** 6])
        assert summary["target"] == "1/2"
        assert summary["steps"] == 300
        assert [c for c, _ in summary["growth_profile"]] == [10, 100, 300]
        assert (summary["frontier"]["positive"], summary["frontier"]["negative"]) == trace.frontier
        assert summary["convergence"]["switch_count"] == len(trace.sign_switches)
        assert summary["fixing_evidence"] in (True, False)

    def test_rows(self, small_explicit):
        rows = greedy_rearrange(small_explicit, 0, 5).to_rows()
        assert rows[0] == {"step": "0", "chosen_index": "1", "term": "2",
                           "partial_sum": "2", "block_count": "1"}
        assert rows[-1]["block_count"] == "1"


def test_run_targets_keeps_order(square):
    targets = [0, "1/2", 1, "-1/4"]
    traces = run_targets(square, targets, 200, max_concurrent=2)
    assert [t.target for t in traces] == [F(0), F(1, 2), F(1), F(-1, 4)]
    for trace in traces:
        assert trace.rule_violation() is None
        assert trace.indices == greedy_rearrange(square, trace.target, 200).indices


@pytest.mark.asyncio
async def test_run_targets_async_propagates_failures(square):
    traces = await run_targets_async(square, [0, 1], 50)
    assert [len(t) for t in traces] == [50, 50]
    with pytest.raises(ValueError):
        await run_targets_async(square, [0, "not a number"], 50)
