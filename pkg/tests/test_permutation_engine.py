import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from block_model import decompose_blocks
from conftest import naive_block_count
from errors import DuplicateIndexError, TypeRViolationError
from permutation_engine import (PermutationPrefix, SandwichOutcome,
                                block_count_delta, find_type_r_violation,
                                is_type_r, push_index, verify_sandwich)
from rearranger import greedy_rearrange, trace_from_indices
from series_core import make_custom_blocks, make_explicit_prefix


def test_worked_example_one_based():
    prefix = PermutationPrefix.from_indices([1, 3, 4, 2], one_based=True)
    assert prefix.images == [0, 2, 3, 1]
    assert prefix.block_number_sequence == [1, 2, 2, 1]
    assert prefix.max_block_number == 2
    assert prefix.merged_intervals == [(0, 3)]


def test_even_indices_are_all_separate():
    prefix = PermutationPrefix.from_indices([0, 2, 4, 6])
    assert prefix.block_number_sequence == [1, 2, 3, 4]
    assert prefix.merged_intervals == [(0, 0), (2, 2), (4, 4), (6, 6)]


def test_identity_prefix_stays_one_block():
    prefix = PermutationPrefix.from_indices(range(100))
    assert set(prefix.block_number_sequence) == {1}


def test_bridging_push_merges_intervals():
    prefix = PermutationPrefix.from_indices([0, 1, 5, 6, 3])
    assert prefix.merged_intervals == [(0, 1), (3, 3), (5, 6)]
    assert block_count_delta(prefix, 2) == -1
    assert block_count_delta(prefix, 4) == -1
    assert block_count_delta(prefix, 9) == 1
    push_index(prefix, 2)
    assert block_count_delta(prefix, 4) == -1
    push_index(prefix, 4)
    assert prefix.merged_intervals == [(0, 6)]
    assert prefix.block_number_sequence == [1, 1, 2, 2, 3, 2, 1]
    assert prefix.max_block_number == 3


def test_delta_does_not_mutate():
    prefix = PermutationPrefix.from_indices([0, 2])
    block_count_delta(prefix, 1)
    assert len(prefix) == 2
    assert 1 not in prefix
    assert prefix.block_count == 2


def test_duplicate_and_negative_indices():
    prefix = PermutationPrefix.from_indices([3, 4, 5])
    with pytest.raises(DuplicateIndexError):
        prefix.push(4)
    with pytest.raises(DuplicateIndexError):
        block_count_delta(prefix, 5)
    with pytest.raises(ValueError):
        prefix.push(-1)
    # a failed push leaves the prefix unchanged
    assert prefix.images == [3, 4, 5]


def test_copy_is_independent():
    prefix = PermutationPrefix.from_indices([0, 2])
    other = prefix.copy()
    other.push(1)
    assert prefix.block_count == 2
    assert other.block_count == 1


def test_online_count_matches_recount_on_long_random_sequences():
    rng = random.Random(20240601)
    for _ in range(100):
        indices = rng.sample(range(30000), 10 ** 4)
        prefix = PermutationPrefix.from_indices(indices)
        # recount from membership of the neighbours at every step
        seen, count = set(), 0
        for t, idx in enumerate(indices):
            count += 1 - ((idx - 1) in seen) - ((idx + 1) in seen)
            seen.add(idx)
            assert prefix.block_number_sequence[t] == count
        assert count == naive_block_count(seen)
        assert prefix.max_block_number == max(prefix.block_number_sequence)


def test_final_count_does_not_depend_on_order():
    rng = random.Random(7)
    images = rng.sample(range(500), 200)
    expected = PermutationPrefix.from_indices(images).block_count
    assert expected == naive_block_count(set(images))
    for _ in range(20):
        rng.shuffle(images)
        prefix = PermutationPrefix.from_indices(images)
        assert prefix.block_count == expected
        assert prefix.merged_intervals == PermutationPrefix.from_indices(sorted(images)).merged_intervals


@given(st.lists(st.integers(min_value=0, max_value=80), unique=True, max_size=80))
@settings(max_examples=300)
def test_online_count_matches_recount_every_step(indices):
    prefix = PermutationPrefix()
    seen = set()
    for idx in indices:
        expected_delta = naive_block_count(seen | {idx}) - naive_block_count(seen)
        assert prefix.block_count_delta(idx) == expected_delta
        prefix.push(idx)
        seen.add(idx)
        assert prefix.block_count == naive_block_count(seen)
    intervals = prefix.merged_intervals
    assert all(b[0] > a[1] + 1 for a, b in zip(intervals, intervals[1:]))
    assert sum(end - start + 1 for start, end in intervals) == len(indices)


class TestTypeR:
    def test_first_violation(self):
        positive = lambda idx: True
        check = find_type_r_violation([1, 4, 6, 2], positive)
        assert not check.ok
        assert check.witness == (1, 3)
        assert check.indices == (4, 2)

    def test_classes_are_independent(self):
        spec = make_explicit_prefix([1, -1, 1, -1], leading_zero=False)
        assert is_type_r(PermutationPrefix.from_indices([0, 1, 2, 3]), spec)
        assert is_type_r(PermutationPrefix.from_indices([2, 1]), spec)
        assert is_type_r(PermutationPrefix.from_indices([1, 0, 3, 2]), spec)

    def test_positive_out_of_order(self):
        spec = make_explicit_prefix([1, -1, 1], leading_zero=False)
        check = is_type_r(PermutationPrefix.from_indices([2, 0]), spec)
        assert check.ok is False
        assert check.witness == (0, 1)

    def test_raise_if_violated(self):
        spec = make_explicit_prefix([1, 1], leading_zero=False)
        check = is_type_r(PermutationPrefix.from_indices([1, 0]), spec)
        with pytest.raises(TypeRViolationError) as info:
            check.raise_if_violated()
        assert info.value.witness == (0, 1)

    @given(st.lists(st.integers(min_value=0, max_value=40), unique=True, max_size=25),
           st.lists(st.booleans(), min_size=41, max_size=41))
    @settings(max_examples=300)
    def test_matches_pairwise_definition(self, indices, classes):
        positive = classes.__getitem__
        pairs = [(i, j) for i, j in itertools.combinations(range(len(indices)), 2)
                 if positive(indices[i]) == positive(indices[j]) and indices[i] > indices[j]]
        check = find_type_r_violation(indices, positive)
        assert check.ok == (not pairs)
        if pairs:
            assert check.witness == min(pairs, key=lambda p: (p[1], p[0]))


class TestSandwich:
    def test_greedy_square_trace_passes(self, square):
        trace = greedy_rearrange(square, 0, 2000)
        decomp = decompose_blocks(square, 2 * (max(trace.indices) + 1))
        report = verify_sandwich(trace, decomp, trace.max_block_number)
        assert report.passed
        assert report.count(SandwichOutcome.PASS) > 0

    def test_greedy_trace_toward_one_passes(self, square):
        trace = greedy_rearrange(square, 1, 1500)
        decomp = decompose_blocks(square, 2 * (max(trace.indices) + 1))
        report = verify_sandwich(trace, decomp, trace.max_block_number)
        assert report.passed
        assert report.to_dict()["fail"] == 0

    def test_negative_opening_block_form_matches(self):
        spec = make_custom_blocks([[-1], [1]])
        assert not spec.leading_zero
        trace = greedy_rearrange(spec, "1/3", 400)
        decomp = decompose_blocks(spec, 2 * (max(trace.indices) + 1))
        assert decomp.opens_negative
        report = verify_sandwich(trace, decomp, trace.max_block_number)
        assert report.passed
        checked = [row for row in report.rows if row.upper is not None]
        assert checked
        for row in checked:
            assert row.block_form_lower == row.lower
            assert row.block_form_upper == row.upper

    def test_unverifiable_rows_when_positive_blocks_run_out(self, square):
        trace = greedy_rearrange(square, 0, 200)
        decomp = decompose_blocks(square, max(trace.indices) + 1)
        report = verify_sandwich(trace, decomp, trace.max_block_number + 3)
        assert report.count(SandwichOutcome.UNVERIFIABLE) >= 1
        assert report.passed

    def test_rejects_zero_block_bound(self, square):
        trace = greedy_rearrange(square, 0, 20)
        decomp = decompose_blocks(square, 100)
        with pytest.raises(ValueError):
            verify_sandwich(trace, decomp, 0)

    def test_rejects_uncovered_trace(self, square):
        trace = greedy_rearrange(square, 0, 200)
        decomp = decompose_blocks(square, 10)
        with pytest.raises(ValueError, match="does not cover"):
            verify_sandwich(trace, decomp, 2)

    def test_rejects_non_type_r_trace(self, square):
        trace = trace_from_indices(square, 0, [2, 0, 1])
        decomp = decompose_blocks(square, 50)
        with pytest.raises(TypeRViolationError):
            verify_sandwich(trace, decomp, 2)

    def test_row_export(self, square):
        trace = greedy_rearrange(square, 0, 100)
        decomp = decompose_blocks(square, 400)
        row = verify_sandwich(trace, decomp, 2).rows[0].to_row()
        assert row["block"] == "N_1"
        assert row["outcome"] == "pass"
        assert row["block_form_lower"] == ""
