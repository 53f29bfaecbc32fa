"""
Permutation prefixes, the online block-number counter, the type R check and
the sandwich inequality check.

The image set of a prefix sigma(0..t-1) is kept as a canonical cover of
disjoint, non-adjacent integer intervals in a `SortedDict` (start -> end), so
each push is O(log #intervals) and the block number is the number of
intervals.
"""

import bisect
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import (TYPE_CHECKING, Any, Callable, Dict, Iterable, List,
                    Optional, Sequence, Tuple)

from sortedcontainers import SortedDict

from block_model import BlockDecomposition, BlockKind
from errors import DuplicateIndexError, TypeRViolationError
from series_core import (ArithmeticMode, SeriesSpec, TermValue, eval_term,
                         format_scalar, is_positive)

if TYPE_CHECKING:
    from rearranger import RearrangementTrace

logger = logging.getLogger(__name__)


class PermutationPrefix:
    """
    Injective finite sequence sigma(0), ..., sigma(t-1) with its block number
    sequence.

    Mutated in place by `push`; callers needing an independent value take a
    `copy()`. Concurrent mutation is not supported.
    """

    def __init__(self):
        self.images: List[int] = []
        self.block_number_sequence: List[int] = []
        self.max_block_number = 0
        self._intervals = SortedDict()

    @classmethod
    def from_indices(cls, indices: Iterable[int], one_based: bool = False) -> "PermutationPrefix":
        prefix = cls()
        shift = 1 if one_based else 0
        for idx in indices:
            prefix.push(idx - shift)
        return prefix

    def __len__(self) -> int:
        return len(self.images)

    def __contains__(self, idx: int) -> bool:
        return self._locate(idx)[2]

    @property
    def merged_intervals(self) -> List[Tuple[int, int]]:
        return list(self._intervals.items())

    @property
    def block_count(self) -> int:
        return len(self._intervals)

    def copy(self) -> "PermutationPrefix":
        other = PermutationPrefix()
        other.images = list(self.images)
        other.block_number_sequence = list(self.block_number_sequence)
        other.max_block_number = self.max_block_number
        other._intervals = SortedDict(self._intervals)
        return other

    def _locate(self, idx: int) -> Tuple[Optional[int], Optional[int], bool]:
        """Return (start of the interval ending at idx-1, start of the interval at idx+1, idx covered)."""
        intervals = self._intervals
        pos = intervals.bisect_right(idx)
        left = None
        if pos > 0:
            start, end = intervals.peekitem(pos - 1)
            if end >= idx:
                return None, None, True
            if end == idx - 1:
                left = start
        right = idx + 1 if idx + 1 in intervals else None
        return left, right, False

    def _check_new(self, idx: int) -> Tuple[Optional[int], Optional[int]]:
        if not isinstance(idx, int) or idx < 0:
            raise ValueError(f"permutation images must be non-negative integers, got {idx!r}")
        left, right, covered = self._locate(idx)
        if covered:
            raise DuplicateIndexError(idx)
        return left, right

    def block_count_delta(self, idx: int) -> int:
        """Change in block count that pushing idx would cause: +1, 0 or -1."""
        left, right = self._check_new(idx)
        return 1 - (left is not None) - (right is not None)

    def push(self, idx: int) -> "PermutationPrefix":
        """Append idx, merging it into the interval cover."""
        left, right = self._check_new(idx)
        intervals = self._intervals
        if left is not None and right is not None:
            intervals[left] = intervals.pop(right)
        elif left is not None:
            intervals[left] = idx
        elif right is not None:
            intervals[idx] = intervals.pop(right)
        else:
            intervals[idx] = idx

        count = len(intervals)
        self.images.append(idx)
        self.block_number_sequence.append(count)
        if count > self.max_block_number:
            self.max_block_number = count
        return self

    def block_number_rows(self) -> List[Dict[str, str]]:
        return [
            {"step": str(t), "chosen_index": str(idx), "block_count": str(count)}
            for t, (idx, count) in enumerate(zip(self.images, self.block_number_sequence))
        ]


def push_index(prefix: PermutationPrefix, idx: int) -> PermutationPrefix:
    """Append idx to the prefix and record the new block count."""
    return prefix.push(idx)


def block_count_delta(prefix: PermutationPrefix, idx: int) -> int:
    """Predict the block count change of pushing idx without mutating."""
    return prefix.block_count_delta(idx)


# Type R

@dataclass(frozen=True)
class TypeRCheck:
    """Outcome of a type R check; `witness` holds the first violating position pair."""
    ok: bool
    witness: Optional[Tuple[int, int]] = None
    indices: Optional[Tuple[int, int]] = None

    def __bool__(self) -> bool:
        return self.ok

    def raise_if_violated(self) -> None:
        if not self.ok:
            raise TypeRViolationError(self.witness, self.indices)


def find_type_r_violation(indices: Sequence[int], positive: Callable[[int], bool]) -> TypeRCheck:
    """
    Find the first position pair (i, j), i < j, of same-class indices with
    sigma(i) > sigma(j). Pairs are ordered by j, then by i.
    """
    seen: Dict[bool, Tuple[List[int], List[int]]] = {True: ([], []), False: ([], [])}
    for j, idx in enumerate(indices):
        values, positions = seen[positive(idx)]
        if values and idx < values[-1]:
            k = bisect.bisect_right(values, idx)
            i = positions[k]
            return TypeRCheck(False, (i, j), (values[k], idx))
        values.append(idx)
        positions.append(j)
    return TypeRCheck(True)


def is_type_r(prefix: PermutationPrefix, spec: SeriesSpec) -> TypeRCheck:
    """True iff same-class terms are selected in their original order."""
    check = find_type_r_violation(prefix.images, lambda idx: is_positive(eval_term(spec, idx)))
    if not check.ok:
        logger.info(f"Type R violated at positions {check.witness} (indices {check.indices})")
    return check


# Sandwich inequality

class SandwichOutcome(Enum):
    PASS = "pass"
    FAIL = "fail"
    UNVERIFIABLE = "unverifiable"


@dataclass(frozen=True)
class SandwichRow:
    """Check of one negative block N_i consumed by the trace."""
    block: int
    block_end: int
    step: int
    lower: TermValue
    value: TermValue
    upper: Optional[TermValue]
    outcome: SandwichOutcome
    # S_{q_{i-C}} + S_{[N_{i-C+1},N_i]} and S_{m_i} + S_{[P_i,P_{i+C-1}]}; only for series opening negative
    block_form_lower: Optional[TermValue] = None
    block_form_upper: Optional[TermValue] = None

    def to_row(self) -> Dict[str, str]:
        def show(value: Optional[TermValue]) -> str:
            return "" if value is None else format_scalar(value)

        return {
            "block": f"N_{self.block}",
            "block_end": str(self.block_end),
            "step": str(self.step),
            "lower": show(self.lower),
            "value": show(self.value),
            "upper": show(self.upper),
            "block_form_lower": show(self.block_form_lower),
            "block_form_upper": show(self.block_form_upper),
            "outcome": self.outcome.value,
        }


@dataclass
class SandwichReport:
    """Per-block outcomes of the sandwich check at block number C."""
    C: int
    rows: List[SandwichRow] = field(default_factory=list)

    def count(self, outcome: SandwichOutcome) -> int:
        return sum(1 for row in self.rows if row.outcome is outcome)

    @property
    def failures(self) -> List[SandwichRow]:
        return [row for row in self.rows if row.outcome is SandwichOutcome.FAIL]

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> Dict[str, Any]:
        return {
            "C": self.C,
            "checked_blocks": len(self.rows),
            "pass": self.count(SandwichOutcome.PASS),
            "fail": self.count(SandwichOutcome.FAIL),
            "unverifiable": self.count(SandwichOutcome.UNVERIFIABLE),
            "passed": self.passed,
        }


def _block_form_lower(decomp: BlockDecomposition, i: int, C: int) -> TermValue:
    if i - C < 1:
        # S_{q_0} is the empty sum
        return decomp.block_sum(BlockKind.N, 1, i)
    return decomp.partial_sum_at(BlockKind.P, i - C) + decomp.block_sum(BlockKind.N, i - C + 1, i)


def verify_sandwich(trace: "RearrangementTrace", decomp: BlockDecomposition, C: int,
                    tolerance: float = 1e-12) -> SandwichReport:
    """
    Check S_{[N_1,N_i]} + S_{[P_1,P_{i-C}]} <= S^sigma_{m_i} <= S_{[N_1,N_i]} + S_{[P_1,P_{i+C-1}]}
    for every complete negative block N_i whose last index m_i the trace consumed.

    S^sigma_{m_i} is the trace's partial sum at the step choosing m_i. Ranges
    whose upper index is below 1 contribute 0; blocks needing P blocks past
    the decomposition are reported unverifiable. `tolerance` is used in float
    mode only.
    """
    if C < 1:
        raise ValueError(f"block number C must be >= 1, got {C}")
    trace.type_r_check().raise_if_violated()
    if trace.indices and max(trace.indices) >= decomp.horizon:
        raise ValueError(f"decomposition horizon {decomp.horizon} does not cover trace index "
                         f"{max(trace.indices)}")

    position = {idx: t for t, idx in enumerate(trace.indices)}
    exact = decomp.arithmetic is ArithmeticMode.EXACT
    complete_p = decomp.complete_count(BlockKind.P)
    opens_negative = decomp.opens_negative
    report = SandwichReport(C)

    for block in decomp.complete_blocks(BlockKind.N):
        step = position.get(block.end)
        if step is None:
            continue
        i = block.index
        value = trace.partial_sums[step]
        negatives = decomp.block_sum(BlockKind.N, 1, i)
        lower = negatives + decomp.block_sum_or_zero(BlockKind.P, 1, i - C)
        if i + C - 1 > complete_p:
            report.rows.append(SandwichRow(i, block.end, step, lower, value, None,
                                           SandwichOutcome.UNVERIFIABLE))
            continue
        upper = negatives + decomp.block_sum_or_zero(BlockKind.P, 1, i + C - 1)
        if exact:
            ok = lower <= value <= upper
        else:
            slack = tolerance * max(1.0, abs(value))
            ok = lower - slack <= value <= upper + slack
        outcome = SandwichOutcome.PASS if ok else SandwichOutcome.FAIL
        if not ok:
            logger.warning(f"Sandwich failed at N_{i}: {format_scalar(lower)} <= "
                           f"{format_scalar(value)} <= {format_scalar(upper)} does not hold")
        form_lower = form_upper = None
        if opens_negative:
            form_lower = _block_form_lower(decomp, i, C)
            form_upper = (decomp.partial_sum_at(BlockKind.N, i)
                          + decomp.block_sum(BlockKind.P, i, i + C - 1))
        report.rows.append(SandwichRow(i, block.end, step, lower, value, upper, outcome,
                                       form_lower, form_upper))

    logger.info(f"Sandwich check with C={C}: {report.count(SandwichOutcome.PASS)} pass, "
                f"{report.count(SandwichOutcome.FAIL)} fail, "
                f"{report.count(SandwichOutcome.UNVERIFIABLE)} unverifiable")
    return report
