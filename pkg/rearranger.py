"""
Greedy type R rearrangement toward a target r.

At every step the rule looks at the running sum S of the terms chosen so far
(S = 0 before the first choice): if S <= r it takes the first unused positive
term, otherwise the first unused non-positive term. The resulting trace keeps
the chosen indices, their values, the partial sums and the block number
sequence of the induced permutation prefix.
"""

import asyncio
import logging
import math
from dataclasses import dataclass, field
from itertools import accumulate
from typing import (Any, Dict, Iterator, List, NamedTuple, Optional, Sequence,
                    Tuple)

from config import RearrangeConfig
from errors import HorizonCapExceededError
from permutation_engine import (PermutationPrefix, TypeRCheck,
                                find_type_r_violation)
from series_core import (ArithmeticMode, SeriesSpec, TermSource, TermValue,
                         check_finite, eval_term, format_scalar, is_positive,
                         parse_scalar, zero)

logger = logging.getLogger(__name__)


class TraceStep(NamedTuple):
    position: int
    index: int
    term: TermValue
    partial_sum: TermValue


@dataclass(frozen=True)
class RearrangementTrace:
    """
    Result of a greedy run. Immutable once built and safe to share between
    threads.
    """
    spec: SeriesSpec
    target: TermValue
    indices: List[int]
    terms: List[TermValue]
    partial_sums: List[TermValue]
    block_number_sequence: List[int]
    max_block_number: int
    sign_switches: List[int]
    next_positive: Optional[int]
    next_negative: Optional[int]
    truncated: bool = False
    horizon: int = 0

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def arithmetic(self) -> ArithmeticMode:
        return self.spec.arithmetic

    @property
    def frontier(self) -> Tuple[Optional[int], Optional[int]]:
        """(next unused positive index, next unused negative index) within the materialized horizon."""
        return self.next_positive, self.next_negative

    def steps(self) -> Iterator[TraceStep]:
        for t, (idx, value, total) in enumerate(zip(self.indices, self.terms, self.partial_sums)):
            yield TraceStep(t, idx, value, total)

    def prefix(self) -> PermutationPrefix:
        return PermutationPrefix.from_indices(self.indices)

    def type_r_check(self) -> TypeRCheck:
        classes = {idx: is_positive(value) for idx, value in zip(self.indices, self.terms)}
        return find_type_r_violation(self.indices, classes.__getitem__)

    def rule_violation(self) -> Optional[int]:
        """First position whose choice disagrees with the greedy rule, or None."""
        previous = zero(self.arithmetic)
        for t, (value, total) in enumerate(zip(self.terms, self.partial_sums)):
            if is_positive(value) != (previous <= self.target):
                return t
            previous = total
        return None

    def to_rows(self) -> List[Dict[str, str]]:
        return [
            {
                "step": str(t),
                "chosen_index": str(idx),
                "term": format_scalar(value),
                "partial_sum": format_scalar(total),
                "block_count": str(count),
            }
            for t, (idx, value, total, count) in enumerate(
                zip(self.indices, self.terms, self.partial_sums, self.block_number_sequence))
        ]


def _switches(terms: Sequence[TermValue]) -> List[int]:
    return [t for t in range(1, len(terms))
            if is_positive(terms[t]) != is_positive(terms[t - 1])]


def _scan_class(source: TermSource, start: int, positive: bool, limit: int,
                chosen: Optional[set] = None) -> Optional[int]:
    """First index in [start, limit) of the given class, skipping chosen ones."""
    bound = source.pool_bound(positive)
    if bound is not None:
        limit = min(limit, bound)
    for idx in range(start, limit):
        if is_positive(source.term(idx)) == positive and (chosen is None or idx not in chosen):
            return idx
    return None


def greedy_rearrange(spec: SeriesSpec, r: Any, steps: int,
                     config: Optional[RearrangeConfig] = None,
                     raise_on_truncation: bool = False) -> RearrangementTrace:
    """
    Run the greedy rule for `steps` selections.

    The generated prefix grows by `growth_factor` whenever a pool has no
    unused index inside it. When growing would pass `horizon_cap`, or the
    series provably has no further term of the needed class, the trace is
    marked truncated and stops early (or HorizonCapExceededError is raised
    when `raise_on_truncation` is set).
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    config = config or RearrangeConfig()
    mode = spec.arithmetic
    target = parse_scalar(r, mode)
    source = spec.source

    horizon = min(config.initial_horizon, config.horizon_cap)
    source.ensure(horizon)
    bounds = {True: source.pool_bound(True), False: source.pool_bound(False)}
    pointer = {True: 0, False: 0}

    prefix = PermutationPrefix()
    indices = prefix.images
    terms: List[TermValue] = []
    partial_sums: List[TermValue] = []
    total = zero(mode)
    truncated = False

    logger.info(f"Greedy rearrangement of {spec.describe()} toward r={format_scalar(target)} "
                f"for {steps} steps")

    for t in range(steps):
        positive = total <= target
        idx = pointer[positive]
        bound = bounds[positive]
        while True:
            if bound is not None and idx >= bound:
                idx = None
                break
            if idx >= horizon:
                if horizon >= config.horizon_cap:
                    idx = None
                    break
                horizon = min(horizon * config.growth_factor, config.horizon_cap)
                logger.debug(f"Extending generation horizon to {horizon} terms at step {t}")
                source.ensure(horizon)
            if is_positive(source.term(idx)) == positive:
                break
            idx += 1

        if idx is None:
            truncated = True
            pool = "positive" if positive else "negative"
            logger.warning(f"No unused {pool} term within {horizon} terms at step {t}; "
                           f"trace truncated")
            if raise_on_truncation:
                raise HorizonCapExceededError(config.horizon_cap, positive)
            break

        pointer[positive] = idx + 1
        value = source.term(idx)
        total = check_finite(total + value)
        prefix.push(idx)
        terms.append(value)
        partial_sums.append(total)

    limit = source.materialized()
    trace = RearrangementTrace(
        spec=spec,
        target=target,
        indices=indices,
        terms=terms,
        partial_sums=partial_sums,
        block_number_sequence=prefix.block_number_sequence,
        max_block_number=prefix.max_block_number,
        sign_switches=_switches(terms),
        next_positive=_scan_class(source, pointer[True], True, limit),
        next_negative=_scan_class(source, pointer[False], False, limit),
        truncated=truncated,
        horizon=horizon,
    )
    logger.info(f"Greedy run finished after {len(trace)} steps: max block number "
                f"{trace.max_block_number}, {len(trace.sign_switches)} sign switches"
                f"{', truncated' if truncated else ''}")
    return trace


def trace_from_indices(spec: SeriesSpec, r: Any, indices: Sequence[int],
                       truncated: bool = False) -> RearrangementTrace:
    """Rebuild a trace from chosen indices, recomputing values against the series."""
    target = parse_scalar(r, spec.arithmetic)
    prefix = PermutationPrefix.from_indices(indices)
    terms = [eval_term(spec, idx) for idx in prefix.images]
    partial_sums = list(accumulate(terms, lambda a, b: check_finite(a + b)))

    source = spec.source
    chosen = set(prefix.images)
    limit = source.materialized()
    starts = {True: 0, False: 0}
    for idx, value in zip(prefix.images, terms):
        cls = is_positive(value)
        starts[cls] = max(starts[cls], idx + 1)

    return RearrangementTrace(
        spec=spec,
        target=target,
        indices=prefix.images,
        terms=terms,
        partial_sums=partial_sums,
        block_number_sequence=prefix.block_number_sequence,
        max_block_number=prefix.max_block_number,
        sign_switches=_switches(terms),
        next_positive=_scan_class(source, starts[True], True, limit, chosen),
        next_negative=_scan_class(source, starts[False], False, limit, chosen),
        truncated=truncated,
        horizon=limit,
    )


# Reports

@dataclass(frozen=True)
class ConvergenceReport:
    """
    Switch-point errors of a trace.

    A switch at position t records |S_{t-1} - r|, the distance of the sum
    that made the rule change sides. The tail is the final quarter of the
    switches (rounded up).
    """
    target: TermValue
    switch_errors: List[Tuple[int, TermValue]] = field(default_factory=list)
    overshoot_bounded: bool = True
    tail_switches: int = 0
    tail_max_error: Optional[TermValue] = None
    tail_max_term: Optional[TermValue] = None

    @property
    def converging_evidence(self) -> bool:
        return bool(self.switch_errors) and self.tail_bounded

    @property
    def tail_bounded(self) -> bool:
        if self.tail_max_error is None:
            return False
        return self.tail_max_error <= self.tail_max_term

    def to_dict(self) -> Dict[str, Any]:
        return {
            "switch_count": len(self.switch_errors),
            "tail_switch_count": self.tail_switches,
            "tail_max_error": None if self.tail_max_error is None else format_scalar(self.tail_max_error),
            "tail_max_term": None if self.tail_max_term is None else format_scalar(self.tail_max_term),
            "tail_bounded": self.tail_bounded,
            "overshoot_bounded": self.overshoot_bounded,
            "converging_evidence": self.converging_evidence,
        }


def convergence_report(trace: RearrangementTrace, tolerance: float = 1e-12) -> ConvergenceReport:
    """Per-switch errors and their final-quarter envelope."""
    if not len(trace):
        raise ValueError("cannot report on an empty trace")
    exact = trace.arithmetic is ArithmeticMode.EXACT
    r = trace.target

    errors: List[Tuple[int, TermValue]] = []
    overshoot_bounded = True
    for t in trace.sign_switches:
        error = abs(trace.partial_sums[t - 1] - r)
        errors.append((t, error))
        limit = abs(trace.terms[t - 1])
        if not exact:
            limit += tolerance * max(1.0, abs(r))
        if error > limit:
            overshoot_bounded = False
            logger.warning(f"Switch at step {t} overshoots: error {format_scalar(error)} "
                           f"exceeds |term| {format_scalar(abs(trace.terms[t - 1]))}")

    if not errors:
        logger.info("Trace has no sign switches; no convergence evidence")
        return ConvergenceReport(r, errors, overshoot_bounded)

    tail = errors[-math.ceil(len(errors) / 4):]
    first = tail[0][0] - 1
    tail_max_error = max(e for _, e in tail)
    tail_max_term = max(abs(v) for v in trace.terms[first:])
    return ConvergenceReport(r, errors, overshoot_bounded, len(tail), tail_max_error, tail_max_term)


def block_growth_profile(trace: RearrangementTrace, checkpoints: Sequence[int]) -> List[Tuple[int, int]]:
    """Running maximum of the block number after each checkpoint's number of steps."""
    checkpoints = list(checkpoints)
    if any(b < a for a, b in zip(checkpoints, checkpoints[1:])):
        raise ValueError(f"checkpoints must be sorted ascending: {checkpoints}")
    for c in checkpoints:
        if not 1 <= c <= len(trace):
            raise ValueError(f"checkpoint {c} is outside the trace of {len(trace)} steps")
    running = list(accumulate(trace.block_number_sequence, max))
    return [(c, running[c - 1]) for c in checkpoints]


def assess_fixing_evidence(trace: RearrangementTrace,
                           report: Optional[ConvergenceReport] = None) -> bool:
    """
    Finite-horizon evidence that the greedy permutation fixes the series with
    bounded block number. Evidence, not proof.
    """
    if trace.truncated or not len(trace):
        return False
    report = report or convergence_report(trace)
    if not report.converging_evidence:
        return False
    half = max(1, len(trace) // 2)
    plateau = max(trace.block_number_sequence[:half]) == trace.max_block_number
    logger.debug(f"Fixing evidence: plateau={plateau}, max block number {trace.max_block_number}")
    return plateau


def summarize_trace(trace: RearrangementTrace, checkpoints: Sequence[int] = ()) -> Dict[str, Any]:
    """Summary document for a trace: target, size, growth and switch-error statistics."""
    usable = [c for c in checkpoints if 1 <= c <= len(trace)]
    if len(trace) and len(trace) not in usable:
        usable.append(len(trace))
    report = convergence_report(trace) if len(trace) else None
    next_positive, next_negative = trace.frontier
    return {
        "target": format_scalar(trace.target),
        "steps": len(trace),
        "max_block_number": trace.max_block_number,
        "truncated": trace.truncated,
        "frontier": {"positive": next_positive, "negative": next_negative},
        "sign_switches": len(trace.sign_switches),
        "growth_profile": [[c, m] for c, m in block_growth_profile(trace, sorted(usable))],
        "convergence": report.to_dict() if report else None,
        "fixing_evidence": assess_fixing_evidence(trace, report) if report else False,
    }


async def run_targets_async(spec: SeriesSpec, targets: Sequence[Any], steps: int,
                            config: Optional[RearrangeConfig] = None,
                            max_concurrent: Optional[int] = None) -> List[RearrangementTrace]:
    """Build one trace per target on worker threads; results keep the order of `targets`."""
    semaphore = asyncio.Semaphore(max_concurrent or max(1, len(targets)))

    async def run_one(r: Any) -> RearrangementTrace:
        async with semaphore:
            return await asyncio.to_thread(greedy_rearrange, spec, r, steps, config)

    tasks = [asyncio.create_task(run_one(r)) for r in targets]
    results = await asyncio.gather(*tasks, return_exceptions=True)

    traces: List[RearrangementTrace] = []
    for r, result in zip(targets, results):
        if isinstance(result, Exception):
            logger.error(f"Greedy run toward r={r} failed: {result}")
            raise result
        traces.append(result)
    return traces


def run_targets(spec: SeriesSpec, targets: Sequence[Any], steps: int,
                config: Optional[RearrangeConfig] = None,
                max_concurrent: Optional[int] = None) -> List[RearrangementTrace]:
    """Synchronous wrapper around run_targets_async."""
    return asyncio.run(run_targets_async(spec, targets, steps, config, max_concurrent))
