#!/usr/bin/env python3
"""
Example script demonstrating the rearrangement toolkit.

This script shows how to:
1. Build series and decompose them into blocks
2. Run greedy type R rearrangements
3. Verify the sandwich inequality on a trace
4. Scan for the substantial property and read the Z_R hint
5. Run several targets concurrently
"""

import asyncio
import json

from block_model import BlockKind, decompose_blocks
from config import create_default_config_file, initialize_system
from errors import HorizonCapExceededError, TypeRViolationError
from permutation_engine import PermutationPrefix, verify_sandwich
from rearranger import (assess_fixing_evidence, convergence_report,
                        greedy_rearrange, run_targets_async,
                        summarize_trace, trace_from_indices)
from series_core import (ArithmeticMode, format_scalar, generate_prefix,
                         make_escalating_blocks, make_explicit_prefix,
                         make_square_blocks)
from substantial_scanner import classify_zr_hint, scan_substantial


def demonstrate_series_and_blocks():
    """Demonstrate the built-in series and their block decompositions."""
    print("\n" + "="*60)
    print("SERIES AND BLOCKS DEMONSTRATION")
    print("="*60)

    square = make_square_blocks()
    escalating = make_escalating_blocks()

    print("square-blocks: " + ", ".join(format_scalar(t) for t in generate_prefix(square, 14)))
    print("escalating:    " + ", ".join(format_scalar(t) for t in generate_prefix(escalating, 8)))

    decomp = decompose_blocks(escalating, 400)
    for kind in BlockKind:
        sums = [format_scalar(b.total) for b in decomp.complete_blocks(kind)]
        print(f"{kind.value} blocks complete within 400 terms: {decomp.complete_count(kind)}, sums {sums}")

    return decomp


def demonstrate_block_numbers():
    """Demonstrate online block counting of a permutation prefix."""
    print("\n" + "="*60)
    print("BLOCK NUMBER DEMONSTRATION")
    print("="*60)

    prefix = PermutationPrefix.from_indices([1, 3, 4, 2], one_based=True)
    print(f"Images (0-based): {prefix.images}")
    print(f"Block number sequence: {prefix.block_number_sequence}")
    print(f"Merged intervals: {prefix.merged_intervals}")
    print(f"Pushing 9 would change the count by {prefix.block_count_delta(9)}")

    return prefix


def demonstrate_rearrangement():
    """Demonstrate greedy rearrangements and their summaries."""
    print("\n" + "="*60)
    print("GREEDY REARRANGEMENT DEMONSTRATION")
    print("="*60)

    square = make_square_blocks()
    for target in ("0", "1"):
        trace = greedy_rearrange(square, target, 3000)
        summary = summarize_trace(trace, [10, 100, 1000, 3000])
        print(f"square-blocks toward {target}: max block number {summary['max_block_number']}, "
              f"growth {summary['growth_profile']}, fixing evidence {summary['fixing_evidence']}")

    escalating = make_escalating_blocks(arithmetic=ArithmeticMode.FLOAT)
    trace = greedy_rearrange(escalating, 3, 20000)
    report = convergence_report(trace)
    print(f"escalating toward 3 (float): {len(report.switch_errors)} switches, "
          f"final-quarter error {format_scalar(report.tail_max_error)}")

    return trace


def demonstrate_sandwich():
    """Demonstrate checking the sandwich inequality on a greedy trace."""
    print("\n" + "="*60)
    print("SANDWICH VERIFICATION DEMONSTRATION")
    print("="*60)

    square = make_square_blocks()
    trace = greedy_rearrange(square, 0, 1000)
    decomp = decompose_blocks(square, 2 * (max(trace.indices) + 1))
    report = verify_sandwich(trace, decomp, trace.max_block_number)
    print(f"Sandwich with C={report.C}: {json.dumps(report.to_dict())}")

    return report


def demonstrate_scan():
    """Demonstrate substantial-property scans and the Z_R hint."""
    print("\n" + "="*60)
    print("SUBSTANTIAL SCAN DEMONSTRATION")
    print("="*60)

    escalating = make_escalating_blocks()
    decomp = decompose_blocks(escalating, 400)
    report_P = scan_substantial(decomp, BlockKind.P, 0, analytic_override=True)
    report_N = scan_substantial(decomp, BlockKind.N, 0, analytic_override=True)
    for report in (report_P, report_N):
        w = report.witness
        detail = f"k={w.k}, epsilon={format_scalar(w.epsilon)}, i0={w.i0}" if w else "none"
        print(f"{report.kind.value}: {report.verdict.value} ({detail})")

    probe = greedy_rearrange(escalating, 0, 1000)
    hint = classify_zr_hint(report_P, report_N, assess_fixing_evidence(probe))
    print(str(hint))

    return hint


async def demonstrate_parallel_targets():
    """Demonstrate running several targets concurrently."""
    print("\n" + "="*60)
    print("PARALLEL TARGETS DEMONSTRATION")
    print("="*60)

    square = make_square_blocks(arithmetic=ArithmeticMode.FLOAT)
    traces = await run_targets_async(square, ["0", "1/4", "1/2", "1"], 2000, max_concurrent=2)
    for trace in traces:
        print(f"r={format_scalar(trace.target)}: max block number {trace.max_block_number}")

    return traces


def demonstrate_error_handling():
    """Demonstrate truncation and type R violations."""
    print("\n" + "="*60)
    print("ERROR HANDLING DEMONSTRATION")
    print("="*60)

    finite = make_explicit_prefix([1, -1, "1/2"], leading_zero=False)
    trace = greedy_rearrange(finite, 10, 5)
    print(f"Explicit prefix toward 10: {len(trace)} steps, truncated={trace.truncated}")
    try:
        greedy_rearrange(finite, 10, 5, raise_on_truncation=True)
    except HorizonCapExceededError as e:
        print(f"Strict run failed: {e}")

    shuffled = trace_from_indices(make_square_blocks(), 0, [2, 0, 1])
    try:
        shuffled.type_r_check().raise_if_violated()
    except TypeRViolationError as e:
        print(f"Shuffled permutation rejected: {e}")

    return trace


async def main():
    """Main demonstration function."""
    print("Rearrangement Toolkit Demonstration")
    print("="*60)

    print("Initializing system...")
    initialize_system()
    print("System initialized successfully!")

    try:
        demonstrate_series_and_blocks()
        demonstrate_block_numbers()
        demonstrate_rearrangement()
        demonstrate_sandwich()
        demonstrate_scan()
        traces = await demonstrate_parallel_targets()
        demonstrate_error_handling()

        print("\n" + "="*60)
        print("DEMONSTRATION SUMMARY")
        print("="*60)
        print("✓ Decomposed two built-in series into blocks")
        print(f"✓ Ran {len(traces)} concurrent greedy rearrangements")
        print("✓ Verified the sandwich inequality")
        print("✓ Scanned both block kinds for the substantial property")

    except Exception as e:
        print(f"Demonstration failed: {e}")
        import traceback
        traceback.print_exc()


if __name__ == "__main__":
    try:
        create_default_config_file("example_config.json")
        print("Created example configuration file: example_config.json")
    except Exception as e:
        print(f"Note: Could not create config file: {e}")

    asyncio.run(main())
