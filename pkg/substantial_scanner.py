"""
Finite-horizon scans for the substantial property of a series' blocks.

A series has the substantial property on its positive blocks when, past some
block i0, every window of k+1 consecutive positive blocks sums to at least
some epsilon > 0 (likewise for the magnitudes of negative windows). No finite
computation decides this; the scanner reports window minima over growing
sub-horizons and calls a witness only when the minimum has settled.
"""

import asyncio
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from block_model import BlockDecomposition, BlockKind, KindLike
from config import ScanConfig
from errors import InsufficientBlocksError
from series_core import ArithmeticMode, TermValue, format_scalar

logger = logging.getLogger(__name__)

HEURISTIC_NOTE = "finite-horizon heuristic, not a decision"

IndexRange = Union[range, Tuple[int, int]]


class Verdict(Enum):
    WITNESS_FOUND = "witness_found"
    NO_WITNESS = "no_witness_at_horizon"


class ZRHint(Enum):
    """Possible shapes of the set of values reachable by type R rearrangements with bounded block number."""
    EMPTY = "hint: Z_R = ∅"
    REALS = "hint: Z_R = ℝ"
    SINGLETON = "hint: Z_R singleton"


def _as_range(i_range: IndexRange) -> range:
    if isinstance(i_range, range):
        return i_range
    lo, hi = i_range
    return range(lo, hi + 1)


def window_sums(decomp: BlockDecomposition, kind: KindLike, k: int,
                i_range: IndexRange) -> List[TermValue]:
    """S_{[K_i, K_{i+k}]} for each block index i in i_range (a range, or an inclusive (lo, hi) pair)."""
    kind = BlockKind(kind)
    if k < 0:
        raise ValueError(f"window offset k must be >= 0, got {k}")
    indices = _as_range(i_range)
    if not indices:
        return []
    available = decomp.complete_count(kind)
    lo, hi = min(indices), max(indices)
    if lo < 1 or hi + k > available:
        raise InsufficientBlocksError(kind.value, max(hi + k, 1), available)
    return [decomp.block_sum(kind, i, i + k) for i in indices]


def minimum_window(decomp: BlockDecomposition, kind: KindLike, k: int, i0: int,
                   upto: int) -> Tuple[TermValue, int]:
    """Smallest window magnitude over i in [i0, upto - k], with its first argmin."""
    if upto - k < i0:
        raise ValueError(f"empty window range: i0={i0}, k={k}, upto={upto}")
    sums = window_sums(decomp, kind, k, (i0, upto - k))
    best_i, best = i0, abs(sums[0])
    for offset, value in enumerate(sums[1:], start=1):
        magnitude = abs(value)
        if magnitude < best:
            best, best_i = magnitude, i0 + offset
    return best, best_i


@dataclass(frozen=True)
class ScanCell:
    """Window minima for one (k, i0) pair at the three sub-horizons."""
    k: int
    i0: int
    sub_horizons: Tuple[int, ...]
    minima: Tuple[TermValue, ...]
    argmin: int
    stable: bool

    @property
    def min_window(self) -> TermValue:
        return self.minima[-1]

    @property
    def decaying(self) -> bool:
        """Minima strictly decrease across the sub-horizons."""
        return all(b < a for a, b in zip(self.minima, self.minima[1:]))

    def to_row(self) -> Dict[str, str]:
        return {
            "k": str(self.k),
            "i0": str(self.i0),
            "min_window": format_scalar(self.min_window),
            "argmin_i": str(self.argmin),
        }


@dataclass(frozen=True)
class Witness:
    k: int
    epsilon: TermValue
    i0: int


@dataclass
class SubstantialReport:
    """Scan outcome for one block kind at a horizon of B complete blocks."""
    kind: BlockKind
    horizon_blocks: int
    k_max: int
    i0_grid: List[int]
    cells: List[ScanCell] = field(default_factory=list)
    witness: Optional[Witness] = None
    analytic_override: Optional[bool] = None

    @property
    def verdict(self) -> Verdict:
        return Verdict.WITNESS_FOUND if self.witness else Verdict.NO_WITNESS

    @property
    def per_k(self) -> Dict[int, Tuple[TermValue, int]]:
        """Minimum window magnitude and argmin per k, over the smallest i0 of the grid."""
        first = self.i0_grid[0]
        return {c.k: (c.min_window, c.argmin) for c in self.cells if c.i0 == first}

    def cell(self, k: int, i0: int) -> ScanCell:
        for c in self.cells:
            if c.k == k and c.i0 == i0:
                return c
        raise KeyError(f"no cell for k={k}, i0={i0}")

    def agrees_with_analytic(self) -> Optional[bool]:
        if self.analytic_override is None:
            return None
        return self.analytic_override == (self.verdict is Verdict.WITNESS_FOUND)

    def to_dict(self) -> Dict[str, Any]:
        verdict: Dict[str, Any] = {"status": self.verdict.value}
        if self.witness:
            verdict.update(k=self.witness.k, epsilon=format_scalar(self.witness.epsilon),
                           i0=self.witness.i0)
        return {
            "kind": self.kind.value,
            "horizon_blocks": self.horizon_blocks,
            "k_max": self.k_max,
            "i0_grid": list(self.i0_grid),
            "per_k": [
                {"k": k, "min_window": format_scalar(m), "argmin_i": i}
                for k, (m, i) in sorted(self.per_k.items())
            ],
            "cells": [
                {
                    "k": c.k,
                    "i0": c.i0,
                    "sub_horizons": list(c.sub_horizons),
                    "minima": [format_scalar(m) for m in c.minima],
                    "argmin_i": c.argmin,
                    "stable": c.stable,
                }
                for c in self.cells
            ],
            "verdict": verdict,
            "analytic_override": self.analytic_override,
            "note": HEURISTIC_NOTE,
        }

    def to_rows(self) -> List[Dict[str, str]]:
        return [dict(kind=self.kind.value, **c.to_row()) for c in self.cells]


def default_i0_grid(horizon_blocks: int) -> List[int]:
    return sorted({1, max(1, horizon_blocks // 10), max(1, horizon_blocks // 4)})


def _is_stable(minima: Sequence[TermValue], mode: ArithmeticMode, tolerance: float) -> bool:
    if minima[-1] <= 0:
        return False
    if mode is ArithmeticMode.EXACT:
        return len(set(minima)) == 1
    return max(minima) - min(minima) <= tolerance * max(minima)


def _scan_cell(decomp: BlockDecomposition, kind: BlockKind, k: int, i0: int,
               tolerance: float) -> ScanCell:
    B = decomp.complete_count(kind)
    floor = i0 + k
    sub_horizons = tuple(max(h, floor) for h in (math.ceil(B / 4), math.ceil(B / 2), B))
    minima = []
    argmin = i0
    for upto in sub_horizons:
        value, argmin = minimum_window(decomp, kind, k, i0, upto)
        minima.append(value)
    stable = _is_stable(minima, decomp.arithmetic, tolerance)
    return ScanCell(k, i0, sub_horizons, tuple(minima), argmin, stable)


async def scan_substantial_async(decomp: BlockDecomposition, kind: KindLike, k_max: int,
                                 i0_grid: Optional[Sequence[int]] = None,
                                 config: Optional[ScanConfig] = None,
                                 analytic_override: Optional[bool] = None) -> SubstantialReport:
    kind = BlockKind(kind)
    config = config or ScanConfig()
    if k_max < 0:
        raise ValueError(f"k_max must be >= 0, got {k_max}")
    B = decomp.complete_count(kind)
    grid = sorted(set(i0_grid)) if i0_grid else default_i0_grid(B)
    if grid[0] < 1:
        raise ValueError(f"i0 values must be >= 1, got {grid[0]}")
    needed = k_max + grid[-1]
    if B < needed:
        raise InsufficientBlocksError(kind.value, needed, B)

    logger.info(f"Scanning {kind.value} windows: B={B}, k <= {k_max}, i0 in {grid}")
    pairs = [(k, i0) for k in range(k_max + 1) for i0 in grid]
    tolerance = config.stability_tolerance

    if config.enable_cell_parallelization and len(pairs) > 1:
        semaphore = asyncio.Semaphore(config.max_concurrent_cells)

        async def run_cell(k: int, i0: int) -> ScanCell:
            async with semaphore:
                return await asyncio.to_thread(_scan_cell, decomp, kind, k, i0, tolerance)

        tasks = [asyncio.create_task(run_cell(k, i0)) for k, i0 in pairs]
        cells = list(await asyncio.gather(*tasks))
    else:
        cells = [_scan_cell(decomp, kind, k, i0, tolerance) for k, i0 in pairs]

    report = SubstantialReport(kind, B, k_max, grid, cells, analytic_override=analytic_override)
    for cell in cells:
        if cell.stable:
            report.witness = Witness(cell.k, cell.min_window, cell.i0)
            break

    if report.witness:
        w = report.witness
        logger.info(f"{kind.value}: witness k={w.k}, epsilon={format_scalar(w.epsilon)}, i0={w.i0}")
    else:
        logger.info(f"{kind.value}: no witness at {B} blocks")
    if report.agrees_with_analytic() is False:
        logger.warning(f"{kind.value}: empirical verdict {report.verdict.value} disagrees with "
                       f"the known property ({analytic_override})")
    return report


def scan_substantial(decomp: BlockDecomposition, kind: KindLike, k_max: int,
                     i0_grid: Optional[Sequence[int]] = None,
                     config: Optional[ScanConfig] = None,
                     analytic_override: Optional[bool] = None) -> SubstantialReport:
    """
    Scan window minima for every k <= k_max and i0 in the grid.

    A cell is a witness when its minimum over [i0, B'-k] is positive and
    identical (exact mode) or within `stability_tolerance` (float mode) at
    B' = ceil(B/4), ceil(B/2) and B. The first witness in (k, i0) order is
    reported, with epsilon the observed minimum.
    """
    return asyncio.run(scan_substantial_async(decomp, kind, k_max, i0_grid, config,
                                              analytic_override))


@dataclass(frozen=True)
class ZRClassification:
    hint: ZRHint
    note: str = HEURISTIC_NOTE

    def __str__(self) -> str:
        return f"{self.hint.value} ({self.note})"

    def to_dict(self) -> Dict[str, str]:
        return {"hint": self.hint.value, "note": self.note}


def classify_zr_hint(report_P: SubstantialReport, report_N: SubstantialReport,
                     has_fixing_permutation: bool) -> ZRClassification:
    """Combine both scans with fixing evidence into a hint about Z_R."""
    if not has_fixing_permutation:
        hint = ZRHint.EMPTY
    elif report_P.witness and report_N.witness:
        hint = ZRHint.REALS
    else:
        hint = ZRHint.SINGLETON
    logger.info(f"Z_R classification: {hint.value}")
    return ZRClassification(hint)
