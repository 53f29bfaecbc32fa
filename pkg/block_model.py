"""
Block decomposition of a series prefix.

Indices [0, horizon) split into maximal runs of positive terms (P blocks) and
of non-positive terms (N blocks). Block indices are 1-based, term indices
0-based, intervals closed: P_i = [p_i, q_i], N_i = [n_i, m_i].

Block sums and block-end partial sums are cached at construction so range
queries are O(1).
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Tuple, Union

from errors import BlockIndexError
from series_core import (ArithmeticMode, SeriesSpec, TermValue, format_scalar,
                         generate_prefix, is_positive, zero)

logger = logging.getLogger(__name__)


class BlockKind(Enum):
    """Sign class of a block."""
    P = "P"
    N = "N"

    @property
    def positive(self) -> bool:
        return self is BlockKind.P


KindLike = Union[BlockKind, str]


@dataclass(frozen=True)
class Block:
    """One maximal same-sign run."""
    kind: BlockKind
    index: int
    start: int
    end: int
    total: TermValue
    partial_sum: TermValue
    truncated: bool = False


@dataclass(frozen=True)
class BlockDecomposition:
    """
    Blocks of a series over [0, horizon).

    A trailing block that may continue past the horizon is kept with
    `truncated=True` and is excluded from every block-indexed query.
    """
    horizon: int
    arithmetic: ArithmeticMode
    positive_blocks: Tuple[Block, ...]
    negative_blocks: Tuple[Block, ...]
    _cumulative: Dict[BlockKind, Tuple[TermValue, ...]] = field(repr=False, compare=False)

    def blocks(self, kind: KindLike) -> Tuple[Block, ...]:
        kind = BlockKind(kind)
        return self.positive_blocks if kind.positive else self.negative_blocks

    def complete_count(self, kind: KindLike) -> int:
        return len(self._cumulative[BlockKind(kind)]) - 1

    def complete_blocks(self, kind: KindLike) -> Tuple[Block, ...]:
        return self.blocks(kind)[:self.complete_count(kind)]

    def block(self, kind: KindLike, i: int) -> Block:
        kind = BlockKind(kind)
        count = self.complete_count(kind)
        if not 1 <= i <= count:
            truncated = i == count + 1 and len(self.blocks(kind)) > count
            reason = "is truncated at the horizon" if truncated else "is out of range"
            raise BlockIndexError(f"block {kind.value}_{i} {reason} "
                                  f"({count} complete {kind.value} blocks in horizon {self.horizon})")
        return self.blocks(kind)[i - 1]

    @property
    def block_sums_P(self) -> List[TermValue]:
        return [b.total for b in self.complete_blocks(BlockKind.P)]

    @property
    def block_sums_N(self) -> List[TermValue]:
        return [b.total for b in self.complete_blocks(BlockKind.N)]

    def blocks_in_index_order(self, include_truncated: bool = False) -> List[Block]:
        chosen = list(self.complete_blocks(BlockKind.P)) + list(self.complete_blocks(BlockKind.N))
        if include_truncated:
            chosen += [b for b in self.positive_blocks + self.negative_blocks if b.truncated]
        return sorted(chosen, key=lambda b: b.start)

    @property
    def prefix_sums(self) -> List[TermValue]:
        """Partial sums S_{q_i} / S_{m_i} at every complete block end, in index order."""
        return [b.partial_sum for b in self.blocks_in_index_order()]

    @property
    def opens_negative(self) -> bool:
        return bool(self.negative_blocks) and self.negative_blocks[0].start == 0

    def block_sum(self, kind: KindLike, i: int, j: int) -> TermValue:
        """S_{[K_i, K_j]}: sum over blocks i..j of one kind."""
        kind = BlockKind(kind)
        if i > j:
            raise ValueError(f"block range is reversed: {i} > {j}")
        self.block(kind, i)
        self.block(kind, j)
        cumulative = self._cumulative[kind]
        return cumulative[j] - cumulative[i - 1]

    def block_sum_or_zero(self, kind: KindLike, i: int, j: int) -> TermValue:
        """Like block_sum, but a range whose upper index is below 1 is empty and sums to 0."""
        if j < 1:
            return zero(self.arithmetic)
        return self.block_sum(kind, max(i, 1), j)

    def partial_sum_at(self, kind: KindLike, i: int) -> TermValue:
        """S_{q_i} for kind P, S_{m_i} for kind N."""
        return self.block(kind, i).partial_sum

    def to_rows(self) -> List[Dict[str, str]]:
        return [
            {
                "kind": b.kind.value,
                "index": str(b.index),
                "start": str(b.start),
                "end": str(b.end),
                "block_sum": format_scalar(b.total),
                "partial_sum_at": format_scalar(b.partial_sum),
            }
            for b in self.blocks_in_index_order()
        ]


def decompose_blocks(spec: SeriesSpec, horizon: int) -> BlockDecomposition:
    """Decompose indices [0, horizon) of a series into maximal same-sign blocks."""
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")

    # one extra term tells whether the last run continues
    terms = generate_prefix(spec, horizon + 1)
    mode = spec.arithmetic
    blocks: Dict[BlockKind, List[Block]] = {BlockKind.P: [], BlockKind.N: []}

    running = zero(mode)
    run_start = 0
    run_total = zero(mode)
    run_positive = is_positive(terms[0])

    for n in range(horizon):
        value = terms[n]
        running += value
        run_total += value
        if n + 1 < horizon and is_positive(terms[n + 1]) == run_positive:
            continue
        kind = BlockKind.P if run_positive else BlockKind.N
        truncated = n + 1 == horizon and is_positive(terms[horizon]) == run_positive
        blocks[kind].append(Block(kind, len(blocks[kind]) + 1, run_start, n,
                                  run_total, running, truncated))
        run_start = n + 1
        run_total = zero(mode)
        if n + 1 < horizon:
            run_positive = is_positive(terms[n + 1])

    cumulative: Dict[BlockKind, Tuple[TermValue, ...]] = {}
    for kind, kind_blocks in blocks.items():
        sums = [zero(mode)]
        for b in kind_blocks:
            if b.truncated:
                break
            sums.append(sums[-1] + b.total)
        cumulative[kind] = tuple(sums)

    decomp = BlockDecomposition(horizon, mode, tuple(blocks[BlockKind.P]),
                                tuple(blocks[BlockKind.N]), cumulative)
    logger.debug(f"Decomposed {spec.describe()} to horizon {horizon}: "
                 f"{decomp.complete_count('P')} P / {decomp.complete_count('N')} N complete blocks")
    return decomp


def block_sum(decomp: BlockDecomposition, kind: KindLike, i: int, j: int) -> TermValue:
    """S_{[P_i, P_j]} or S_{[N_i, N_j]}."""
    return decomp.block_sum(kind, i, j)


def partial_sum_at(decomp: BlockDecomposition, kind: KindLike, i: int) -> TermValue:
    """Partial sum of the series through the last index of block i."""
    return decomp.partial_sum_at(kind, i)


def decompose_to_block_count(spec: SeriesSpec, blocks: int, max_terms: int,
                             initial_horizon: int = 1024,
                             stall_limit: int = 0) -> BlockDecomposition:
    """
    Grow the horizon geometrically until both kinds have `blocks` complete
    blocks, or the horizon reaches `max_terms`.

    With `stall_limit` > 0 growth also stops after that many consecutive
    doublings that complete no new block.
    """
    if blocks < 1:
        raise ValueError(f"block count must be >= 1, got {blocks}")
    horizon = min(max(initial_horizon, 1), max_terms)
    stalled = 0
    previous = -1
    while True:
        decomp = decompose_blocks(spec, horizon)
        reached = min(decomp.complete_count(BlockKind.P), decomp.complete_count(BlockKind.N))
        if reached >= blocks:
            return decomp
        stalled = stalled + 1 if reached == previous else 0
        previous = reached
        if horizon >= max_terms or (stall_limit and stalled >= stall_limit):
            logger.warning(f"Only {reached} complete blocks of each kind within {horizon} terms "
                           f"of {spec.describe()} (requested {blocks})")
            return decomp
        horizon = min(horizon * 2, max_terms)
        logger.info(f"Extending decomposition horizon to {horizon} terms")
