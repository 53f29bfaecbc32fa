"""
Exception types shared across the rearrangement toolkit.

Each failure the command line has to tell apart gets its own class so that
`cli.py` can map it to an exit code without string matching.
"""

from typing import Optional, Tuple


class RearrangementError(Exception):
    """Base class for all toolkit errors."""


class ArithmeticOverflowError(RearrangementError, ArithmeticError):
    """A value left the finite range of the active arithmetic mode."""


class DuplicateIndexError(RearrangementError, ValueError):
    """An index was pushed into a permutation prefix twice."""

    def __init__(self, index: int):
        super().__init__(f"index {index} is already in the permutation prefix")
        self.index = index


class BlockIndexError(RearrangementError, IndexError):
    """A block index is out of range or addresses a truncated block."""


class HorizonCapExceededError(RearrangementError):
    """A sign pool ran dry before the configured horizon cap."""

    def __init__(self, cap: int, positive: bool):
        pool = "positive" if positive else "negative"
        super().__init__(f"no unused {pool} term within the horizon cap of {cap} terms")
        self.cap = cap
        self.positive = positive


class TypeRViolationError(RearrangementError):
    """A permutation prefix selects same-sign terms out of order."""

    def __init__(self, witness: Tuple[int, int], indices: Optional[Tuple[int, int]] = None):
        detail = f" (indices {indices[0]} then {indices[1]})" if indices else ""
        super().__init__(f"not type R: positions {witness[0]} and {witness[1]}{detail}")
        self.witness = witness
        self.indices = indices


class InsufficientBlocksError(RearrangementError):
    """A scan needs more complete blocks than the decomposition holds."""

    def __init__(self, kind: str, needed: int, available: int):
        super().__init__(
            f"need at least {needed} complete {kind} blocks, decomposition has {available}"
        )
        self.kind = kind
        self.needed = needed
        self.available = available


class SpecSchemaError(RearrangementError, ValueError):
    """A series-spec document does not follow the schema."""


class TraceFormatError(RearrangementError, ValueError):
    """A trace or permutation file could not be parsed."""
