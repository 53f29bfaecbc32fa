"""Shared fixtures and brute-force reference implementations."""

import logging
from fractions import Fraction
from typing import List, Sequence, Set, Tuple

import pytest

from config import PACKAGE_LOGGERS, ConfigManager, set_global_config
from series_core import (ArithmeticMode, make_escalating_blocks,
                         make_explicit_prefix, make_square_blocks)


def naive_decompose(terms: Sequence) -> List[Tuple[str, int, int]]:
    """Maximal same-sign runs as (kind, start, end), found by a plain rescan."""
    runs = []
    start = 0
    for n in range(1, len(terms) + 1):
        if n == len(terms) or (terms[n] > 0) != (terms[start] > 0):
            runs.append(("P" if terms[start] > 0 else "N", start, n - 1))
            start = n
    return runs


def naive_block_count(images: Set[int]) -> int:
    """Number of maximal runs of consecutive integers in a set."""
    return sum(1 for x in images if x - 1 not in images)


def naive_greedy(terms: Sequence, r, steps: int) -> List[int]:
    """Greedy selection over a fixed list of terms by linear search."""
    used = set()
    total = Fraction(0) if isinstance(terms[0], Fraction) else 0.0
    chosen = []
    for _ in range(steps):
        want_positive = total <= r
        idx = next((i for i, v in enumerate(terms)
                    if i not in used and (v > 0) == want_positive), None)
        if idx is None:
            break
        used.add(idx)
        chosen.append(idx)
        total += terms[idx]
    return chosen


@pytest.fixture(autouse=True)
def reset_global_config():
    set_global_config(None)
    yield
    set_global_config(None)


@pytest.fixture(autouse=True)
def reset_package_loggers():
    root_level = logging.getLogger().level
    yield
    logging.getLogger().setLevel(root_level)
    for name in PACKAGE_LOGGERS:
        logging.getLogger(name).setLevel(logging.NOTSET)


@pytest.fixture
def config_manager():
    return ConfigManager()


@pytest.fixture
def square():
    return make_square_blocks()


@pytest.fixture
def square_float():
    return make_square_blocks(arithmetic=ArithmeticMode.FLOAT)


@pytest.fixture
def escalating():
    return make_escalating_blocks()


@pytest.fixture
def escalating_float():
    return make_escalating_blocks(arithmetic=ArithmeticMode.FLOAT)


@pytest.fixture
def small_explicit():
    return make_explicit_prefix([0, 2, -1, 1, -3])
