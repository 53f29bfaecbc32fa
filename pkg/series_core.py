"""
Series definitions for the rearrangement toolkit.

A series is described by a `SeriesSpec` (what to generate) and backed by a
`TermSource` (how terms are produced, cached and typed). Terms are exact
`Fraction`s or binary floats depending on the run-wide arithmetic mode.

Built-in series:
- escalating blocks: alternating positive/negative runs of harmonic values,
  each run's magnitude at least the previous one's plus an increment
- square blocks: (1/k, -1/k) for non-square k, k copies of 1/k then k copies
  of -1/k when k is a perfect square

Custom series come from a repeating block pattern or an explicit list of
terms followed by zeros.
"""

import json
import logging
import math
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

from errors import ArithmeticOverflowError, SpecSchemaError

logger = logging.getLogger(__name__)

TermValue = Union[Fraction, float]


class ArithmeticMode(Enum):
    """Arithmetic used for terms and every sum derived from them."""
    EXACT = "exact"
    FLOAT = "float"


class SeriesKind(Enum):
    """Kinds of series a spec can describe."""
    ESCALATING_BLOCKS = "escalating_blocks"
    SQUARE_BLOCKS = "square_blocks"
    CUSTOM_BLOCKS = "custom_blocks"
    EXPLICIT_PREFIX = "explicit_prefix"


BUILTIN_KINDS = (SeriesKind.ESCALATING_BLOCKS, SeriesKind.SQUARE_BLOCKS)


# Scalars

def parse_scalar(value: Any, mode: ArithmeticMode = ArithmeticMode.EXACT) -> TermValue:
    """
    Parse a scalar given as "p/q", a decimal string, an int or a float.

    Decimal strings and JSON floats are read as the decimal they spell, so
    "0.1" is exactly 1/10 in exact mode.
    """
    if isinstance(value, bool):
        raise ValueError(f"not a scalar: {value!r}")
    try:
        if isinstance(value, Fraction):
            exact = value
        elif isinstance(value, int):
            exact = Fraction(value)
        elif isinstance(value, float):
            if not math.isfinite(value):
                raise ArithmeticOverflowError(f"non-finite scalar: {value!r}")
            exact = Fraction(repr(value))
        elif isinstance(value, str):
            exact = Fraction(value.strip())
        else:
            raise ValueError(f"not a scalar: {value!r}")
    except (ValueError, ZeroDivisionError) as e:
        raise ValueError(f"cannot parse scalar {value!r}: {e}") from e
    return convert(exact, mode)


def convert(value: Union[Fraction, int, float], mode: ArithmeticMode) -> TermValue:
    """Convert a value into the given arithmetic mode."""
    if mode is ArithmeticMode.EXACT:
        if isinstance(value, float):
            if not math.isfinite(value):
                raise ArithmeticOverflowError(f"non-finite value {value!r} in exact mode")
            return Fraction(value)
        return Fraction(value)
    try:
        result = float(value)
    except OverflowError as e:
        raise ArithmeticOverflowError(f"value does not fit a float: {e}") from e
    return check_finite(result)


def check_finite(value: TermValue) -> TermValue:
    """Raise if a float value overflowed."""
    if isinstance(value, float) and not math.isfinite(value):
        raise ArithmeticOverflowError(f"float arithmetic left the finite range: {value!r}")
    return value


def format_scalar(value: Union[TermValue, int]) -> str:
    """Rationals as "p/q" in lowest terms ("p" for integers), floats as shortest round-trip."""
    if isinstance(value, Fraction):
        if value.denominator == 1:
            return str(value.numerator)
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def is_positive(value: TermValue) -> bool:
    """Sign classification: strictly positive terms are P, everything else (zero included) is N."""
    return value > 0


def zero(mode: ArithmeticMode) -> TermValue:
    return Fraction(0) if mode is ArithmeticMode.EXACT else 0.0


def reciprocal(k: int, mode: ArithmeticMode) -> TermValue:
    return Fraction(1, k) if mode is ArithmeticMode.EXACT else 1.0 / k


# Term sources

class TermSource(ABC):
    """
    Lazily materialized, append-only cache of a series' terms.

    Subclasses append terms in index order from `_extend`. The leading zero,
    when requested, is stored as the first cached term.
    """

    def __init__(self, mode: ArithmeticMode, leading_zero: bool):
        self.mode = mode
        self.offset = 1 if leading_zero else 0
        self._terms: List[TermValue] = [zero(mode)] if leading_zero else []
        self._lock = threading.Lock()

    @abstractmethod
    def _extend(self) -> None:
        """Append at least one term."""

    def pool_bound(self, positive: bool) -> Optional[int]:
        """Index past which no term of the given class occurs, or None when unbounded."""
        return None

    def materialized(self) -> int:
        return len(self._terms)

    def ensure(self, count: int) -> None:
        if count <= len(self._terms):
            return
        with self._lock:
            while len(self._terms) < count:
                self._extend()

    def term(self, n: int) -> TermValue:
        if n >= len(self._terms):
            self.ensure(n + 1)
        return self._terms[n]

    def prefix(self, count: int) -> List[TermValue]:
        self.ensure(count)
        return self._terms[:count]

    def _append(self, value: TermValue) -> None:
        self._terms.append(check_finite(value))


class EscalatingBlocksSource(TermSource):
    """Alternating harmonic runs whose magnitudes escalate block after block."""

    def __init__(self, mode: ArithmeticMode, leading_zero: bool,
                 seed_targets: Sequence[Fraction], increment: Fraction):
        super().__init__(mode, leading_zero)
        self._seeds = [convert(t, mode) for t in seed_targets]
        self._increment = convert(increment, mode)
        self._next_k = {True: 1, False: 1}
        self._block = 1
        self._running = zero(mode)
        self._target = self._target_for(1, None)

    def _target_for(self, block: int, achieved: Optional[TermValue]) -> TermValue:
        if block <= len(self._seeds):
            return self._seeds[block - 1]
        if achieved is None:
            return convert(1, self.mode)
        return achieved + self._increment

    def _extend(self) -> None:
        positive = self._block % 2 == 1
        k = self._next_k[positive]
        self._next_k[positive] = k + 1
        value = reciprocal(k, self.mode)
        self._append(value if positive else -value)
        self._running += value
        if self._running >= self._target:
            logger.debug(f"Escalating block {self._block} closed at index "
                         f"{len(self._terms) - 1} with |sum| {format_scalar(self._running)}")
            self._block += 1
            self._target = self._target_for(self._block, self._running)
            self._running = zero(self.mode)


class SquareBlocksSource(TermSource):
    """Groups (1/k, -1/k), widened to k copies of each sign when k is a perfect square."""

    def __init__(self, mode: ArithmeticMode, leading_zero: bool):
        super().__init__(mode, leading_zero)
        self._group = 1

    def _extend(self) -> None:
        k = self._group
        self._group += 1
        width = k if math.isqrt(k) ** 2 == k else 1
        value = reciprocal(k, self.mode)
        self._terms.extend([value] * width)
        self._terms.extend([-value] * width)


class CustomBlocksSource(TermSource):
    """Cycles through a block pattern, optionally scaling group g by 1/g."""

    def __init__(self, mode: ArithmeticMode, leading_zero: bool,
                 pattern: Sequence[Sequence[Fraction]], scale: str):
        super().__init__(mode, leading_zero)
        self._pattern = [[convert(v, mode) for v in block] for block in pattern]
        self._harmonic = scale == "harmonic"
        self._group = 1
        values = [v for block in pattern for v in block]
        self._has_positive = any(v > 0 for v in values)
        self._has_negative = any(v <= 0 for v in values)

    def pool_bound(self, positive: bool) -> Optional[int]:
        present = self._has_positive if positive else self._has_negative
        return None if present else self.offset

    def _extend(self) -> None:
        g = self._group
        self._group += 1
        block = self._pattern[(g - 1) % len(self._pattern)]
        if self._harmonic:
            factor = reciprocal(g, self.mode)
            for v in block:
                self._append(v * factor)
        else:
            for v in block:
                self._append(v)


class ExplicitPrefixSource(TermSource):
    """Stored terms followed by an all-zero tail."""

    def __init__(self, mode: ArithmeticMode, leading_zero: bool, terms: Sequence[Fraction]):
        super().__init__(mode, leading_zero)
        self._stored = [convert(v, mode) for v in terms]
        self._position = 0
        positives = [i for i, v in enumerate(terms) if v > 0]
        self._positive_bound = (positives[-1] + 1 if positives else 0) + self.offset

    def pool_bound(self, positive: bool) -> Optional[int]:
        return self._positive_bound if positive else None

    def _extend(self) -> None:
        if self._position < len(self._stored):
            self._append(self._stored[self._position])
        else:
            self._terms.append(zero(self.mode))
        self._position += 1


# Specs

@dataclass(frozen=True)
class SeriesSpec:
    """
    Deterministic rule producing a_n for every n >= 0.

    `params` holds kind-specific values normalized to `Fraction`s; the term
    source is built once at construction and shared by every reader.
    """
    kind: SeriesKind
    params: Dict[str, Any] = field(default_factory=dict, hash=False)
    leading_zero: bool = False
    arithmetic: ArithmeticMode = ArithmeticMode.EXACT
    _source: TermSource = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "_source", _build_source(self))

    @property
    def source(self) -> TermSource:
        return self._source

    @property
    def is_builtin(self) -> bool:
        return self.kind in BUILTIN_KINDS

    def with_arithmetic(self, mode: ArithmeticMode) -> "SeriesSpec":
        return replace(self, arithmetic=mode)

    def with_leading_zero(self, leading_zero: bool) -> "SeriesSpec":
        return replace(self, leading_zero=leading_zero)

    def describe(self) -> str:
        lz = ", leading zero" if self.leading_zero else ""
        return f"{self.kind.value} ({self.arithmetic.value}{lz})"


def _build_source(spec: SeriesSpec) -> TermSource:
    mode, lz, params = spec.arithmetic, spec.leading_zero, spec.params
    if spec.kind is SeriesKind.ESCALATING_BLOCKS:
        return EscalatingBlocksSource(mode, lz, params.get("seed_targets", ()),
                                      params.get("increment", Fraction(1)))
    if spec.kind is SeriesKind.SQUARE_BLOCKS:
        return SquareBlocksSource(mode, lz)
    if spec.kind is SeriesKind.CUSTOM_BLOCKS:
        return CustomBlocksSource(mode, lz, params["pattern"], params.get("scale", "harmonic"))
    if spec.kind is SeriesKind.EXPLICIT_PREFIX:
        return ExplicitPrefixSource(mode, lz, params["terms"])
    raise ValueError(f"unknown series kind: {spec.kind}")


def _first_value_positive(kind: SeriesKind, params: Dict[str, Any]) -> bool:
    if kind is SeriesKind.EXPLICIT_PREFIX:
        terms = params["terms"]
        return bool(terms) and terms[0] > 0
    if kind is SeriesKind.CUSTOM_BLOCKS:
        first_block = params["pattern"][0]
        return bool(first_block) and first_block[0] > 0
    return True


def _resolve_leading_zero(kind: SeriesKind, params: Dict[str, Any],
                          leading_zero: Optional[bool]) -> bool:
    if leading_zero is not None:
        return leading_zero
    resolved = _first_value_positive(kind, params)
    logger.debug(f"leading_zero resolved to {resolved} for {kind.value}")
    return resolved


# Operations

def eval_term(spec: SeriesSpec, n: int) -> TermValue:
    """Return a_n."""
    if n < 0:
        raise ValueError(f"term index must be >= 0, got {n}")
    return spec.source.term(n)


def generate_prefix(spec: SeriesSpec, count: int) -> List[TermValue]:
    """Return (a_0, ..., a_{count-1})."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    return spec.source.prefix(count)


def make_escalating_blocks(seed_targets: Optional[Iterable[Any]] = None,
                           increment: Any = 1,
                           leading_zero: bool = False,
                           arithmetic: ArithmeticMode = ArithmeticMode.EXACT) -> SeriesSpec:
    """
    Build the escalating-blocks series.

    Blocks alternate sign starting positive and draw, per sign, from the
    harmonic values 1, 1/2, 1/3, ... in order. Block j ends at the first index
    where its magnitude reaches target_j. With no seeds the targets are the
    minimal ones: target_1 = 1 and target_j = |sum of block j-1| + increment,
    which opens 1 - 1 - 1/2 - 1/3 - 1/4 + 1/2 + ... + 1/33 - 1/5 - ...
    """
    seeds = tuple(parse_scalar(t) for t in (seed_targets or ()))
    if any(t <= 0 for t in seeds):
        raise ValueError("seed targets must be positive")
    step = parse_scalar(increment)
    if step < 0:
        raise ValueError(f"increment must be >= 0, got {format_scalar(step)}")
    return SeriesSpec(SeriesKind.ESCALATING_BLOCKS,
                      {"seed_targets": seeds, "increment": step},
                      leading_zero, arithmetic)


def make_square_blocks(leading_zero: bool = False,
                       arithmetic: ArithmeticMode = ArithmeticMode.EXACT) -> SeriesSpec:
    """Build the square-blocks series 1 - 1 + (1/2 - 1/2) + (1/3 - 1/3) + (1/4 x4 - 1/4 x4) + ..."""
    return SeriesSpec(SeriesKind.SQUARE_BLOCKS, {}, leading_zero, arithmetic)


def make_custom_blocks(pattern: Sequence[Sequence[Any]],
                       scale: str = "harmonic",
                       leading_zero: Optional[bool] = None,
                       arithmetic: ArithmeticMode = ArithmeticMode.EXACT) -> SeriesSpec:
    """Build a series whose g-th group is pattern[(g-1) % len(pattern)], scaled by 1/g for "harmonic"."""
    if not pattern or any(len(block) == 0 for block in pattern):
        raise ValueError("pattern must be a non-empty list of non-empty blocks")
    if scale not in ("harmonic", "none"):
        raise ValueError(f"scale must be 'harmonic' or 'none', got {scale!r}")
    blocks = tuple(tuple(parse_scalar(v) for v in block) for block in pattern)
    params = {"pattern": blocks, "scale": scale}
    lz = _resolve_leading_zero(SeriesKind.CUSTOM_BLOCKS, params, leading_zero)
    return SeriesSpec(SeriesKind.CUSTOM_BLOCKS, params, lz, arithmetic)


def make_explicit_prefix(terms: Sequence[Any],
                         leading_zero: Optional[bool] = None,
                         arithmetic: ArithmeticMode = ArithmeticMode.EXACT) -> SeriesSpec:
    """Build a series from stored terms; every index past them holds 0."""
    values = tuple(parse_scalar(v) for v in terms)
    params = {"terms": values}
    lz = _resolve_leading_zero(SeriesKind.EXPLICIT_PREFIX, params, leading_zero)
    return SeriesSpec(SeriesKind.EXPLICIT_PREFIX, params, lz, arithmetic)


@dataclass(frozen=True)
class AnalyticProperties:
    """Properties known in closed form for built-in series (None when unknown)."""
    st_p: Optional[bool] = None
    st_n: Optional[bool] = None
    fixable: Optional[bool] = None


def analytic_properties(spec: SeriesSpec) -> AnalyticProperties:
    if spec.kind is SeriesKind.SQUARE_BLOCKS:
        # fixed to 0 with block number 2; gaps between squares defeat any window
        return AnalyticProperties(st_p=False, st_n=False, fixable=True)
    if spec.kind is SeriesKind.ESCALATING_BLOCKS:
        default = not spec.params.get("seed_targets") and spec.params.get("increment") == 1
        # every block has magnitude >= its (positive) target
        return AnalyticProperties(st_p=True, st_n=True, fixable=True if default else None)
    return AnalyticProperties()


# Spec documents

def spec_from_dict(data: Dict[str, Any]) -> SeriesSpec:
    """
    Build a spec from a series-spec document.

    Schema: {"kind": str, "params": object, "leading_zero": bool,
    "arithmetic": "exact" | "float"}; explicit_prefix may carry "terms" at the
    top level or inside "params". Rationals are "p/q" strings.
    """
    if not isinstance(data, dict):
        raise SpecSchemaError("series spec must be a JSON object")
    try:
        kind = SeriesKind(data.get("kind"))
    except ValueError:
        allowed = ", ".join(k.value for k in SeriesKind)
        raise SpecSchemaError(f"'kind' must be one of: {allowed}; got {data.get('kind')!r}")

    params = data.get("params", {})
    if not isinstance(params, dict):
        raise SpecSchemaError("'params' must be an object")

    leading_zero = data.get("leading_zero")
    if leading_zero is not None and not isinstance(leading_zero, bool):
        raise SpecSchemaError("'leading_zero' must be a boolean")

    try:
        arithmetic = ArithmeticMode(data.get("arithmetic", "exact"))
    except ValueError:
        raise SpecSchemaError("'arithmetic' must be 'exact' or 'float'")

    try:
        if kind is SeriesKind.SQUARE_BLOCKS:
            return make_square_blocks(_resolve_leading_zero(kind, params, leading_zero), arithmetic)
        if kind is SeriesKind.ESCALATING_BLOCKS:
            seeds = params.get("seed_targets")
            if seeds is not None and not isinstance(seeds, list):
                raise SpecSchemaError("'params.seed_targets' must be an array")
            return make_escalating_blocks(seeds, params.get("increment", 1),
                                          _resolve_leading_zero(kind, params, leading_zero),
                                          arithmetic)
        if kind is SeriesKind.CUSTOM_BLOCKS:
            pattern = params.get("pattern")
            if not isinstance(pattern, list) or not all(isinstance(b, list) for b in pattern):
                raise SpecSchemaError("'params.pattern' must be an array of arrays")
            return make_custom_blocks(pattern, params.get("scale", "harmonic"),
                                      leading_zero, arithmetic)
        terms = data.get("terms", params.get("terms"))
        if not isinstance(terms, list):
            raise SpecSchemaError("explicit_prefix needs a 'terms' array")
        return make_explicit_prefix(terms, leading_zero, arithmetic)
    except SpecSchemaError:
        raise
    except ValueError as e:
        raise SpecSchemaError(f"invalid {kind.value} parameters: {e}") from e


def spec_to_dict(spec: SeriesSpec) -> Dict[str, Any]:
    params: Dict[str, Any] = {}
    if spec.kind is SeriesKind.ESCALATING_BLOCKS:
        params = {"seed_targets": [format_scalar(t) for t in spec.params["seed_targets"]],
                  "increment": format_scalar(spec.params["increment"])}
    elif spec.kind is SeriesKind.CUSTOM_BLOCKS:
        params = {"pattern": [[format_scalar(v) for v in block] for block in spec.params["pattern"]],
                  "scale": spec.params["scale"]}
    elif spec.kind is SeriesKind.EXPLICIT_PREFIX:
        params = {"terms": [format_scalar(v) for v in spec.params["terms"]]}
    return {
        "kind": spec.kind.value,
        "params": params,
        "leading_zero": spec.leading_zero,
        "arithmetic": spec.arithmetic.value,
    }


def load_series_spec(path: str) -> SeriesSpec:
    """Load a series-spec JSON file."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise SpecSchemaError(f"{path}: not valid JSON ({e})") from e
    except OSError as e:
        raise SpecSchemaError(f"{path}: cannot read spec file ({e})") from e
    spec = spec_from_dict(data)
    logger.info(f"Loaded series spec {spec.describe()} from {path}")
    return spec


def dump_series_spec(spec: SeriesSpec, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(spec_to_dict(spec), f, indent=2, sort_keys=True)
        f.write("\n")


def builtin_spec(name: str, arithmetic: ArithmeticMode = ArithmeticMode.EXACT,
                 leading_zero: Optional[bool] = None) -> SeriesSpec:
    """Look up a built-in series by its command-line name."""
    builders = {
        "square-blocks": make_square_blocks,
        "escalating": make_escalating_blocks,
    }
    if name not in builders:
        raise ValueError(f"unknown built-in series {name!r}; choose from {', '.join(builders)}")
    spec = builders[name]()
    if leading_zero is not None:
        spec = spec.with_leading_zero(leading_zero)
    return spec.with_arithmetic(arithmetic)


def builtin_names() -> Tuple[str, ...]:
    return ("square-blocks", "escalating")
