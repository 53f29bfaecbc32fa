"""
File formats: CSV tables and JSON documents headed by the run configuration,
trace CSV import, and newline-delimited permutation files.

Every CSV starts with one comment line ``# run-config: {...}`` holding the
run configuration as sorted compact JSON; JSON documents carry the same
object under "run_config". Nothing time-dependent is written, so identical
runs produce identical bytes.
"""

import csv
import json
import logging
import os
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

from errors import TraceFormatError
from rearranger import RearrangementTrace, trace_from_indices
from series_core import SeriesSpec, format_scalar, parse_scalar

logger = logging.getLogger(__name__)

HEADER_PREFIX = "# run-config: "

TRACE_COLUMNS = ["step", "chosen_index", "term", "partial_sum", "block_count"]
TERM_COLUMNS = ["index", "term"]
BLOCK_COLUMNS = ["kind", "index", "start", "end", "block_sum", "partial_sum_at"]
PREFIX_COLUMNS = ["step", "chosen_index", "block_count"]
SANDWICH_COLUMNS = ["block", "block_end", "step", "lower", "value", "upper",
                    "block_form_lower", "block_form_upper", "outcome"]
SCAN_COLUMNS = ["kind", "k", "i0", "min_window", "argmin_i"]


def run_config_header(run_config: Dict[str, Any]) -> str:
    return HEADER_PREFIX + json.dumps(run_config, sort_keys=True, separators=(",", ":"),
                                      ensure_ascii=False)


def _ensure_parent(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def write_csv(path: str, rows: Iterable[Dict[str, str]], columns: Sequence[str],
              run_config: Dict[str, Any]) -> str:
    """Write rows under a run-config comment line; returns the path."""
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(run_config_header(run_config) + "\n")
        writer = csv.DictWriter(f, fieldnames=list(columns), lineterminator="\n")
        writer.writeheader()
        count = 0
        for row in rows:
            writer.writerow(row)
            count += 1
    logger.info(f"Wrote {count} rows to {path}")
    return path


def write_json(path: str, document: Dict[str, Any], run_config: Dict[str, Any]) -> str:
    _ensure_parent(path)
    payload = dict(document, run_config=run_config)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")
    logger.info(f"Wrote {path}")
    return path


def read_csv(path: str) -> Tuple[Optional[Dict[str, Any]], List[Dict[str, str]]]:
    """Read a CSV written by write_csv: (run config or None, rows)."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            lines = f.read().splitlines()
    except OSError as e:
        raise TraceFormatError(f"{path}: cannot read ({e})") from e

    run_config = None
    body = []
    for line in lines:
        if line.startswith(HEADER_PREFIX):
            try:
                run_config = json.loads(line[len(HEADER_PREFIX):])
            except json.JSONDecodeError as e:
                raise TraceFormatError(f"{path}: malformed run-config header ({e})") from e
        elif not line.startswith("#"):
            body.append(line)
    return run_config, list(csv.DictReader(body))


def term_rows(terms: Sequence[Any]) -> List[Dict[str, str]]:
    return [{"index": str(n), "term": format_scalar(v)} for n, v in enumerate(terms)]


def read_trace_csv(path: str, spec: SeriesSpec, target: Optional[Any] = None) -> RearrangementTrace:
    """
    Rebuild a trace from a trace CSV.

    Only the chosen indices are trusted: terms and partial sums are
    recomputed from the series, and recorded values that disagree are logged.
    The target comes from the argument, else from the run-config header.
    """
    run_config, rows = read_csv(path)
    if rows and "chosen_index" not in rows[0]:
        raise TraceFormatError(f"{path}: missing 'chosen_index' column")
    if target is None:
        target = (run_config or {}).get("target")
    if target is None:
        raise TraceFormatError(f"{path}: no target given and none recorded in the header")

    indices = []
    for line_no, row in enumerate(rows, start=3):
        try:
            indices.append(int(row["chosen_index"]))
        except (TypeError, ValueError) as e:
            raise TraceFormatError(f"{path}:{line_no}: bad chosen_index {row.get('chosen_index')!r}") from e

    truncated = bool((run_config or {}).get("truncated", False))
    try:
        trace = trace_from_indices(spec, target, indices, truncated=truncated)
    except ValueError as e:
        raise TraceFormatError(f"{path}: {e}") from e

    mismatches = 0
    for row, value, total in zip(rows, trace.terms, trace.partial_sums):
        for column, computed in (("term", value), ("partial_sum", total)):
            recorded = row.get(column)
            if recorded in (None, ""):
                continue
            try:
                same = parse_scalar(recorded, spec.arithmetic) == computed
            except ValueError:
                same = False
            if not same:
                mismatches += 1
    if mismatches:
        logger.warning(f"{path}: {mismatches} recorded values differ from the recomputed ones")
    logger.info(f"Imported trace of {len(trace)} steps from {path}")
    return trace


def read_permutation(path: str, one_based: bool = False) -> List[int]:
    """Read newline-delimited integers; blank lines and '#' comments are skipped."""
    shift = 1 if one_based else 0
    indices = []
    try:
        with open(path, "r", encoding="utf-8") as f:
            for line_no, line in enumerate(f, start=1):
                text = line.strip()
                if not text or text.startswith("#"):
                    continue
                try:
                    value = int(text) - shift
                except ValueError as e:
                    raise TraceFormatError(f"{path}:{line_no}: not an integer: {text!r}") from e
                if value < 0:
                    raise TraceFormatError(f"{path}:{line_no}: index {text} is out of range")
                indices.append(value)
    except OSError as e:
        raise TraceFormatError(f"{path}: cannot read ({e})") from e
    return indices


def write_permutation(indices: Iterable[int], path: str, one_based: bool = False) -> str:
    shift = 1 if one_based else 0
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8") as f:
        for idx in indices:
            f.write(f"{idx + shift}\n")
    return path
