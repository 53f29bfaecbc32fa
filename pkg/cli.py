#!/usr/bin/env python3
"""
Command line for the rearrangement toolkit.

Subcommands:
  generate   terms and block decomposition of a series prefix
  rearrange  greedy type R rearrangement toward a target, with summaries
  scan       substantial-property scans of both block kinds and a Z_R hint
  verify     type R and sandwich checks of a trace or permutation file

Every output starts with the run configuration; identical invocations in
exact mode write identical bytes.
"""

import argparse
import logging
import os
import sys
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional

from block_model import BlockKind, decompose_blocks, decompose_to_block_count
from config import ConfigManager, initialize_system
from errors import (ArithmeticOverflowError, BlockIndexError,
                    HorizonCapExceededError, InsufficientBlocksError,
                    SpecSchemaError, TraceFormatError, TypeRViolationError)
from exports import (BLOCK_COLUMNS, PREFIX_COLUMNS, SANDWICH_COLUMNS,
                     SCAN_COLUMNS, TERM_COLUMNS, TRACE_COLUMNS, read_csv,
                     read_permutation, read_trace_csv, term_rows, write_csv,
                     write_json, write_permutation)
from permutation_engine import verify_sandwich
from rearranger import (assess_fixing_evidence, greedy_rearrange,
                        summarize_trace, trace_from_indices)
from series_core import (ArithmeticMode, SeriesSpec, analytic_properties,
                         builtin_names, builtin_spec, format_scalar,
                         generate_prefix, load_series_spec, parse_scalar,
                         spec_from_dict, spec_to_dict)
from substantial_scanner import classify_zr_hint, scan_substantial

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_TRUNCATED = 3
EXIT_VERIFY = 4


@dataclass
class CommandResult:
    """Outcome of one subcommand."""
    exit_code: int = EXIT_OK
    outputs: Dict[str, str] = field(default_factory=dict)
    metadata: Dict[str, Any] = field(default_factory=dict)
    error: Optional[str] = None

    @property
    def success(self) -> bool:
        return self.exit_code == EXIT_OK


@dataclass
class RunConfig:
    """Everything a run depends on; echoed into every output file."""
    subcommand: str
    series: Optional[str] = None
    spec_path: Optional[str] = None
    arithmetic: Optional[str] = None
    leading_zero: Optional[bool] = None
    horizon: Optional[int] = None
    steps: Optional[int] = None
    target: Optional[str] = None
    outputs: Dict[str, str] = field(default_factory=dict)
    checkpoints: List[int] = field(default_factory=list)
    k_max: Optional[int] = None
    i0_grid: List[int] = field(default_factory=list)
    blocks: Optional[int] = None
    max_terms: Optional[int] = None
    horizon_cap: Optional[int] = None
    probe_target: Optional[str] = None
    probe_steps: Optional[int] = None
    no_probe: bool = False
    fixing_trace: Optional[str] = None
    trace_path: Optional[str] = None
    permutation_path: Optional[str] = None
    one_based: bool = False
    C: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rrearrange",
        description="Type R rearrangements of conditionally divergent series",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python cli.py generate --series square-blocks --horizon 20
  python cli.py rearrange --series square-blocks --target 0 --steps 10000
  python cli.py scan --series escalating --kmax 0 --blocks 50
  python cli.py verify --trace trace.csv
        """
    )
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                        help="Override the configured log level")
    parser.add_argument("--arithmetic", choices=[m.value for m in ArithmeticMode],
                        help="Arithmetic mode (default from configuration: exact)")
    lz = parser.add_mutually_exclusive_group()
    lz.add_argument("--leading-zero", dest="leading_zero", action="store_true", default=None,
                    help="Prepend a_0 = 0 to the series")
    lz.add_argument("--no-leading-zero", dest="leading_zero", action="store_false",
                    help="Never prepend a_0 = 0")

    sub = parser.add_subparsers(dest="command", required=True)

    def add_series(p: argparse.ArgumentParser, required: bool = True) -> None:
        group = p.add_mutually_exclusive_group(required=required)
        group.add_argument("--series", choices=builtin_names(), help="Built-in series")
        group.add_argument("--spec", dest="spec_path", help="Series-spec JSON file")
        p.add_argument("--out-dir", default=".", help="Directory for output files (default: .)")

    gen = sub.add_parser("generate", help="Write a series prefix and its blocks")
    add_series(gen)
    gen.add_argument("--horizon", type=positive_int, required=True, help="Number of terms")
    gen.add_argument("--terms-out", default="terms.csv")
    gen.add_argument("--blocks-out", default="blocks.csv")

    rea = sub.add_parser("rearrange", help="Greedy type R rearrangement toward a target")
    add_series(rea)
    rea.add_argument("--target", required=True, help="Target r as p/q or decimal")
    rea.add_argument("--steps", type=positive_int, required=True)
    rea.add_argument("--checkpoints", type=int_list, help="Comma-separated step counts")
    rea.add_argument("--horizon-cap", type=positive_int, help="Maximum generated terms")
    rea.add_argument("--trace-out", default="trace.csv")
    rea.add_argument("--summary-out", default="summary.json")
    rea.add_argument("--permutation-out", help="Also write the chosen indices, one per line")
    rea.add_argument("--block-numbers-out", help="Also write (step, chosen_index, block_count)")

    scan = sub.add_parser("scan", help="Scan window sums of both block kinds")
    add_series(scan)
    scan.add_argument("--blocks", type=positive_int, default=50,
                      help="Complete blocks of each kind to aim for (default: 50)")
    scan.add_argument("--kmax", dest="k_max", type=int, default=0)
    scan.add_argument("--i0", dest="i0_grid", type=int_list, help="Comma-separated i0 grid")
    scan.add_argument("--max-terms", type=positive_int, help="Term cap while growing the horizon")
    scan.add_argument("--probe-target", help="Run a greedy probe toward this target")
    scan.add_argument("--probe-steps", type=positive_int)
    scan.add_argument("--no-probe", action="store_true", help="Skip the greedy probe")
    scan.add_argument("--fixing-trace", help="Trace CSV used as fixing evidence")
    scan.add_argument("--report-out", default="scan.json")
    scan.add_argument("--table-out", default="scan.csv")

    ver = sub.add_parser("verify", help="Check a trace for type R and the sandwich inequality")
    add_series(ver, required=False)
    source = ver.add_mutually_exclusive_group(required=True)
    source.add_argument("--trace", dest="trace_path", help="Trace CSV")
    source.add_argument("--permutation", dest="permutation_path",
                        help="Newline-delimited chosen indices")
    ver.add_argument("--one-based", action="store_true", help="Permutation file is 1-based")
    ver.add_argument("--target", help="Target r (default: from the trace header, else 0)")
    ver.add_argument("--C", dest="C", type=positive_int,
                     help="Block number bound (default: observed maximum)")
    ver.add_argument("--horizon", type=positive_int, help="Decomposition horizon")
    ver.add_argument("--report-out", default="verify.csv")
    ver.add_argument("--summary-out", default="verify.json")
    return parser


OUTPUT_FLAGS = ("terms_out", "blocks_out", "trace_out", "summary_out", "permutation_out",
                "block_numbers_out", "report_out", "table_out")


def run_config_from_args(args: argparse.Namespace, manager: ConfigManager) -> RunConfig:
    outputs = {}
    for name in OUTPUT_FLAGS:
        value = getattr(args, name, None)
        if value:
            outputs[name] = os.path.join(args.out_dir, value)
    return RunConfig(
        subcommand=args.command,
        series=getattr(args, "series", None),
        spec_path=getattr(args, "spec_path", None),
        arithmetic=args.arithmetic,
        leading_zero=args.leading_zero,
        horizon=getattr(args, "horizon", None),
        steps=getattr(args, "steps", None),
        target=getattr(args, "target", None),
        outputs=outputs,
        checkpoints=getattr(args, "checkpoints", None) or [],
        k_max=getattr(args, "k_max", None),
        i0_grid=getattr(args, "i0_grid", None) or [],
        blocks=getattr(args, "blocks", None),
        max_terms=getattr(args, "max_terms", None),
        horizon_cap=getattr(args, "horizon_cap", None),
        probe_target=getattr(args, "probe_target", None),
        probe_steps=getattr(args, "probe_steps", None),
        no_probe=getattr(args, "no_probe", False),
        fixing_trace=getattr(args, "fixing_trace", None),
        trace_path=getattr(args, "trace_path", None),
        permutation_path=getattr(args, "permutation_path", None),
        one_based=getattr(args, "one_based", False),
        C=getattr(args, "C", None),
    )


def resolve_spec(rc: RunConfig, manager: ConfigManager,
                 recorded: Optional[Dict[str, Any]] = None) -> SeriesSpec:
    """
    Series for a run: a built-in by name, a spec file, or the spec recorded
    in an input file's header. Built-ins use the configured arithmetic; spec
    documents keep their own. --arithmetic and the leading-zero flags apply
    on top of either.
    """
    if rc.series:
        mode = ArithmeticMode(rc.arithmetic or manager.get_arithmetic_config().mode)
        return builtin_spec(rc.series, mode, rc.leading_zero)
    if rc.spec_path:
        spec = load_series_spec(rc.spec_path)
    elif recorded and recorded.get("series_spec"):
        spec = spec_from_dict(recorded["series_spec"])
    else:
        raise SpecSchemaError("no series given: use --series or --spec")
    if rc.leading_zero is not None:
        spec = spec.with_leading_zero(rc.leading_zero)
    if rc.arithmetic:
        spec = spec.with_arithmetic(ArithmeticMode(rc.arithmetic))
    return spec


def _header(rc: RunConfig, spec: SeriesSpec, **extra: Any) -> Dict[str, Any]:
    header = rc.to_dict()
    header["series_spec"] = spec_to_dict(spec)
    header.update(extra)
    return header


def cmd_generate(rc: RunConfig, manager: ConfigManager) -> CommandResult:
    spec = resolve_spec(rc, manager)
    terms = generate_prefix(spec, rc.horizon)
    decomp = decompose_blocks(spec, rc.horizon)
    header = _header(rc, spec)

    write_csv(rc.outputs["terms_out"], term_rows(terms), TERM_COLUMNS, header)
    write_csv(rc.outputs["blocks_out"], decomp.to_rows(), BLOCK_COLUMNS, header)

    complete = {k.value: decomp.complete_count(k) for k in BlockKind}
    print(f"{spec.describe()}: {rc.horizon} terms, "
          f"{complete['P']} P / {complete['N']} N complete blocks")
    return CommandResult(EXIT_OK, {"terms": rc.outputs["terms_out"], "blocks": rc.outputs["blocks_out"]},
                         {"complete_blocks": complete})


def cmd_rearrange(rc: RunConfig, manager: ConfigManager) -> CommandResult:
    spec = resolve_spec(rc, manager)
    rearrange_config = manager.get_rearrange_config()
    if rc.horizon_cap:
        rearrange_config = replace(rearrange_config, horizon_cap=rc.horizon_cap,
                                   initial_horizon=min(rearrange_config.initial_horizon, rc.horizon_cap))

    target = parse_scalar(rc.target, spec.arithmetic)
    trace = greedy_rearrange(spec, target, rc.steps, rearrange_config)
    checkpoints = rc.checkpoints or [c for c in rearrange_config.default_checkpoints if c <= len(trace)]
    summary = summarize_trace(trace, checkpoints)
    header = _header(rc, spec, truncated=trace.truncated)

    outputs = {
        "trace": write_csv(rc.outputs["trace_out"], trace.to_rows(), TRACE_COLUMNS, header),
        "summary": write_json(rc.outputs["summary_out"], summary, header),
    }
    if "permutation_out" in rc.outputs:
        outputs["permutation"] = write_permutation(trace.indices, rc.outputs["permutation_out"])
    if "block_numbers_out" in rc.outputs:
        outputs["block_numbers"] = write_csv(rc.outputs["block_numbers_out"],
                                             trace.prefix().block_number_rows(), PREFIX_COLUMNS, header)

    print(f"steps={len(trace)} max_block_number={trace.max_block_number} "
          f"switches={len(trace.sign_switches)} truncated={str(trace.truncated).lower()}")
    if trace.truncated:
        return CommandResult(EXIT_TRUNCATED, outputs, summary,
                             "a sign pool ran out within the horizon cap; trace truncated")
    return CommandResult(EXIT_OK, outputs, summary)


def _fixing_evidence(rc: RunConfig, spec: SeriesSpec, manager: ConfigManager) -> Dict[str, Any]:
    if rc.fixing_trace:
        trace = read_trace_csv(rc.fixing_trace, spec)
        source = "trace"
    else:
        scan_config = manager.get_scan_config()
        probe = rc.probe_target
        if probe is None and spec.is_builtin:
            probe = scan_config.probe_target
        if rc.no_probe or probe is None:
            return {"source": "none", "evidence": False}
        steps = rc.probe_steps or scan_config.probe_steps
        trace = greedy_rearrange(spec, probe, steps, manager.get_rearrange_config())
        source = "probe"
    return {
        "source": source,
        "target": format_scalar(trace.target),
        "steps": len(trace),
        "max_block_number": trace.max_block_number,
        "truncated": trace.truncated,
        "evidence": assess_fixing_evidence(trace),
    }


def cmd_scan(rc: RunConfig, manager: ConfigManager) -> CommandResult:
    spec = resolve_spec(rc, manager)
    scan_config = manager.get_scan_config()
    max_terms = rc.max_terms or scan_config.max_terms
    decomp = decompose_to_block_count(spec, rc.blocks, max_terms,
                                      manager.get_rearrange_config().initial_horizon,
                                      scan_config.stall_doublings)
    known = analytic_properties(spec)

    reports = {}
    for kind, flag in ((BlockKind.P, known.st_p), (BlockKind.N, known.st_n)):
        reports[kind] = scan_substantial(decomp, kind, rc.k_max, rc.i0_grid or None,
                                         scan_config, flag)

    evidence = _fixing_evidence(rc, spec, manager)
    hint = classify_zr_hint(reports[BlockKind.P], reports[BlockKind.N], evidence["evidence"])
    document = {
        "horizon_terms": decomp.horizon,
        "P": reports[BlockKind.P].to_dict(),
        "N": reports[BlockKind.N].to_dict(),
        "fixing_evidence": evidence,
        "zr_hint": hint.to_dict(),
    }
    header = _header(rc, spec)
    rows = reports[BlockKind.P].to_rows() + reports[BlockKind.N].to_rows()
    outputs = {
        "report": write_json(rc.outputs["report_out"], document, header),
        "table": write_csv(rc.outputs["table_out"], rows, SCAN_COLUMNS, header),
    }

    for kind, report in reports.items():
        print(f"{kind.value}: {report.verdict.value} over {report.horizon_blocks} blocks")
    print(str(hint))
    return CommandResult(EXIT_OK, outputs, document)


def cmd_verify(rc: RunConfig, manager: ConfigManager) -> CommandResult:
    if rc.trace_path:
        recorded, _ = read_csv(rc.trace_path)
        spec = resolve_spec(rc, manager, recorded)
        trace = read_trace_csv(rc.trace_path, spec, rc.target)
    else:
        spec = resolve_spec(rc, manager)
        indices = read_permutation(rc.permutation_path, rc.one_based)
        try:
            trace = trace_from_indices(spec, rc.target or "0", indices)
        except ValueError as e:
            raise TraceFormatError(f"{rc.permutation_path}: {e}") from e
    if not len(trace):
        raise TraceFormatError("trace has no steps")

    header = _header(rc, spec)
    check = trace.type_r_check()
    if not check.ok:
        summary = {"type_r": False, "witness": list(check.witness), "indices": list(check.indices)}
        write_json(rc.outputs["summary_out"], summary, header)
        print(f"not type R: positions {check.witness[0]} and {check.witness[1]} "
              f"choose indices {check.indices[0]} then {check.indices[1]}")
        return CommandResult(EXIT_VERIFY, {"summary": rc.outputs["summary_out"]}, summary,
                             str(TypeRViolationError(check.witness, check.indices)))

    C = rc.C if rc.C is not None else trace.max_block_number
    horizon = max(rc.horizon or 0, 2 * (max(trace.indices) + 1))
    decomp = decompose_blocks(spec, horizon)
    tolerance = manager.get_arithmetic_config().float_tolerance
    report = verify_sandwich(trace, decomp, C, tolerance)
    rule = trace.rule_violation()

    summary = dict(report.to_dict(), type_r=True, steps=len(trace),
                   max_block_number=trace.max_block_number, rule_violation=rule)
    outputs = {
        "report": write_csv(rc.outputs["report_out"], [row.to_row() for row in report.rows],
                            SANDWICH_COLUMNS, header),
        "summary": write_json(rc.outputs["summary_out"], summary, header),
    }
    print(f"type R: yes; C={C}; pass={summary['pass']} fail={summary['fail']} "
          f"unverifiable={summary['unverifiable']}")
    if not report.passed:
        return CommandResult(EXIT_VERIFY, outputs, summary,
                             f"sandwich inequality fails on {summary['fail']} blocks")
    return CommandResult(EXIT_OK, outputs, summary)


COMMANDS: Dict[str, Callable[[RunConfig, ConfigManager], CommandResult]] = {
    "generate": cmd_generate,
    "rearrange": cmd_rearrange,
    "scan": cmd_scan,
    "verify": cmd_verify,
}


def execute(rc: RunConfig, manager: ConfigManager) -> CommandResult:
    """Run one subcommand, turning toolkit errors into exit codes."""
    try:
        return COMMANDS[rc.subcommand](rc, manager)
    except (SpecSchemaError, TraceFormatError) as e:
        return CommandResult(EXIT_USAGE, error=str(e))
    except (HorizonCapExceededError, InsufficientBlocksError) as e:
        return CommandResult(EXIT_TRUNCATED, error=str(e))
    except TypeRViolationError as e:
        return CommandResult(EXIT_VERIFY, error=str(e))
    except (ValueError, BlockIndexError, ArithmeticOverflowError) as e:
        return CommandResult(EXIT_USAGE, error=str(e))


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        manager = initialize_system(args.config, log_level=args.log_level)
    except (OSError, ValueError) as e:
        print(f"error: cannot load configuration: {e}", file=sys.stderr)
        return EXIT_USAGE

    rc = run_config_from_args(args, manager)
    logger.info(f"Running {rc.subcommand}")
    result = execute(rc, manager)
    if result.error:
        print(f"error: {result.error}", file=sys.stderr)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
