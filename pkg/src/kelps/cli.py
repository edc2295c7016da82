"""Command-line front end: run, explore, verify.

Exit codes: 0 ok, 1 verdict failure, 2 parse error, 3 validation error,
4 precondition halt, 5 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import engine, verify
from .model import trace_from_jsonl, trace_to_jsonl
from .parser import ParseError, load_events, load_framework
from .state import EXACT, SUBSET
from .syntax import KelpsError, validate_framework

EXIT_OK = 0
EXIT_VERDICT = 1
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_PRECONDITION = 4
EXIT_CAP = 5


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--horizon", type=int, default=5, metavar="N",
                   help="number of cycles to run (default 5)")
    p.add_argument("--match", choices=(SUBSET, EXACT), default=SUBSET,
                   help="post-entry matching mode (default subset)")


def _onoff(value: str) -> bool:
    if value not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return value == "on"


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="kelps",
        description="Run, explore and verify reactive rule frameworks.")
    sub = top.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one trace of a framework")
    p_run.add_argument("framework", type=Path)
    p_run.add_argument("events", type=Path)
    _common_flags(p_run)
    p_run.add_argument("--strategy", default="det",
                       help="det | rand:<seed> | script:<path> (default det)")
    p_run.add_argument("--prune", type=_onoff, default=True, metavar="on|off",
                       help="drop timed-out rules and clauses (default on)")
    p_run.add_argument("--dedup-step2", type=_onoff, default=False,
                       metavar="on|off",
                       help="close goal trees once achieved (default off)")
    p_run.add_argument("--out", type=Path, default=None,
                       help="trace output path (default stdout)")
    p_run.add_argument("--report", type=Path, default=None,
                       help="goal-forest report path (JSON)")
    p_run.add_argument("--script-out", type=Path, default=None,
                       help="record the choices taken, for replay")

    p_exp = sub.add_parser("explore", help="enumerate all reachable traces")
    p_exp.add_argument("framework", type=Path)
    p_exp.add_argument("events", type=Path)
    _common_flags(p_exp)
    p_exp.add_argument("--workers", type=int, default=1, metavar="N",
                       help="parallel workers for the search (default 1)")
    p_exp.add_argument("--max-branches", type=int, default=100000, metavar="N",
                       help="search cap; exceeding it flags the output")
    p_exp.add_argument("--out", type=Path, default=None,
                       help="directory for trace files and the summary")

    p_ver = sub.add_parser("verify", help="check a trace or the theorems")
    p_ver.add_argument("framework", type=Path)
    p_ver.add_argument("trace", type=Path, nargs="?", default=None)
    p_ver.add_argument("--mode", required=True,
                       choices=("reactive", "rules", "frame", "theorems"))
    _common_flags(p_ver)
    p_ver.add_argument("--events", type=Path, default=None,
                       help="external events (theorems mode)")
    p_ver.add_argument("--workers", type=int, default=1, metavar="N")
    p_ver.add_argument("--max-branches", type=int, default=100000, metavar="N")
    p_ver.add_argument("--out", type=Path, default=None,
                       help="report output path (default stdout)")
    return top


def _load(args) -> tuple:
    fw = load_framework(args.framework)
    report = validate_framework(fw)
    if not report.ok:
        print(str(report), file=sys.stderr)
        raise _Exit(EXIT_VALIDATION)
    return fw, report


class _Exit(Exception):
    def __init__(self, code: int):
        self.code = code


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def cmd_run(args) -> int:
    fw, _ = _load(args)
    ext = load_events(args.events, fw)
    if args.strategy == "exhaustive":
        print("exhaustive choice is what 'explore' does; use that command",
              file=sys.stderr)
        raise _Exit(EXIT_PARSE)
    strategy = engine.make_strategy(args.strategy)
    result = engine.run(fw, ext, args.horizon, strategy=strategy,
                        match_mode=args.match, prune=args.prune,
                        dedup_step2=args.dedup_step2)
    _emit(trace_to_jsonl(result.trace), args.out)
    if args.report is not None:
        args.report.write_text(
            json.dumps(result.goal_report(), indent=2) + "\n", encoding="utf-8")
    if args.script_out is not None:
        args.script_out.write_text(
            json.dumps(result.script, indent=2) + "\n", encoding="utf-8")
    if result.halted:
        print(f"precondition violation at time {result.halted['time']}: "
              + "; ".join(result.halted["violations"]), file=sys.stderr)
        return EXIT_PRECONDITION
    return EXIT_OK


def cmd_explore(args) -> int:
    fw, _ = _load(args)
    ext = load_events(args.events, fw)
    result = engine.explore(fw, ext, args.horizon, match_mode=args.match,
                            max_branches=args.max_branches,
                            workers=args.workers)
    from .syntax import format_ground_atom
    summary = {
        "traces": len(result.traces),
        "halted": len(result.halted),
        "complete": result.complete,
        "action_sets": [
            [f"{format_ground_atom(a)}@{t}" for t in range(1, tr.horizon + 1)
             for a in sorted(tr.acts[t])]
            for tr in result.traces
        ],
    }
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        for i, tr in enumerate(result.traces):
            (args.out / f"trace_{i:04d}.jsonl").write_text(
                trace_to_jsonl(tr), encoding="utf-8")
        (args.out / "summary.json").write_text(
            json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    else:
        sys.stdout.write(json.dumps(summary, indent=2) + "\n")
    if not result.complete:
        print("search cap exceeded; output is partial", file=sys.stderr)
        return EXIT_CAP
    return EXIT_OK


def cmd_verify(args) -> int:
    fw, _ = _load(args)
    if args.mode == "theorems":
        if args.events is None:
            print("theorems mode needs --events", file=sys.stderr)
            raise _Exit(EXIT_PARSE)
        ext = load_events(args.events, fw)
        report = verify.check_theorems(fw, ext, args.horizon,
                                       match_mode=args.match,
                                       max_branches=args.max_branches,
                                       workers=args.workers)
        _emit(json.dumps(report.as_dict(), indent=2) + "\n", args.out)
        if not report.complete:
            return EXIT_CAP
        return EXIT_OK if report.ok else EXIT_VERDICT

    if args.trace is None:
        print("this mode needs a trace file", file=sys.stderr)
        raise _Exit(EXIT_PARSE)
    trace = trace_from_jsonl(args.trace.read_text(encoding="utf-8"), fw)
    if args.mode == "frame":
        report = verify.check_frame_axioms(trace, fw, args.match)
        _emit(json.dumps(report.as_dict(), indent=2) + "\n", args.out)
        return EXIT_OK if report.ok else EXIT_VERDICT
    full = verify.check_reactive(trace, fw, args.match)
    if args.mode == "rules":
        rules = {
            "ok": all(v.holds for v in full.rule_verdicts),
            "rules": full.as_dict()["rules"],
        }
        _emit(json.dumps(rules, indent=2) + "\n", args.out)
        return EXIT_OK if rules["ok"] else EXIT_VERDICT
    _emit(json.dumps(full.as_dict(), indent=2) + "\n", args.out)
    return EXIT_OK if full.reactive_model else EXIT_VERDICT


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"run": cmd_run, "explore": cmd_explore, "verify": cmd_verify}
    try:
        return handlers[args.command](args)
    except _Exit as e:
        return e.code
    except ParseError as e:
        print(f"parse error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except FileNotFoundError as e:
        print(f"cannot read {e.filename}", file=sys.stderr)
        return EXIT_PARSE
    except KelpsError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
