"""Reactive rule frameworks: parse, run, explore, verify."""

from .engine import (
    DeterministicStrategy,
    Engine,
    ExploreResult,
    RandomStrategy,
    RunResult,
    ScriptedStrategy,
    Strategy,
    explore,
    make_strategy,
    run,
)
from .model import (
    Frame,
    Trace,
    complex_true,
    eval_condition,
    rule_true,
    trace_from_jsonl,
    trace_to_jsonl,
)
from .parser import ParseError, load_events, load_framework, parse_events, parse_framework
from .state import EventSet, check_preconditions, succ, trace_consistent
from .syntax import (
    Framework,
    KelpsError,
    Rule,
    ValidationReport,
    bare_actions,
    format_framework,
    validate_framework,
)
from .temporal import admits_sequencing, eval_ground_constraints, satisfiable
from .verify import (
    OracleResult,
    ReactivityReport,
    SupportWitness,
    check_frame_axioms,
    check_reactive,
    check_theorems,
    enumerate_reactive_oracle,
    find_support,
)

__version__ = "0.1.0"

__all__ = [
    "DeterministicStrategy",
    "Engine",
    "EventSet",
    "ExploreResult",
    "Frame",
    "Framework",
    "KelpsError",
    "OracleResult",
    "ParseError",
    "RandomStrategy",
    "ReactivityReport",
    "Rule",
    "RunResult",
    "ScriptedStrategy",
    "Strategy",
    "SupportWitness",
    "Trace",
    "ValidationReport",
    "admits_sequencing",
    "bare_actions",
    "check_frame_axioms",
    "check_preconditions",
    "check_reactive",
    "check_theorems",
    "complex_true",
    "enumerate_reactive_oracle",
    "eval_condition",
    "eval_ground_constraints",
    "explore",
    "find_support",
    "format_framework",
    "load_events",
    "load_framework",
    "make_strategy",
    "parse_events",
    "parse_framework",
    "rule_true",
    "run",
    "satisfiable",
    "succ",
    "trace_consistent",
    "trace_from_jsonl",
    "trace_to_jsonl",
    "validate_framework",
]
