"""Destructive state transitions and precondition checking.

The current state is a plain set of unstamped ground fluents.  A
transition removes every fluent terminated by the event set and then adds
every initiated one, so a fluent both terminated and initiated ends up
present.  Untouched fluents persist with no frame axioms in sight.

Post entries can match the event set exactly (the literal reading) or by
inclusion (an entry keyed {e} fires inside any larger concurrent set).
Inclusion is the default; the examples that write singleton keys mean
them that way.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

from .model import Frame, conjunction_solutions, formula_true
from .syntax import (
    Binding,
    CausalTheory,
    Framework,
    GroundAtom,
    KelpsError,
    PreSentence,
    format_ground_atom,
)

SUBSET = "subset"
EXACT = "exact"
MATCH_MODES = (SUBSET, EXACT)


@dataclass(frozen=True)
class EventSet:
    """Concurrent events of one transition, partitioned by origin."""

    ext: frozenset = frozenset()
    acts: frozenset = frozenset()

    @property
    def all(self) -> frozenset:
        return self.ext | self.acts

    def __bool__(self) -> bool:
        return bool(self.ext or self.acts)


def entry_fires(key: frozenset, events: frozenset, mode: str = SUBSET) -> bool:
    if mode == SUBSET:
        return key <= events
    if mode == EXACT:
        return key == events
    raise KelpsError(f"unknown match mode {mode!r}")


def succ(state: frozenset, events: frozenset, causal: CausalTheory,
         mode: str = SUBSET) -> frozenset:
    """The successor state: terminated fluents out, initiated fluents in."""
    terminated = {e.fluent for e in causal.terminates if entry_fires(e.key, events, mode)}
    initiated = {e.fluent for e in causal.initiates if entry_fires(e.key, events, mode)}
    return frozenset((state - terminated) | initiated)


# ---------------------------------------------------------------------------
# Precondition checking
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PreViolation:
    sentence: str
    binding: tuple  # sorted (var, value) pairs

    def __str__(self) -> str:
        b = ", ".join(f"{k}={v}" for k, v in self.binding)
        return f"{self.sentence} violated with {{{b}}}"


def check_preconditions(prev_frame: Frame, new_events: frozenset,
                        fw: Framework) -> list:
    """Denials violated by the transition out of ``prev_frame``.

    A denial ``current(T-1) & events(T) -> false`` is violated when some
    grounding makes its body true with T-1 read in ``prev_frame`` and T
    read against the incoming event set.  The returned list is empty
    exactly when every precondition sentence holds.
    """
    new_frame = Frame(prev_frame.t + 1, fw.aux | frozenset(new_events))
    violations: list = []
    for pre in fw.causal.pre:
        for b in _pre_body_solutions(pre, prev_frame, new_frame, fw):
            violations.append(PreViolation(pre.name, tuple(sorted(b.items()))))
    return violations


def _pre_body_solutions(pre: PreSentence, prev_frame: Frame, new_frame: Frame,
                        fw: Framework) -> list:
    results: list = [{pre.now: new_frame.t}]
    for cond in pre.body.conditions:
        if cond.time is not None and cond.time.shift == -1:
            frame = prev_frame
        else:
            frame = new_frame
        results = [ext for b in results
                   for ext in conjunction_solutions([cond], frame, b, fw)]
        if not results:
            return []
    if pre.body.constraints:
        from .model import constraint_closure
        kept = []
        for b in results:
            ok, _, _, open_ = constraint_closure(pre.body.constraints, b)
            if ok and not open_:
                kept.append(b)
        results = kept
    return results


# ---------------------------------------------------------------------------
# Trace consistency
# ---------------------------------------------------------------------------

def trace_consistent(trace, fw: Framework, mode: str = SUBSET) -> list:
    """Deviations of a trace from the framework's transition function.

    Every state must equal the successor of its predecessor under the
    framework's post entries, and the initial state must match.
    """
    problems = []
    if trace.states[0] != fw.initial:
        problems.append("initial state differs from the framework's")
    for i in range(trace.horizon):
        want = succ(trace.states[i], trace.events_at(i + 1), fw.causal, mode)
        if trace.states[i + 1] != want:
            missing = sorted(want - trace.states[i + 1])
            extra = sorted(trace.states[i + 1] - want)
            detail = []
            if missing:
                detail.append("missing " + ", ".join(map(format_ground_atom, missing)))
            if extra:
                detail.append("extra " + ", ".join(map(format_ground_atom, extra)))
            problems.append(f"state at {i + 1} is not the successor of state "
                            f"at {i}: {'; '.join(detail)}")
    return problems
