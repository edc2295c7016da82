"""Checkers for the semantic guarantees, plus a brute-force oracle.

The central notion: an action occurrence is *supported* when it
instantiates a bare action atom of some rule whose antecedent and chosen
earlier conditions already hold strictly before the action's time, with
the rule's temporal constraints still satisfiable for the remainder.  A
trace is a reactive interpretation when every action is supported and no
precondition denial fires; a reactive model additionally makes every
rule true.

:func:`enumerate_reactive_oracle` rebuilds that definition by sheer
enumeration over all assignments of ground action subsets to times,
fully independent of the engine's cycle, which makes it a second route
for the generated-traces-are-exactly-the-reactive-interpretations
theorems (:func:`check_theorems`).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Optional

from . import temporal
from .engine import ExploreResult, explore
from .model import (
    Frame,
    RuleVerdict,
    Trace,
    complex_groundings,
    rule_true,
)
from .state import (
    SUBSET,
    check_preconditions,
    entry_fires,
    succ,
    trace_consistent,
)
from .syntax import (
    Atom,
    Binding,
    Complex,
    Const,
    Framework,
    GroundAtom,
    KelpsError,
    Var,
    bare_actions,
    format_ground_atom,
    format_stamped,
    subst_complex,
    time_bound,
)


# ---------------------------------------------------------------------------
# Support witnesses
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SupportWitness:
    """Certificate that a rule instance supports an action occurrence."""

    action: GroundAtom
    time: int
    rule: str
    disjunct: int
    act_index: int
    earlier: tuple        # disjunct condition indices evaluated before the act
    rest: tuple           # the remaining disjunct condition indices
    sigma: tuple          # canonical grounding of antecedent+earlier+act vars
    sequencing: tuple     # canonical completion for the rest's time variables

    def as_dict(self) -> dict:
        return {
            "action": format_stamped(self.action, self.time),
            "rule": self.rule,
            "disjunct": self.disjunct,
            "act_index": self.act_index,
            "earlier": list(self.earlier),
            "rest": list(self.rest),
            "sigma": {k: v for k, v in self.sigma},
            "sequencing": {k: v for k, v in self.sequencing},
        }


def _unify_action(atom: Atom, action: GroundAtom, t: int) -> Optional[Binding]:
    if atom.pred != action[0] or len(atom.args) != len(action[1]):
        return None
    b: Binding = {}
    for pat, val in zip(atom.args, action[1]):
        if isinstance(pat, Const):
            if pat.name != val:
                return None
        else:
            if b.get(pat.name, val) != val:
                return None
            b[pat.name] = val
    te = atom.time
    if te is None:
        return None
    if te.var is None:
        if te.shift != t:
            return None
    else:
        want = t - te.shift
        if want < 0 or b.get(te.var, want) != want:
            return None
        b[te.var] = want
    return b


def find_support(action: GroundAtom, t: int, trace: Trace, fw: Framework,
                 bound: Optional[int] = None) -> Optional[SupportWitness]:
    """The first support witness for an action occurrence, or None.

    Search order is deterministic: rules in program order, bare-action
    occurrences and earlier/rest splits in declaration order, groundings
    lexicographically.  The antecedent and earlier conditions are
    evaluated against the strict prefix before ``t``; the rest only needs
    a satisfiable schedule at or after ``t`` and may never come true.
    """
    if bound is None:
        bound = time_bound(fw, trace.horizon)
    before = trace.prefix(t - 1)
    for rule in fw.rules:
        for ba in bare_actions(rule, fw):
            seed = _unify_action(ba.atom, action, t)
            if seed is None:
                continue
            disjunct = rule.consequents[ba.disjunct]
            for earlier_idx, rest_idx in ba.splits:
                conds = tuple(rule.antecedent.conditions) + tuple(
                    disjunct.conditions[j] for j in earlier_idx)
                probe = Complex(conds, ())
                for sigma in complex_groundings(probe, before, seed, fw):
                    earlier_cx = subst_complex(probe, sigma)
                    later_cx = subst_complex(
                        Complex(
                            (disjunct.conditions[ba.index],)
                            + tuple(disjunct.conditions[j] for j in rest_idx),
                            rule.antecedent.constraints + disjunct.constraints,
                        ),
                        sigma,
                    )
                    witness = temporal.admits_sequencing(
                        earlier_cx, later_cx, strict=True, partial={},
                        horizon=bound)
                    if witness is not None:
                        return SupportWitness(
                            action=action, time=t, rule=rule.name,
                            disjunct=ba.disjunct, act_index=ba.index,
                            earlier=earlier_idx, rest=rest_idx,
                            sigma=tuple(sorted(sigma.items())),
                            sequencing=tuple(sorted(witness.items())))
    return None


# ---------------------------------------------------------------------------
# Reactivity
# ---------------------------------------------------------------------------

@dataclass
class ReactivityReport:
    supported: list = field(default_factory=list)     # SupportWitness
    unsupported: list = field(default_factory=list)   # (action, time)
    pre_violations: list = field(default_factory=list)  # (time, PreViolation)
    rule_verdicts: list = field(default_factory=list)   # RuleVerdict

    @property
    def pre_ok(self) -> bool:
        return not self.pre_violations

    @property
    def reactive_interpretation(self) -> bool:
        return not self.unsupported and self.pre_ok

    @property
    def reactive_model(self) -> bool:
        return (self.reactive_interpretation
                and all(v.holds for v in self.rule_verdicts))

    def as_dict(self) -> dict:
        return {
            "reactive_interpretation": self.reactive_interpretation,
            "reactive_model": self.reactive_model,
            "unsupported": [format_stamped(a, t) for a, t in self.unsupported],
            "witnesses": [w.as_dict() for w in self.supported],
            "pre_violations": [
                {"time": t, "detail": str(v)} for t, v in self.pre_violations
            ],
            "rules": [
                {"rule": v.rule, "status": v.status,
                 "countermodel": dict(v.countermodel) if v.countermodel else None}
                for v in self.rule_verdicts
            ],
        }


def trace_pre_violations(trace: Trace, fw: Framework) -> list:
    out = []
    for i in range(trace.horizon):
        for v in check_preconditions(trace.frame(i), trace.events_at(i + 1), fw):
            out.append((i + 1, v))
    return out


def check_reactive(trace: Trace, fw: Framework,
                   match_mode: str = SUBSET) -> ReactivityReport:
    """Full reactivity verdict for a trace against a framework.

    Raises on traces inconsistent with the framework's transition
    function; reports per-action support, precondition violations and
    per-rule truth.
    """
    problems = trace_consistent(trace, fw, match_mode)
    if problems:
        raise KelpsError("trace/framework mismatch: " + "; ".join(problems))
    report = ReactivityReport()
    bound = time_bound(fw, trace.horizon)
    for action, t in trace.all_actions():
        witness = find_support(action, t, trace, fw, bound)
        if witness is None:
            report.unsupported.append((action, t))
        else:
            report.supported.append(witness)
    report.pre_violations = trace_pre_violations(trace, fw)
    report.rule_verdicts = [rule_true(r, trace, fw) for r in fw.rules]
    return report


# ---------------------------------------------------------------------------
# Frame axioms
# ---------------------------------------------------------------------------

@dataclass
class FrameAxiomReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def as_dict(self) -> dict:
        return {
            "ok": self.ok,
            "violations": [
                {"time": t, "fluent": format_ground_atom(p), "axiom": which}
                for t, p, which in self.violations
            ],
        }


def check_frame_axioms(trace: Trace, fw: Framework,
                       match_mode: str = SUBSET) -> FrameAxiomReport:
    """Both persistence conjuncts at every step, for every ground fluent.

    Checked directly against the post entries, not via the transition
    function, so hand-built traces that merely claim to follow it are
    caught: an initiated fluent must hold next, and a held fluent not
    terminated must persist.
    """
    report = FrameAxiomReport()
    fluents = fw.fluent_alphabet()
    for i in range(trace.horizon):
        ev = trace.events_at(i + 1)
        initiated = {e.fluent for e in fw.causal.initiates
                     if entry_fires(e.key, ev, match_mode)}
        terminated = {e.fluent for e in fw.causal.terminates
                      if entry_fires(e.key, ev, match_mode)}
        after = trace.states[i + 1]
        for p in fluents:
            if p in initiated and p not in after:
                report.violations.append((i + 1, p, "initiation"))
            if p in trace.states[i] and p not in terminated and p not in after:
                report.violations.append((i + 1, p, "persistence"))
    return report


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------

@dataclass
class OracleResult:
    traces: list                 # reactive interpretations
    model_flags: dict            # acts_key -> is reactive model
    complete: bool
    explored: int

    def acts_keys(self) -> set:
        return {t.acts_key() for t in self.traces}


def enumerate_reactive_oracle(fw: Framework, ext_trace: dict, horizon: int,
                              match_mode: str = SUBSET,
                              max_assignments: int = 500000) -> OracleResult:
    """All reactive interpretations, by enumeration over action subsets.

    Assigns every subset of the ground action alphabet to every time,
    rebuilds states with the transition function, and keeps exactly the
    assignments whose actions are all supported and whose preconditions
    hold.  Support only ever depends on the strict prefix before the
    action, so violating prefixes prune their whole subtree.
    """
    alphabet = fw.action_alphabet()
    bound = time_bound(fw, horizon)
    kept: list = []
    counter = {"n": 0, "complete": True}

    def rec(states: tuple, exts: tuple, acts: tuple, t: int) -> None:
        if t > horizon:
            kept.append(Trace(fw.aux, states, exts, acts))
            return
        ext_t = ext_trace.get(t, frozenset())
        prev_frame = Frame(t - 1, fw.aux | states[-1] | exts[-1] | acts[-1])
        # Support at t only reads the strict prefix, so it is decided once
        # per node; only subsets of the supported actions can be reactive.
        prefix = Trace(fw.aux, states, exts, acts)
        supported = [a for a in alphabet
                     if find_support(a, t, prefix, fw, bound) is not None]
        for r in range(len(supported) + 1):
            for combo in itertools.combinations(supported, r):
                if counter["n"] >= max_assignments:
                    counter["complete"] = False
                    return
                counter["n"] += 1
                subset = frozenset(combo)
                ev = ext_t | subset
                if check_preconditions(prev_frame, ev, fw):
                    continue
                nxt = succ(states[-1], ev, fw.causal, match_mode)
                rec(states + (nxt,), exts + (ext_t,), acts + (subset,), t + 1)

    rec((fw.initial,), (frozenset(),), (frozenset(),), 1)
    flags = {}
    for tr in kept:
        flags[tr.acts_key()] = all(rule_true(r, tr, fw).holds for r in fw.rules)
    return OracleResult(kept, flags, counter["complete"], counter["n"])


# ---------------------------------------------------------------------------
# Theorem comparison
# ---------------------------------------------------------------------------

@dataclass
class TheoremReport:
    engine_keys: set
    oracle_keys: set
    complete: bool

    @property
    def generated_subset_of_reactive(self) -> bool:
        """Every engine-generated trace is a reactive interpretation."""
        return self.engine_keys <= self.oracle_keys

    @property
    def reactive_subset_of_generated(self) -> bool:
        """Every reactive interpretation is reachable by the engine."""
        return self.oracle_keys <= self.engine_keys

    @property
    def ok(self) -> bool:
        return (self.generated_subset_of_reactive
                and self.reactive_subset_of_generated)

    def counterexamples(self) -> dict:
        return {
            "engine_only": sorted(self.engine_keys - self.oracle_keys),
            "oracle_only": sorted(self.oracle_keys - self.engine_keys),
        }

    def as_dict(self) -> dict:
        def render(keys):
            return [[list(map(str, atoms)) for atoms in key] for key in keys]

        cx = self.counterexamples()
        return {
            "ok": self.ok,
            "generated_subset_of_reactive": self.generated_subset_of_reactive,
            "reactive_subset_of_generated": self.reactive_subset_of_generated,
            "engine_traces": len(self.engine_keys),
            "reactive_interpretations": len(self.oracle_keys),
            "complete": self.complete,
            "engine_only": render(cx["engine_only"]),
            "oracle_only": render(cx["oracle_only"]),
        }


def check_theorems(fw: Framework, ext_trace: dict, horizon: int,
                   match_mode: str = SUBSET, max_branches: int = 100000,
                   max_assignments: int = 500000,
                   workers: int = 1) -> TheoremReport:
    """Compare the engine's reachable trace set with the oracle's.

    Equality of the two sets (by action content) witnesses both
    directions: whatever the cycle generates is reactive, and every
    reactive interpretation has generating choices.
    """
    exp: ExploreResult = explore(fw, ext_trace, horizon, match_mode,
                                 max_branches, workers=workers)
    orc = enumerate_reactive_oracle(fw, ext_trace, horizon, match_mode,
                                    max_assignments)
    return TheoremReport(exp.acts_keys(), orc.acts_keys(),
                         exp.complete and orc.complete)
