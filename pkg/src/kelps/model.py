"""Timestamped interpretations (traces) and truth evaluation.

A trace combines the auxiliary facts, the state sequence S_0..S_n and the
event sets ev_1..ev_n of one run into a single structure.  Truth of a
condition only ever depends on one time frame (the state at its timestamp
plus the events that produced it), so the evaluator works frame by frame;
truth of a complex touches exactly the frames up to its latest timestamp.

Conditions are evaluated as queries: :func:`eval_condition` returns every
well-sorted extension of a partial binding that makes the condition true
in a frame.  Conjunctions thread bindings through positive atoms, which
act as generators; all other connectives fall back to enumerating the
remaining free variables over their (finite) sort domains.

Rule truth over a finite trace is three-valued: an antecedent instance
whose deadlines have expired makes the rule ``false``, one whose
obligations are still satisfiable past the horizon leaves it ``pending``.
"""

from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

from . import temporal
from .syntax import (
    ANY_SORT,
    AUX,
    BUILTIN_OBJECT_PREDS,
    EQ,
    NEQ,
    TIME_SORT,
    And,
    Atom,
    Binding,
    Complex,
    Condition,
    Const,
    Formula,
    Framework,
    GroundAtom,
    Implies,
    KelpsError,
    Lit,
    Not,
    Or,
    Quant,
    Rule,
    Var,
    complex_vars,
    format_ground_atom,
    free_object_vars,
    infer_object_sorts,
    subst_term,
    subst_time,
    time_bound,
)


class TraceFormatError(KelpsError):
    pass


# ---------------------------------------------------------------------------
# Frames and traces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Frame:
    """One time slice: Aux + the state at ``t`` + the events stamped ``t``."""

    t: int
    facts: frozenset


@dataclass(frozen=True)
class Trace:
    """A finite timestamped interpretation.

    ``states[i]`` is S_i, ``ext[i]``/``acts[i]`` partition ev_i; index 0
    carries the initial state and empty event sets.
    """

    aux: frozenset
    states: tuple
    ext: tuple
    acts: tuple
    pre_violation: Optional[tuple] = None  # (time, diagnostics) for halted runs

    def __post_init__(self):
        if not (len(self.states) == len(self.ext) == len(self.acts)):
            raise TraceFormatError("states and event sequences differ in length")
        if self.ext[0] or self.acts[0]:
            raise TraceFormatError("events at time 0 are not allowed")

    @property
    def horizon(self) -> int:
        return len(self.states) - 1

    def events_at(self, i: int) -> frozenset:
        return self.ext[i] | self.acts[i]

    def frame(self, i: int) -> Frame:
        if not 0 <= i <= self.horizon:
            raise KelpsError(f"time {i} is outside the trace horizon {self.horizon}")
        return Frame(i, self.aux | self.states[i] | self.ext[i] | self.acts[i])

    def prefix(self, n: int) -> "Trace":
        if not 0 <= n <= self.horizon:
            raise KelpsError(f"prefix length {n} outside horizon {self.horizon}")
        return Trace(self.aux, self.states[: n + 1], self.ext[: n + 1],
                     self.acts[: n + 1])

    def acts_key(self) -> tuple:
        """Canonical identity of the action content (states follow from it)."""
        return tuple(tuple(sorted(a)) for a in self.acts)

    def all_actions(self) -> Iterator[tuple]:
        """(atom, time) pairs for every action occurrence, in time order."""
        for i in range(1, self.horizon + 1):
            for ga in sorted(self.acts[i]):
                yield ga, i


# ---------------------------------------------------------------------------
# Formula truth in a single frame
# ---------------------------------------------------------------------------

def _var_domain(name: str, sort: str, fw: Framework, horizon: Optional[int]) -> tuple:
    if sort == TIME_SORT:
        if horizon is None:
            raise KelpsError(
                f"time-sorted variable {name} needs a horizon bound to enumerate")
        return tuple(str(i) for i in range(horizon + 1))
    return fw.domain(sort)


def _atom_ground(atom: Atom, b: Binding) -> Optional[GroundAtom]:
    args = []
    for a in atom.args:
        t = subst_term(a, b)
        if not isinstance(t, Const):
            return None
        args.append(t.name)
    return (atom.pred, tuple(args))


def formula_true(f: Formula, frame: Frame, b: Binding, fw: Framework,
                 horizon: Optional[int] = None) -> bool:
    """Classical truth of ``f`` in one frame under a total binding."""
    if isinstance(f, Atom):
        if f.pred in BUILTIN_OBJECT_PREDS:
            ga = _atom_ground(f, b)
            if ga is None:
                raise KelpsError(f"unbound variable in comparison {f}")
            l, r = ga[1]
            return (l == r) if f.pred == EQ else (l != r)
        ga = _atom_ground(f, b)
        if ga is None:
            raise KelpsError(f"unbound variable in atom {f.pred}")
        if f.time is not None:
            te = subst_time(f.time, b)
            if not te.is_ground:
                raise KelpsError(f"unbound timestamp in atom {f.pred}")
            if te.value() != frame.t:
                return False
        return ga in frame.facts
    if isinstance(f, Lit):
        return f.value
    if isinstance(f, Not):
        return not formula_true(f.body, frame, b, fw, horizon)
    if isinstance(f, And):
        return all(formula_true(p, frame, b, fw, horizon) for p in f.parts)
    if isinstance(f, Or):
        return any(formula_true(p, frame, b, fw, horizon) for p in f.parts)
    if isinstance(f, Implies):
        return (not formula_true(f.lhs, frame, b, fw, horizon)
                or formula_true(f.rhs, frame, b, fw, horizon))
    if isinstance(f, Quant):
        domain = _var_domain(f.var, f.sort, fw, horizon)
        results = (formula_true(f.body, frame, {**b, f.var: v}, fw, horizon)
                   for v in domain)
        return all(results) if f.q == "forall" else any(results)
    raise KelpsError(f"not a formula: {f!r}")


# ---------------------------------------------------------------------------
# Condition evaluation (query semantics)
# ---------------------------------------------------------------------------

def _match_atom(atom: Atom, frame: Frame, b: Binding) -> Iterator[Binding]:
    """Bindings extending ``b`` that put a positive atom in the frame."""
    if atom.time is not None:
        te = subst_time(atom.time, b)
        if te.is_ground:
            if te.value() != frame.t:
                return
        else:
            # The timestamp variable ought to be pre-bound by the caller;
            # bind it here for robustness.
            v = frame.t - atom.time.shift
            if v < 0:
                return
            b = {**b, atom.time.var: v}
    arity = len(atom.args)
    for ga in sorted(frame.facts):
        if ga[0] != atom.pred or len(ga[1]) != arity:
            continue
        ext = dict(b)
        ok = True
        for pat, val in zip(atom.args, ga[1]):
            if isinstance(pat, Const):
                if pat.name != val:
                    ok = False
                    break
            else:
                bound = ext.get(pat.name)
                if bound is None:
                    ext[pat.name] = val
                elif bound != val:
                    ok = False
                    break
        if ok:
            yield ext


def _formula_free_vars(f: Formula) -> set:
    out = free_object_vars(f)
    for atom in _atoms_of(f):
        if atom.time is not None and atom.time.var is not None:
            out.add(atom.time.var)
    return out


def _atoms_of(f: Formula) -> Iterator[Atom]:
    from .syntax import formula_atoms
    return formula_atoms(f)


def _is_generator_atom(f: Formula) -> bool:
    return isinstance(f, Atom) and f.pred not in BUILTIN_OBJECT_PREDS


def _solutions(f: Formula, frame: Frame, b: Binding, fw: Framework,
               horizon: Optional[int], sorts: dict) -> Iterator[Binding]:
    """All extensions of ``b`` over free vars of ``f`` making it true."""
    unbound = _formula_free_vars(f) - set(b)
    if not unbound:
        if formula_true(f, frame, b, fw, horizon):
            yield dict(b)
        return
    if _is_generator_atom(f):
        yield from _match_atom(f, frame, b)
        return
    if isinstance(f, Atom) and f.pred == EQ:
        # x = y with one side bound propagates; otherwise fall through.
        l, r = f.args
        lv = b.get(l.name) if isinstance(l, Var) else l.name
        rv = b.get(r.name) if isinstance(r, Var) else r.name
        if lv is not None and rv is None:
            yield {**b, r.name: lv}
            return
        if rv is not None and lv is None:
            yield {**b, l.name: rv}
            return
    if isinstance(f, And):
        # Positive atoms first: they generate bindings the rest can check.
        parts = sorted(f.parts, key=lambda p: 0 if _is_generator_atom(p) else 1)

        def thread(i: int, cur: Binding) -> Iterator[Binding]:
            if i == len(parts):
                yield cur
                return
            for ext in _solutions(parts[i], frame, cur, fw, horizon, sorts):
                yield from thread(i + 1, ext)

        yield from thread(0, b)
        return
    # General fallback: enumerate the remaining free variables over their
    # sort domains, then decide ground truth.
    names = sorted(unbound)
    domains = []
    for name in names:
        sort = sorts.get(name)
        if sort is None:
            # Timestamp variables reaching here get the frame's time.
            domains.append((frame.t,))
        else:
            domains.append(_var_domain(name, sort, fw, horizon))
    for combo in itertools.product(*domains):
        ext = {**b, **dict(zip(names, combo))}
        if formula_true(f, frame, ext, fw, horizon):
            yield ext


def _canonical(bindings: Iterable[Binding]) -> list:
    uniq = {tuple(sorted(x.items())): x for x in bindings}
    return [uniq[k] for k in sorted(uniq)]


def eval_condition(cond: Condition, frame: Frame, partial: Binding,
                   fw: Framework, horizon: Optional[int] = None) -> list:
    """All total extensions of ``partial`` making the condition true here.

    The condition's timestamp must unify with the frame time; a variable
    timestamp is bound accordingly.  Returned bindings are total over the
    condition's free variables and canonically ordered.
    """
    b = dict(partial)
    for te in cond.times:
        if te.var is None:
            if te.shift != frame.t:
                return []
        elif te.var in b:
            if b[te.var] + te.shift != frame.t:
                return []
        else:
            v = frame.t - te.shift
            if v < 0:
                return []
            b[te.var] = v
    sorts = infer_object_sorts([cond.formula], fw)
    return _canonical(_solutions(cond.formula, frame, b, fw, horizon, sorts))


def conjunction_solutions(conds: Iterable[Condition], frame: Frame,
                          partial: Binding, fw: Framework,
                          horizon: Optional[int] = None) -> list:
    """Joint solutions of several conditions evaluated in the same frame."""
    results = [dict(partial)]
    for cond in conds:
        step = []
        for b in results:
            step.extend(eval_condition(cond, frame, b, fw, horizon))
        results = step
        if not results:
            break
    return _canonical(results)


# ---------------------------------------------------------------------------
# Complex truth and groundings over a trace
# ---------------------------------------------------------------------------

def constraint_closure(constraints: tuple, binding: Binding):
    """Split constraints by groundness under ``binding``, extending it.

    Functional constraints whose inputs are ground determine their output
    variable; the extended binding grounds further constraints, to a
    fixpoint.  Returns ``(ok, extended, ground, open_)`` where ``ok`` is
    False when some ground constraint is violated.
    """
    b = dict(binding)
    ground: list = []
    open_: list = list(constraints)
    changed = True
    while changed:
        changed = False
        still = []
        for con in open_:
            from .syntax import FnCon, constraint_time_vars
            unbound = {v for v in constraint_time_vars(con) if v not in b}
            if not unbound:
                if not temporal.constraint_holds(con, b):
                    return False, b, ground, open_
                ground.append(con)
                changed = True
            elif (isinstance(con, FnCon) and unbound == {con.out.var}
                  and con.out.shift == 0):
                a = temporal.time_value(con.a, b)
                c = temporal.time_value(con.b, b)
                b[con.out.var] = max(a, c) if con.fn == "max" else min(a, c)
                ground.append(con)
                changed = True
            else:
                still.append(con)
        open_ = still
    return True, b, ground, open_


def complex_true(cx: Complex, trace: Trace, b: Binding, fw: Framework) -> bool:
    """Ground truth of a complex in a trace (binding grounds everything)."""
    ok, ext, _, open_ = constraint_closure(cx.constraints, b)
    if not ok:
        return False
    if open_:
        raise KelpsError(f"complex has unbound constraint variables: {open_}")
    for cond in cx.conditions:
        if cond.time is None:
            frame = trace.frame(0)  # time-independent; any frame works
        else:
            t = temporal.time_value(cond.time, ext)
            if t > trace.horizon:
                raise KelpsError(
                    f"timestamp {t} beyond trace horizon {trace.horizon}")
            if t < 0:
                return False
            frame = trace.frame(t)
        if not formula_true(cond.formula, frame, ext, fw, trace.horizon):
            return False
    return True


def complex_groundings(cx: Complex, trace: Trace, partial: Binding,
                       fw: Framework) -> list:
    """All groundings of a complex that hold in the trace.

    Times range over the trace; object variables over their sorts.  Each
    returned binding is total over the complex's variables (functionally
    determined constraint variables included) and satisfies every
    constraint.
    """
    results = [dict(partial)]
    for cond in cx.conditions:
        step: list = []
        for b in results:
            if cond.time is None:
                times: Iterable[int] = (0,)
            else:
                te = subst_time(cond.time, b)
                if te.is_ground:
                    t = te.value()
                    if not 0 <= t <= trace.horizon:
                        continue
                    times = (t,)
                else:
                    times = range(0, trace.horizon + 1)
            for t in times:
                for ext in eval_condition(cond, trace.frame(t), b, fw,
                                          trace.horizon):
                    ok, ext2, _, _ = constraint_closure(cx.constraints, ext)
                    if ok:
                        step.append(ext)
        results = step
        if not results:
            return []
    final = []
    for b in results:
        ok, ext, _, open_ = constraint_closure(cx.constraints, b)
        if ok and not open_:
            final.append(ext)
    return _canonical(final)


# ---------------------------------------------------------------------------
# Rule truth over a trace
# ---------------------------------------------------------------------------

TRUE_VERDICT = "true"
FALSE_VERDICT = "false"
PENDING_VERDICT = "pending"


@dataclass(frozen=True)
class RuleVerdict:
    rule: str
    status: str
    countermodel: Optional[Binding] = None
    pending: tuple = ()

    @property
    def holds(self) -> bool:
        return self.status == TRUE_VERDICT


def _disjunct_satisfied(rule: Rule, d_idx: int, sigma: Binding, trace: Trace,
                        fw: Framework) -> bool:
    d = rule.consequents[d_idx]
    combined = Complex(d.conditions, rule.antecedent.constraints + d.constraints)
    return bool(complex_groundings(combined, trace, sigma, fw))


def _disjunct_pending(rule: Rule, d_idx: int, sigma: Binding, trace: Trace,
                      fw: Framework, bound: int) -> bool:
    """Could the disjunct still become true in some extension of the trace?

    True when a grounding exists within the extended bound whose at-or-below
    horizon conditions already hold in the trace and whose constraints are
    satisfied, with at least one condition timestamp beyond the horizon.
    """
    d = rule.consequents[d_idx]
    constraints = rule.antecedent.constraints + d.constraints
    names: set = set()
    for c in d.conditions:
        names |= free_object_vars(c.formula)
    sorts = infer_object_sorts([c.formula for c in d.conditions], fw)
    names -= set(sigma)
    time_names = sorted(
        {te.var for c in d.conditions for te in c.times
         if te.var is not None and te.var not in sigma}
    )
    obj_names = sorted(names)
    obj_domains = [fw.domain(sorts.get(n, ANY_SORT)) for n in obj_names]
    for obj_combo in itertools.product(*obj_domains):
        base = {**sigma, **dict(zip(obj_names, obj_combo))}
        for time_combo in itertools.product(range(bound + 1), repeat=len(time_names)):
            theta = {**base, **dict(zip(time_names, time_combo))}
            ok, ext, _, open_ = constraint_closure(constraints, theta)
            if not ok or open_:
                continue
            beyond = False
            holds = True
            for cond in d.conditions:
                if cond.time is None:
                    if not formula_true(cond.formula, trace.frame(0), ext, fw,
                                        trace.horizon):
                        holds = False
                        break
                    continue
                t = temporal.time_value(cond.time, ext)
                if t > trace.horizon:
                    beyond = True
                    continue
                if t < 0 or not formula_true(cond.formula, trace.frame(t), ext,
                                             fw, trace.horizon):
                    holds = False
                    break
            if holds and beyond:
                return True
    return False


def rule_true(rule: Rule, trace: Trace, fw: Framework) -> RuleVerdict:
    """Bounded-horizon truth of a reactive rule in a trace.

    ``false`` comes with the offending antecedent grounding; antecedent
    instances whose obligations are only deferred (satisfiable past the
    horizon) yield ``pending`` instead.
    """
    bound = time_bound(fw, trace.horizon)
    pending: list = []
    for sigma in complex_groundings(rule.antecedent, trace, {}, fw):
        if any(_disjunct_satisfied(rule, i, sigma, trace, fw)
               for i in range(len(rule.consequents))):
            continue
        if any(_disjunct_pending(rule, i, sigma, trace, fw, bound)
               for i in range(len(rule.consequents))):
            pending.append(sigma)
            continue
        return RuleVerdict(rule.name, FALSE_VERDICT, countermodel=sigma)
    if pending:
        return RuleVerdict(rule.name, PENDING_VERDICT,
                           pending=tuple(tuple(sorted(p.items())) for p in pending))
    return RuleVerdict(rule.name, TRUE_VERDICT)


# ---------------------------------------------------------------------------
# Trace files (JSON Lines)
# ---------------------------------------------------------------------------

_ATOM_RE = re.compile(r"^\s*([A-Za-z][A-Za-z0-9_-]*)\s*(?:\(([^)]*)\))?\s*$")


def parse_ground_atom(s: str) -> GroundAtom:
    m = _ATOM_RE.match(s)
    if not m:
        raise TraceFormatError(f"malformed atom {s!r}")
    pred, argstr = m.group(1), m.group(2)
    if argstr is None or not argstr.strip():
        return (pred, ())
    args = tuple(a.strip() for a in argstr.split(","))
    if any(not a for a in args):
        raise TraceFormatError(f"malformed atom {s!r}")
    return (pred, args)


def _atom_list(atoms: frozenset) -> list:
    return [format_ground_atom(a) for a in sorted(atoms)]


def trace_to_jsonl(trace: Trace) -> str:
    lines = []
    for t in range(trace.horizon + 1):
        rec = {
            "t": t,
            "state": _atom_list(trace.states[t]),
            "ext": _atom_list(trace.ext[t]),
            "acts": _atom_list(trace.acts[t]),
        }
        lines.append(json.dumps(rec, separators=(", ", ": ")))
    return "\n".join(lines) + "\n"


def trace_from_jsonl(text: str, fw: Framework) -> Trace:
    states, ext, acts = [], [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise TraceFormatError(f"line {lineno}: {e}") from None
        t = rec.get("t")
        if t != len(states):
            raise TraceFormatError(f"line {lineno}: expected t={len(states)}, got {t}")
        states.append(frozenset(parse_ground_atom(s) for s in rec.get("state", [])))
        ext.append(frozenset(parse_ground_atom(s) for s in rec.get("ext", [])))
        acts.append(frozenset(parse_ground_atom(s) for s in rec.get("acts", [])))
    if not states:
        raise TraceFormatError("empty trace file")
    trace = Trace(fw.aux, tuple(states), tuple(ext), tuple(acts))
    _check_trace_kinds(trace, fw)
    return trace


def _check_trace_kinds(trace: Trace, fw: Framework) -> None:
    from .syntax import ACTION, EXTERNAL, FLUENT
    for t in range(trace.horizon + 1):
        for ga in trace.states[t]:
            if fw.decl(ga[0]).kind != FLUENT:
                raise TraceFormatError(
                    f"t={t}: state atom {format_ground_atom(ga)} is not a fluent")
        for ga in trace.ext[t]:
            if fw.decl(ga[0]).kind != EXTERNAL:
                raise TraceFormatError(
                    f"t={t}: ext atom {format_ground_atom(ga)} is not external")
        for ga in trace.acts[t]:
            if fw.decl(ga[0]).kind != ACTION:
                raise TraceFormatError(
                    f"t={t}: acts atom {format_ground_atom(ga)} is not an action")
