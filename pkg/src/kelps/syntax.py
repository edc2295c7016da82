"""Abstract syntax for reactive rule frameworks.

A framework couples four ingredients:

  * finite sort declarations and a predicate signature partitioned into
    fluents, actions, external events and time-independent auxiliaries,
  * reactive rules ``antecedent -> disjunct_1 | ... | disjunct_n`` built
    from single-timestamp first-order conditions and temporal constraints,
  * a causal theory: post entries (event set ~> initiated/terminated
    fluent) plus precondition denials ``body -> false``,
  * an initial state and a set of ground auxiliary facts.

Everything here is an immutable value.  Ground atoms are plain tuples
``(pred, args)`` without timestamps, which keeps state sets and frames
cheap; the timestamp lives either in an enclosing frame (current state)
or in an :class:`Atom`'s ``time`` field (rule syntax).

This module also hosts load-time validation (:func:`validate_framework`),
the bare-action extraction used both by the engine and by the reactivity
checker, and a pretty printer whose output re-parses to an identical
framework.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Union

TIME_SORT = "time"
ANY_SORT = "any"

FLUENT = "fluent"
ACTION = "action"
EXTERNAL = "external"
AUX = "aux"
KINDS = (FLUENT, ACTION, EXTERNAL, AUX)
EVENT_KINDS = (ACTION, EXTERNAL)

# Built-in auxiliary comparisons between object terms.  Conceptually these
# are the (infinite) auxiliary relations "same term" / "different term"
# over the Herbrand universe, so they never need declaring.
EQ = "="
NEQ = "!="
BUILTIN_OBJECT_PREDS = (EQ, NEQ)


class KelpsError(Exception):
    """Base class for all errors raised by this package."""


# ---------------------------------------------------------------------------
# Ground atoms
# ---------------------------------------------------------------------------

# (pred, (arg, ...)) with string arguments and no timestamp.
GroundAtom = tuple

def ground_atom(pred: str, *args: str) -> GroundAtom:
    return (pred, tuple(args))


def format_ground_atom(ga: GroundAtom) -> str:
    pred, args = ga
    if not args:
        return pred
    return f"{pred}({', '.join(args)})"


def format_stamped(ga: GroundAtom, t: int) -> str:
    return f"{format_ground_atom(ga)}@{t}"


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


Term = Union[Const, Var]


@dataclass(frozen=True)
class TimeExpr:
    """A clock term: a literal time, a time variable, or variable +/- offset."""

    var: Optional[str]
    shift: int = 0

    @property
    def is_ground(self) -> bool:
        return self.var is None

    def value(self) -> int:
        if self.var is not None:
            raise KelpsError(f"time expression {self} is not ground")
        return self.shift

    def __str__(self) -> str:
        if self.var is None:
            return str(self.shift)
        if self.shift == 0:
            return self.var
        sign = "+" if self.shift > 0 else "-"
        return f"{self.var}{sign}{abs(self.shift)}"


def time_const(n: int) -> TimeExpr:
    return TimeExpr(None, n)


# ---------------------------------------------------------------------------
# Formulas
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Atom:
    """A predicate applied to object terms, plus a timestamp for fluents/events.

    ``time`` is None for auxiliary atoms (including the built-in ``=`` and
    ``!=`` comparisons) and for unstamped uses inside the causal theory.
    """

    pred: str
    args: tuple[Term, ...] = ()
    time: Optional[TimeExpr] = None


@dataclass(frozen=True)
class Lit:
    value: bool


@dataclass(frozen=True)
class Not:
    body: "Formula"


@dataclass(frozen=True)
class And:
    parts: tuple["Formula", ...]


@dataclass(frozen=True)
class Or:
    parts: tuple["Formula", ...]


@dataclass(frozen=True)
class Implies:
    lhs: "Formula"
    rhs: "Formula"


@dataclass(frozen=True)
class Quant:
    q: str  # "forall" | "exists"
    var: str
    sort: str
    body: "Formula"


Formula = Union[Atom, Lit, Not, And, Or, Implies, Quant]

TRUE = Lit(True)
FALSE = Lit(False)


# ---------------------------------------------------------------------------
# Temporal constraints
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Cmp:
    """lhs OP rhs between clock terms; op is one of ``<``, ``<=``, ``=``."""

    lhs: TimeExpr
    op: str
    rhs: TimeExpr

    def __str__(self) -> str:
        return f"{self.lhs} {self.op} {self.rhs}"


@dataclass(frozen=True)
class FnCon:
    """max/min functional constraint: ``out`` is the max/min of ``a`` and ``b``."""

    fn: str  # "max" | "min"
    a: TimeExpr
    b: TimeExpr
    out: TimeExpr

    def __str__(self) -> str:
        return f"{self.fn}({self.a}, {self.b}, {self.out})"


Constraint = Union[Cmp, FnCon]


# ---------------------------------------------------------------------------
# Conditions, complexes, rules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Condition:
    """A first-order condition: one formula queried against a single frame.

    ``times`` holds the distinct timestamp expressions of the fluent/event
    atoms inside; a well-formed condition has at most one (none when the
    formula mentions only auxiliary predicates).
    """

    formula: Formula
    times: tuple[TimeExpr, ...]

    @property
    def time(self) -> Optional[TimeExpr]:
        return self.times[0] if self.times else None


def make_condition(formula: Formula) -> Condition:
    seen: list[TimeExpr] = []
    for atom in formula_atoms(formula):
        if atom.time is not None and atom.time not in seen:
            seen.append(atom.time)
    return Condition(formula, tuple(seen))


@dataclass(frozen=True)
class Complex:
    """A conjunction of conditions and temporal constraints."""

    conditions: tuple[Condition, ...] = ()
    constraints: tuple[Constraint, ...] = ()

    @property
    def is_empty(self) -> bool:
        return not self.conditions and not self.constraints

    def condition_times(self) -> tuple[TimeExpr, ...]:
        return tuple(c.time for c in self.conditions if c.time is not None)


EMPTY_COMPLEX = Complex()


@dataclass(frozen=True)
class Rule:
    name: str
    antecedent: Complex
    consequents: tuple[Complex, ...]


@dataclass(frozen=True)
class PostEntry:
    """``key ~> fluent``: the event set that initiates/terminates a fluent."""

    key: frozenset
    fluent: GroundAtom


@dataclass(frozen=True)
class PreSentence:
    """A denial ``current(T-1) & events(T) -> false``.

    ``body`` is a complex whose condition timestamps are all ``now`` or
    ``now - 1``; ``now`` names the single time variable.
    """

    name: str
    body: Complex
    now: str


@dataclass(frozen=True)
class CausalTheory:
    initiates: tuple[PostEntry, ...] = ()
    terminates: tuple[PostEntry, ...] = ()
    pre: tuple[PreSentence, ...] = ()


@dataclass(frozen=True)
class PredDecl:
    name: str
    kind: str
    arg_sorts: tuple[str, ...]

    @property
    def arity(self) -> int:
        return len(self.arg_sorts)


@dataclass
class Framework:
    """A fully loaded framework.  Treated as immutable after construction."""

    sorts: dict[str, tuple[str, ...]]
    predicates: dict[str, PredDecl]
    rules: tuple[Rule, ...]
    aux: frozenset
    causal: CausalTheory
    initial: frozenset

    def domain(self, sort: str) -> tuple[str, ...]:
        if sort == ANY_SORT:
            return self.universe()
        try:
            return self.sorts[sort]
        except KeyError:
            raise KelpsError(f"unknown sort {sort!r}") from None

    def universe(self) -> tuple[str, ...]:
        out: list[str] = []
        for name in sorted(self.sorts):
            for c in self.sorts[name]:
                if c not in out:
                    out.append(c)
        return tuple(out)

    def decl(self, pred: str) -> PredDecl:
        try:
            return self.predicates[pred]
        except KeyError:
            raise KelpsError(f"unknown predicate {pred!r}") from None

    def kind_of(self, pred: str) -> str:
        return self.decl(pred).kind

    def is_event_pred(self, pred: str) -> bool:
        return self.decl(pred).kind in EVENT_KINDS

    def ground_atoms_of(self, pred: str) -> Iterator[GroundAtom]:
        decl = self.decl(pred)
        domains = [self.domain(s) for s in decl.arg_sorts]
        for combo in itertools.product(*domains):
            yield (pred, combo)

    def action_alphabet(self) -> tuple[GroundAtom, ...]:
        """Every well-sorted ground action atom, in canonical order."""
        out = []
        for name in sorted(self.predicates):
            if self.predicates[name].kind == ACTION:
                out.extend(self.ground_atoms_of(name))
        return tuple(sorted(out))

    def fluent_alphabet(self) -> tuple[GroundAtom, ...]:
        out = []
        for name in sorted(self.predicates):
            if self.predicates[name].kind == FLUENT:
                out.extend(self.ground_atoms_of(name))
        return tuple(sorted(out))

    def time_slack(self) -> int:
        """Offset headroom for bounded temporal search beyond a horizon.

        Large enough that any satisfiable constraint system drawn from this
        framework has a witness within ``horizon + slack`` whenever it has
        one at all (constraints are difference-shaped with literal bounds).
        """
        total = 1
        nvars = 1
        for cx in self._all_complexes():
            for con in cx.constraints:
                for te in constraint_time_exprs(con):
                    total += abs(te.shift)
            nvars = max(nvars, len(complex_time_vars(cx)))
        for rule in self.rules:
            for cx in (rule.antecedent, *rule.consequents):
                for cond in cx.conditions:
                    for te in cond.times:
                        total += abs(te.shift)
        return total + nvars + 1

    def _all_complexes(self) -> Iterator[Complex]:
        for rule in self.rules:
            yield rule.antecedent
            for d in rule.consequents:
                yield d
        for pre in self.causal.pre:
            yield pre.body


def time_bound(fw: Framework, horizon: int) -> int:
    """The common bounded-time search limit used across engine and checkers."""
    return horizon + fw.time_slack()


# ---------------------------------------------------------------------------
# Traversal helpers
# ---------------------------------------------------------------------------

def formula_atoms(f: Formula) -> Iterator[Atom]:
    if isinstance(f, Atom):
        yield f
    elif isinstance(f, Not):
        yield from formula_atoms(f.body)
    elif isinstance(f, (And, Or)):
        for p in f.parts:
            yield from formula_atoms(p)
    elif isinstance(f, Implies):
        yield from formula_atoms(f.lhs)
        yield from formula_atoms(f.rhs)
    elif isinstance(f, Quant):
        yield from formula_atoms(f.body)


def free_object_vars(f: Formula, bound: frozenset = frozenset()) -> set:
    """Object variable names free in ``f`` (quantifier-aware)."""
    if isinstance(f, Atom):
        return {a.name for a in f.args if isinstance(a, Var) and a.name not in bound}
    if isinstance(f, Lit):
        return set()
    if isinstance(f, Not):
        return free_object_vars(f.body, bound)
    if isinstance(f, (And, Or)):
        out: set = set()
        for p in f.parts:
            out |= free_object_vars(p, bound)
        return out
    if isinstance(f, Implies):
        return free_object_vars(f.lhs, bound) | free_object_vars(f.rhs, bound)
    if isinstance(f, Quant):
        return free_object_vars(f.body, bound | {f.var})
    raise KelpsError(f"not a formula: {f!r}")


def formula_time_vars(f: Formula) -> set:
    out = set()
    for atom in formula_atoms(f):
        if atom.time is not None and atom.time.var is not None:
            out.add(atom.time.var)
    return out


def constraint_time_exprs(con: Constraint) -> tuple[TimeExpr, ...]:
    if isinstance(con, Cmp):
        return (con.lhs, con.rhs)
    return (con.a, con.b, con.out)


def constraint_time_vars(con: Constraint) -> set:
    return {te.var for te in constraint_time_exprs(con) if te.var is not None}


def complex_time_vars(cx: Complex) -> set:
    out = set()
    for cond in cx.conditions:
        out |= formula_time_vars(cond.formula)
    for con in cx.constraints:
        out |= constraint_time_vars(con)
    return out


def condition_vars(cond: Condition) -> set:
    """All variable names occurring free in a condition, object and time."""
    return free_object_vars(cond.formula) | formula_time_vars(cond.formula)


def complex_vars(cx: Complex) -> set:
    out = set()
    for cond in cx.conditions:
        out |= condition_vars(cond)
    for con in cx.constraints:
        out |= constraint_time_vars(con)
    return out


def rule_universal_vars(rule: Rule) -> set:
    """X: variables free in the antecedent."""
    return complex_vars(rule.antecedent)


def rule_existential_vars(rule: Rule) -> set:
    """Y: variables occurring only in consequents."""
    ante = rule_universal_vars(rule)
    out = set()
    for d in rule.consequents:
        out |= complex_vars(d)
    return out - ante


# ---------------------------------------------------------------------------
# Substitution
# ---------------------------------------------------------------------------

# A binding maps object variable names to constant names (str) and time
# variable names to natural numbers (int).
Binding = dict

def subst_term(t: Term, b: Binding) -> Term:
    if isinstance(t, Var) and t.name in b:
        return Const(b[t.name])
    return t


def subst_time(te: TimeExpr, b: Binding) -> TimeExpr:
    if te.var is not None and te.var in b:
        return TimeExpr(None, b[te.var] + te.shift)
    return te


def subst_formula(f: Formula, b: Binding) -> Formula:
    if isinstance(f, Atom):
        time = subst_time(f.time, b) if f.time is not None else None
        return Atom(f.pred, tuple(subst_term(a, b) for a in f.args), time)
    if isinstance(f, Lit):
        return f
    if isinstance(f, Not):
        return Not(subst_formula(f.body, b))
    if isinstance(f, And):
        return And(tuple(subst_formula(p, b) for p in f.parts))
    if isinstance(f, Or):
        return Or(tuple(subst_formula(p, b) for p in f.parts))
    if isinstance(f, Implies):
        return Implies(subst_formula(f.lhs, b), subst_formula(f.rhs, b))
    if isinstance(f, Quant):
        if f.var in b:
            inner = dict(b)
            del inner[f.var]
            return Quant(f.q, f.var, f.sort, subst_formula(f.body, inner))
        return Quant(f.q, f.var, f.sort, subst_formula(f.body, b))
    raise KelpsError(f"not a formula: {f!r}")


def subst_constraint(con: Constraint, b: Binding) -> Constraint:
    if isinstance(con, Cmp):
        return Cmp(subst_time(con.lhs, b), con.op, subst_time(con.rhs, b))
    return FnCon(con.fn, subst_time(con.a, b), subst_time(con.b, b), subst_time(con.out, b))


def subst_condition(cond: Condition, b: Binding) -> Condition:
    return make_condition(subst_formula(cond.formula, b))


def subst_complex(cx: Complex, b: Binding) -> Complex:
    return Complex(
        tuple(subst_condition(c, b) for c in cx.conditions),
        tuple(subst_constraint(c, b) for c in cx.constraints),
    )


def ground_of(atom: Atom) -> GroundAtom:
    """The unstamped ground atom for a fully substituted syntax atom."""
    args = []
    for a in atom.args:
        if not isinstance(a, Const):
            raise KelpsError(f"atom {atom.pred} has unbound argument {a}")
        args.append(a.name)
    return (atom.pred, tuple(args))


# ---------------------------------------------------------------------------
# Sort inference
# ---------------------------------------------------------------------------

def merge_sort(a: Optional[str], b: str) -> Optional[str]:
    if a is None or a == ANY_SORT:
        return b
    if b == ANY_SORT or a == b:
        return a
    return None  # conflict


def infer_object_sorts(formulas: Iterable[Formula], fw: Framework,
                       errors: Optional[list] = None) -> dict:
    """Infer a sort for every free object variable from signature positions.

    Quantified occurrences are skipped (their sort is explicit).  Conflicting
    positions are reported through ``errors`` when given, else raised.
    """
    sorts: dict = {}

    def visit(f: Formula, bound: frozenset) -> None:
        if isinstance(f, Atom):
            if f.pred in BUILTIN_OBJECT_PREDS:
                return
            decl = fw.predicates.get(f.pred)
            if decl is None:
                return
            for pos, arg in enumerate(f.args):
                if isinstance(arg, Var) and arg.name not in bound and pos < decl.arity:
                    want = decl.arg_sorts[pos]
                    merged = merge_sort(sorts.get(arg.name), want)
                    if merged is None:
                        msg = (f"variable {arg.name} used at sorts "
                               f"{sorts[arg.name]} and {want}")
                        if errors is not None:
                            errors.append(msg)
                        else:
                            raise KelpsError(msg)
                    else:
                        sorts[arg.name] = merged
        elif isinstance(f, Not):
            visit(f.body, bound)
        elif isinstance(f, (And, Or)):
            for p in f.parts:
                visit(p, bound)
        elif isinstance(f, Implies):
            visit(f.lhs, bound)
            visit(f.rhs, bound)
        elif isinstance(f, Quant):
            visit(f.body, bound | {f.var})

    for f in formulas:
        visit(f, frozenset())
    return sorts


def complex_object_sorts(cx: Complex, fw: Framework) -> dict:
    return infer_object_sorts((c.formula for c in cx.conditions), fw)


def rule_object_sorts(rule: Rule, fw: Framework) -> dict:
    forms = [c.formula for c in rule.antecedent.conditions]
    for d in rule.consequents:
        forms.extend(c.formula for c in d.conditions)
    return infer_object_sorts(forms, fw)


# ---------------------------------------------------------------------------
# Bare actions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BareAction:
    """An action atom standing alone as a conjunct of a consequent disjunct."""

    disjunct: int
    index: int        # condition index within the disjunct
    atom: Atom
    splits: tuple     # admissible (earlier, rest) index partitions of the others


def bare_actions(rule: Rule, fw: Framework) -> list:
    """All bare action atoms of a rule with their earlier/rest rewritings.

    A consequent conjunct counts as bare exactly when it is a single positive
    action atom; negated or embedded occurrences are conditions to observe,
    not actions to take.  Each rewriting partitions the remaining conjuncts
    of the disjunct (conjunction reordering is semantically free).
    """
    found = []
    for d_idx, disjunct in enumerate(rule.consequents):
        for c_idx, cond in enumerate(disjunct.conditions):
            f = cond.formula
            if not isinstance(f, Atom) or f.pred in BUILTIN_OBJECT_PREDS:
                continue
            decl = fw.predicates.get(f.pred)
            if decl is None or decl.kind != ACTION:
                continue
            others = tuple(j for j in range(len(disjunct.conditions)) if j != c_idx)
            splits = []
            for r in range(len(others) + 1):
                for earlier in itertools.combinations(others, r):
                    rest = tuple(j for j in others if j not in earlier)
                    splits.append((earlier, rest))
            found.append(BareAction(d_idx, c_idx, f, tuple(splits)))
    return found


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

ERROR = "error"
WARNING = "warning"


@dataclass(frozen=True)
class Violation:
    code: str
    severity: str
    where: str
    message: str

    def __str__(self) -> str:
        return f"[{self.severity}] {self.where}: {self.message} ({self.code})"


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not any(v.severity == ERROR for v in self.violations)

    def add(self, code: str, where: str, message: str, severity: str = ERROR) -> None:
        self.violations.append(Violation(code, severity, where, message))

    def __str__(self) -> str:
        if not self.violations:
            return "pass"
        return "\n".join(str(v) for v in self.violations)


def _anchored_time_vars(cx: Complex) -> set:
    """Condition timestamp vars plus vars functionally determined from them."""
    anchored = {te.var for te in cx.condition_times() if te.var is not None}
    changed = True
    while changed:
        changed = False
        for con in cx.constraints:
            if isinstance(con, FnCon):
                ins = {te.var for te in (con.a, con.b) if te.var is not None}
                if ins <= anchored and con.out.var is not None and con.out.var not in anchored:
                    anchored.add(con.out.var)
                    changed = True
    return anchored


def validate_framework(fw: Framework) -> ValidationReport:
    """Static well-formedness checks producing a report, never raising.

    Checks, per rule: single-timestamp conditions, constraint anchoring in
    every complex, consequent constraints anchoring a consequent timestamp,
    the ordering requirement that consequent timestamps never precede
    antecedent timestamps under any constraint-satisfying assignment, and
    range restriction for bare actions.  Causal-theory shape and reference
    time usage are also reported.
    """
    from . import temporal  # local import: temporal depends on syntax

    report = ValidationReport()
    bound = _validation_time_bound(fw)

    for rule in fw.rules:
        where = rule.name
        rule_object_sorts_checked(rule, fw, report)

        # Conditions carry exactly one timestamp (none is fine for aux-only).
        for label, cx in _rule_complexes(rule):
            for cond in cx.conditions:
                if len(cond.times) > 1:
                    report.add("condition-timestamps", where,
                               f"{label} condition {format_formula(cond.formula)} "
                               f"has {len(cond.times)} timestamps")
                _check_condition_shape(cond, fw, where, report)

        # Constraint variables must be anchored in conditions of their
        # complex: the antecedent on its own, each antecedent & disjunct.
        _check_anchoring(rule.antecedent, "antecedent", where, report)
        for d_idx, disjunct in enumerate(rule.consequents):
            combined = Complex(
                rule.antecedent.conditions + disjunct.conditions,
                rule.antecedent.constraints + disjunct.constraints,
            )
            _check_anchoring(combined, f"disjunct {d_idx}", where, report)

        for d_idx, disjunct in enumerate(rule.consequents):
            # Last well-formedness requirement: every consequent constraint
            # mentions a timestamp anchored in this disjunct's conditions.
            anchored = _anchored_time_vars(disjunct)
            for con in disjunct.constraints:
                tvars = constraint_time_vars(con)
                if tvars and not (tvars & anchored):
                    report.add("unanchored-consequent-constraint", where,
                               f"consequent constraint {con} anchors no "
                               f"consequent timestamp")
            # Ordering requirement: under every constraint-satisfying ground
            # time assignment, consequent condition times >= antecedent ones.
            all_cons = rule.antecedent.constraints + disjunct.constraints
            for ta in rule.antecedent.condition_times():
                for tc in disjunct.condition_times():
                    probe = all_cons + (Cmp(tc, "<", ta),)
                    if temporal.satisfiable(probe, {}, bound):
                        report.add("consequent-before-antecedent", where,
                                   f"disjunct {d_idx} allows consequent time "
                                   f"{tc} before antecedent time {ta}")

        _check_range_restriction(rule, fw, bound, report)

    _check_causal_theory(fw, report)
    _check_ground_sections(fw, report)
    return report


def _rule_complexes(rule: Rule):
    yield "antecedent", rule.antecedent
    for i, d in enumerate(rule.consequents):
        yield f"disjunct {i}", d


def _check_anchoring(cx: Complex, label: str, where: str,
                     report: ValidationReport) -> None:
    anchored = _anchored_time_vars(cx)
    for con in cx.constraints:
        loose = constraint_time_vars(con) - anchored
        if loose:
            report.add("dangling-constraint-variable", where,
                       f"{label} constraint {con} uses unanchored "
                       f"time variable(s) {sorted(loose)}")


def _check_condition_shape(cond: Condition, fw: Framework, where: str,
                           report: ValidationReport) -> None:
    for atom in formula_atoms(cond.formula):
        if atom.pred in BUILTIN_OBJECT_PREDS:
            continue
        decl = fw.predicates.get(atom.pred)
        if decl is None:
            continue  # parser already rejects unknown predicates
        # Reference times: a time-sorted argument that is not the timestamp.
        for pos, s in enumerate(decl.arg_sorts):
            if s == TIME_SORT:
                report.add("reference-time", where,
                           f"{atom.pred} argument {pos} is a reference time; "
                           f"bounded by the run horizon", severity=WARNING)


def rule_object_sorts_checked(rule: Rule, fw: Framework,
                              report: ValidationReport) -> dict:
    errors: list = []
    forms = [c.formula for c in rule.antecedent.conditions]
    for d in rule.consequents:
        forms.extend(c.formula for c in d.conditions)
    sorts = infer_object_sorts(forms, fw, errors)
    for msg in errors:
        report.add("sort-conflict", rule.name, msg)
    return sorts


def _check_range_restriction(rule: Rule, fw: Framework, bound: int,
                             report: ValidationReport) -> None:
    from . import temporal

    for ba in bare_actions(rule, fw):
        obj_vars = {a.name for a in ba.atom.args if isinstance(a, Var)}
        if not obj_vars:
            continue
        disjunct = rule.consequents[ba.disjunct]
        ante_vars = complex_vars(rule.antecedent)
        ok = False
        for earlier_idx, rest_idx in ba.splits:
            earlier_vars = set(ante_vars)
            for j in earlier_idx:
                earlier_vars |= condition_vars(disjunct.conditions[j])
            if not obj_vars <= earlier_vars:
                continue
            earlier = Complex(
                tuple(rule.antecedent.conditions)
                + tuple(disjunct.conditions[j] for j in earlier_idx),
                rule.antecedent.constraints,
            )
            later = Complex(
                (make_condition(ba.atom),)
                + tuple(disjunct.conditions[j] for j in rest_idx),
                disjunct.constraints,
            )
            if temporal.admits_sequencing(earlier, later, strict=True,
                                          partial={}, horizon=bound) is not None:
                ok = True
                break
        if not ok:
            report.add("range-restriction", rule.name,
                       f"bare action {format_formula(ba.atom)} has variable(s) "
                       f"{sorted(obj_vars)} not grounded by any earlier split")


def _check_causal_theory(fw: Framework, report: ValidationReport) -> None:
    for coll, label in ((fw.causal.initiates, "initiates"),
                        (fw.causal.terminates, "terminates")):
        for entry in coll:
            for ev in entry.key:
                kind = fw.predicates.get(ev[0])
                if kind is None or kind.kind not in EVENT_KINDS:
                    report.add("post-key-kind", label,
                               f"{format_ground_atom(ev)} is not an event atom")
            fdecl = fw.predicates.get(entry.fluent[0])
            if fdecl is None or fdecl.kind != FLUENT:
                report.add("post-effect-kind", label,
                           f"{format_ground_atom(entry.fluent)} is not a fluent")
            if not entry.key:
                report.add("post-key-empty", label,
                           f"entry for {format_ground_atom(entry.fluent)} has an "
                           f"empty event set")
    for pre in fw.causal.pre:
        now_conds = [c for c in pre.body.conditions
                     if c.time is not None and c.time.var == pre.now and c.time.shift == 0]
        if not now_conds:
            report.add("pre-shape", pre.name,
                       "denial has no condition at the transition time")
        for cond in pre.body.conditions:
            t = cond.time
            if t is not None and (t.var != pre.now or t.shift not in (0, -1)):
                report.add("pre-shape", pre.name,
                           f"condition timestamp {t} is neither T nor T-1")
            if t is not None and t.shift == 0:
                for atom in formula_atoms(cond.formula):
                    decl = fw.predicates.get(atom.pred)
                    if decl is not None and decl.kind == FLUENT:
                        report.add("pre-shape", pre.name,
                                   f"fluent {atom.pred} occurs at the transition "
                                   f"time (events-only position)")


def _check_ground_sections(fw: Framework, report: ValidationReport) -> None:
    for ga in fw.initial:
        decl = fw.predicates.get(ga[0])
        if decl is None or decl.kind != FLUENT:
            report.add("initial-kind", "initial",
                       f"{format_ground_atom(ga)} is not a fluent atom")
    for ga in fw.aux:
        decl = fw.predicates.get(ga[0])
        if decl is None or decl.kind != AUX:
            report.add("aux-kind", "aux-facts",
                       f"{format_ground_atom(ga)} is not an auxiliary atom")


def _validation_time_bound(fw: Framework) -> int:
    # Literal time constants plus offset slack; enough to witness any
    # violation of the difference-shaped constraint systems rules may carry.
    top = 0
    for cx in fw._all_complexes():
        for con in cx.constraints:
            for te in constraint_time_exprs(con):
                top = max(top, abs(te.shift))
        for cond in cx.conditions:
            for te in cond.times:
                top = max(top, abs(te.shift))
    return top + fw.time_slack() + 8


# ---------------------------------------------------------------------------
# Pretty printing
# ---------------------------------------------------------------------------

_PREC_OR = 1
_PREC_AND = 2
_PREC_UNARY = 3


def format_term(t: Term) -> str:
    return t.name


def format_atom(a: Atom) -> str:
    if a.pred in BUILTIN_OBJECT_PREDS:
        return f"{format_term(a.args[0])} {a.pred} {format_term(a.args[1])}"
    parts = [format_term(x) for x in a.args]
    if a.time is not None:
        parts.append(str(a.time))
    if not parts:
        return a.pred
    return f"{a.pred}({', '.join(parts)})"


def format_formula(f: Formula, prec: int = 0) -> str:
    if isinstance(f, Atom):
        return format_atom(f)
    if isinstance(f, Lit):
        return "true" if f.value else "false"
    if isinstance(f, Not):
        return f"~{format_formula(f.body, _PREC_UNARY)}"
    if isinstance(f, And):
        s = " & ".join(format_formula(p, _PREC_AND) for p in f.parts)
        return f"({s})" if prec >= _PREC_AND else s
    if isinstance(f, Or):
        s = " | ".join(format_formula(p, _PREC_OR + 1) for p in f.parts)
        return f"({s})" if prec >= _PREC_OR + 1 else s
    if isinstance(f, Implies):
        s = f"{format_formula(f.lhs, _PREC_OR + 1)} => {format_formula(f.rhs, _PREC_OR)}"
        return f"({s})" if prec > 0 else s
    if isinstance(f, Quant):
        body = format_formula(f.body, _PREC_UNARY)
        return f"{f.q} {f.var}:{f.sort} . {body}"
    raise KelpsError(f"not a formula: {f!r}")


def format_complex(cx: Complex) -> str:
    parts = [format_formula(c.formula, _PREC_AND) for c in cx.conditions]
    parts.extend(str(con) for con in cx.constraints)
    return " & ".join(parts) if parts else "true"


def format_rule(rule: Rule) -> str:
    ante = format_complex(rule.antecedent)
    cons = " | ".join(format_complex(d) for d in rule.consequents)
    return f"{ante} -> {cons}"


def format_framework(fw: Framework) -> str:
    """Serialize a framework back to its concrete text form.

    Output is canonical (sorted sections) and re-parses to a structurally
    identical framework; post entries print in their expanded ground form.
    """
    out: list[str] = []
    if fw.sorts:
        decls = ", ".join(
            f"{name}: {{{', '.join(fw.sorts[name])}}}" for name in sorted(fw.sorts)
        )
        out.append(f"sorts {{ {decls} }}")
    for kind, section in ((FLUENT, "fluents"), (ACTION, "actions"),
                          (EXTERNAL, "events"), (AUX, "aux")):
        decls = [fw.predicates[n] for n in sorted(fw.predicates)
                 if fw.predicates[n].kind == kind]
        if decls:
            rendered = []
            for d in decls:
                if d.arity and any(s != ANY_SORT for s in d.arg_sorts):
                    rendered.append(f"{d.name}({', '.join(d.arg_sorts)})")
                else:
                    rendered.append(f"{d.name}/{d.arity}")
            out.append(f"{section} {{ {', '.join(rendered)} }}")
    if fw.initial:
        atoms = ", ".join(format_ground_atom(a) for a in sorted(fw.initial))
        out.append(f"initial {{ {atoms} }}")
    if fw.aux:
        atoms = ", ".join(format_ground_atom(a) for a in sorted(fw.aux))
        out.append(f"aux-facts {{ {atoms} }}")
    for coll, section in ((fw.causal.initiates, "initiates"),
                          (fw.causal.terminates, "terminates")):
        if coll:
            entries = []
            for e in sorted(coll, key=lambda e: (sorted(e.key), e.fluent)):
                key = sorted(e.key)
                if len(key) == 1:
                    lhs = format_ground_atom(key[0])
                else:
                    lhs = "{" + ", ".join(format_ground_atom(k) for k in key) + "}"
                entries.append(f"{lhs} ~> {format_ground_atom(e.fluent)}")
            out.append(f"{section} {{ {', '.join(entries)} }}")
    if fw.causal.pre:
        bodies = ", ".join(f"{format_complex(p.body)} -> false" for p in fw.causal.pre)
        out.append(f"preconditions {{ {bodies} }}")
    if fw.rules:
        rules = ",\n  ".join(format_rule(r) for r in fw.rules)
        out.append(f"rules {{\n  {rules}\n}}")
    return "\n".join(out) + "\n"
