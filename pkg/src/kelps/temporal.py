"""Temporal constraint solving over the discrete clock.

The constraint language is deliberately small: ``<``, ``<=`` and ``=``
between clock terms (variable plus literal offset, or literal), and the
functional relations ``max(a, b, out)`` / ``min(a, b, out)``.

Satisfiability works by interval propagation: every variable starts with
the domain ``[0, horizon]``, difference-shaped comparisons tighten bounds
to a fixpoint, and a non-empty fixpoint is a yes (taking each variable at
its lower bound satisfies every ``<=``-shaped constraint).  max/min are
the one disjunctive wrinkle; they are handled exactly by branching on
which input attains the extremum, so no enumeration fallback is needed.

Witness construction (:func:`least_witness`, :func:`admits_sequencing`)
pins variables to their smallest feasible values in name order, which
makes every returned binding the lexicographically least one.
"""

from __future__ import annotations

from typing import Iterable, Optional, Sequence

from .syntax import (
    Cmp,
    Complex,
    Constraint,
    FnCon,
    KelpsError,
    TimeExpr,
    constraint_time_vars,
)

TimeBinding = dict


class UnboundTimeVariable(KelpsError):
    pass


def time_value(te: TimeExpr, b: TimeBinding) -> int:
    if te.var is None:
        return te.shift
    if te.var not in b:
        raise UnboundTimeVariable(f"time variable {te.var} is unbound")
    return b[te.var] + te.shift


def constraint_holds(con: Constraint, b: TimeBinding) -> bool:
    if isinstance(con, Cmp):
        l, r = time_value(con.lhs, b), time_value(con.rhs, b)
        if con.op == "<":
            return l < r
        if con.op == "<=":
            return l <= r
        if con.op == "=":
            return l == r
        raise KelpsError(f"unknown comparison {con.op!r}")
    if con.fn == "max":
        want = max(time_value(con.a, b), time_value(con.b, b))
    else:
        want = min(time_value(con.a, b), time_value(con.b, b))
    return time_value(con.out, b) == want


def eval_ground_constraints(constraints: Iterable[Constraint], b: TimeBinding) -> bool:
    """Arithmetic truth of a constraint conjunction under a total binding."""
    return all(constraint_holds(con, b) for con in constraints)


def constraints_vars(constraints: Iterable[Constraint]) -> set:
    out: set = set()
    for con in constraints:
        out |= constraint_time_vars(con)
    return out


# ---------------------------------------------------------------------------
# Interval propagation
# ---------------------------------------------------------------------------

def _expand_fncons(constraints: Sequence[Constraint]) -> list:
    """All branch alternatives, each a pure list of Cmp constraints.

    ``max(a,b,out)`` becomes ``a<=out & b<=out`` plus either ``out<=a`` or
    ``out<=b``; dually for min.  The cross product over all functional
    constraints covers every way the extrema can be attained.
    """
    branches: list[list[Cmp]] = [[]]
    for con in constraints:
        if isinstance(con, Cmp):
            for br in branches:
                br.append(con)
            continue
        if con.fn == "max":
            common = [Cmp(con.a, "<=", con.out), Cmp(con.b, "<=", con.out)]
            alts = [Cmp(con.out, "<=", con.a), Cmp(con.out, "<=", con.b)]
        else:
            common = [Cmp(con.out, "<=", con.a), Cmp(con.out, "<=", con.b)]
            alts = [Cmp(con.a, "<=", con.out), Cmp(con.b, "<=", con.out)]
        branches = [br + common + [alt] for br in branches for alt in alts]
    return branches


def _as_leq(c: Cmp) -> list:
    """Normalize to (lvar, loff, rvar, roff) pairs meaning lvar+loff <= rvar+roff."""
    out = [(c.lhs.var, c.lhs.shift, c.rhs.var, c.rhs.shift)]
    if c.op == "<":
        out = [(c.lhs.var, c.lhs.shift + 1, c.rhs.var, c.rhs.shift)]
    elif c.op == "=":
        out.append((c.rhs.var, c.rhs.shift, c.lhs.var, c.lhs.shift))
    return out


def _propagate(leqs: list, variables: set, partial: TimeBinding, horizon: int) -> Optional[dict]:
    """Bounds fixpoint; returns {var: (lb, ub)} or None when inconsistent."""
    bounds = {}
    for v in variables:
        if v in partial:
            bounds[v] = (partial[v], partial[v])
        else:
            bounds[v] = (0, horizon)
    # Ground-only comparisons must simply hold.
    for lv, lo, rv, ro in leqs:
        if lv is None and rv is None and lo > ro:
            return None
    changed = True
    while changed:
        changed = False
        for lv, lo, rv, ro in leqs:
            if lv is None and rv is None:
                continue
            if rv is None:  # lvar + lo <= ro
                lb, ub = bounds[lv]
                cap = ro - lo
                if ub > cap:
                    ub = cap
                    if lb > ub:
                        return None
                    bounds[lv] = (lb, ub)
                    changed = True
            elif lv is None:  # lo <= rvar + ro
                lb, ub = bounds[rv]
                floor = lo - ro
                if lb < floor:
                    lb = floor
                    if lb > ub:
                        return None
                    bounds[rv] = (lb, ub)
                    changed = True
            else:  # lvar + lo <= rvar + ro
                llb, lub = bounds[lv]
                rlb, rub = bounds[rv]
                cap = rub + ro - lo
                floor = llb + lo - ro
                touched = False
                if lub > cap:
                    lub = cap
                    touched = True
                if rlb < floor:
                    rlb = floor
                    touched = True
                if touched:
                    if llb > lub or rlb > rub:
                        return None
                    bounds[lv] = (llb, lub)
                    bounds[rv] = (rlb, rub)
                    changed = True
    return bounds


def satisfiable(constraints: Sequence[Constraint], partial: TimeBinding,
                horizon: int) -> bool:
    """Whether some total extension of ``partial`` within 0..horizon holds.

    Variables already in ``partial`` keep their given values (even values
    above the horizon); all others range over ``0..horizon``.
    """
    variables = constraints_vars(constraints)
    for branch in _expand_fncons(constraints):
        leqs = []
        for c in branch:
            leqs.extend(_as_leq(c))
        if _propagate(leqs, variables, partial, horizon) is not None:
            return True
    return False


def least_witness(constraints: Sequence[Constraint], partial: TimeBinding,
                  horizon: int, extra_vars: Iterable = ()) -> Optional[TimeBinding]:
    """The lexicographically least satisfying total binding, or None.

    Variables are fixed in name order, each to the smallest value in
    ``0..horizon`` that keeps the remainder satisfiable.  ``extra_vars``
    join the binding even if no constraint mentions them.
    """
    variables = sorted(constraints_vars(constraints) | set(extra_vars))
    if not satisfiable(constraints, partial, horizon):
        return None
    binding = dict(partial)
    for v in variables:
        if v in binding:
            continue
        for value in range(0, horizon + 1):
            binding[v] = value
            if satisfiable(constraints, binding, horizon):
                break
            del binding[v]
        else:
            return None  # cannot happen once the system is satisfiable
    return {v: binding[v] for v in sorted(set(variables) | set(partial))}


# ---------------------------------------------------------------------------
# Sequencings
# ---------------------------------------------------------------------------

def sequencing_constraints(earlier: Complex, later: Complex, strict: bool) -> tuple:
    """The combined constraint system for ``earlier < later`` (or ``<=``)."""
    op = "<" if strict else "<="
    ordering = tuple(
        Cmp(te, op, tl)
        for te in earlier.condition_times()
        for tl in later.condition_times()
    )
    return earlier.constraints + later.constraints + ordering


def admits_sequencing(earlier: Complex, later: Complex, strict: bool,
                      partial: TimeBinding, horizon: int) -> Optional[TimeBinding]:
    """A total time binding witnessing the sequencing, or None.

    The witness extends ``partial``, satisfies every temporal constraint of
    ``earlier & later``, and places every earlier condition timestamp
    strictly before (or at-or-before) every later one.  Among all witnesses
    within the horizon the lexicographically least is returned.
    """
    cs = sequencing_constraints(earlier, later, strict)
    time_vars: set = set()
    for cx in (earlier, later):
        for cond in cx.conditions:
            for te in cond.times:
                if te.var is not None:
                    time_vars.add(te.var)
    return least_witness(cs, partial, horizon, extra_vars=time_vars)
