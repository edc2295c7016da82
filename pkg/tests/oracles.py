"""Independent oracles and random generators for the property suites.

Everything here deliberately avoids the package's solver and evaluator
code paths: satisfiability by brute-force enumeration, condition truth by
full syntactic grounding plus a standalone recursive membership check.
The random framework generator builds source *text* from safe templates,
so generated programs also exercise the parser, and stays tiny enough
that exhaustive exploration and the reactive-interpretation oracle both
finish quickly.
"""

from __future__ import annotations

import itertools
import random

from kelps.syntax import (
    And,
    Atom,
    Cmp,
    Complex,
    Condition,
    Const,
    FnCon,
    Implies,
    Lit,
    Not,
    Or,
    Quant,
    TimeExpr,
    Var,
    constraint_time_vars,
    free_object_vars,
    formula_time_vars,
)

# ---------------------------------------------------------------------------
# Temporal enumeration oracle
# ---------------------------------------------------------------------------

def _value(te: TimeExpr, b: dict) -> int:
    return te.shift if te.var is None else b[te.var] + te.shift


def enum_holds(con, b: dict) -> bool:
    if isinstance(con, Cmp):
        l, r = _value(con.lhs, b), _value(con.rhs, b)
        return {"<": l < r, "<=": l <= r, "=": l == r}[con.op]
    a, c = _value(con.a, b), _value(con.b, b)
    want = max(a, c) if con.fn == "max" else min(a, c)
    return _value(con.out, b) == want


def enum_satisfiable(constraints, partial: dict, horizon: int) -> bool:
    names = sorted({v for con in constraints
                    for v in constraint_time_vars(con)} - set(partial))
    for combo in itertools.product(range(horizon + 1), repeat=len(names)):
        b = {**partial, **dict(zip(names, combo))}
        if all(enum_holds(con, b) for con in constraints):
            return True
    return False


def enum_sequencing(earlier: Complex, later: Complex, strict: bool,
                    partial: dict, horizon: int):
    """Lexicographically least sequencing witness by brute force."""
    op = (lambda a, b: a < b) if strict else (lambda a, b: a <= b)
    constraints = earlier.constraints + later.constraints
    names = set(partial)
    for cx in (earlier, later):
        for cond in cx.conditions:
            for te in cond.times:
                if te.var is not None:
                    names.add(te.var)
        for con in cx.constraints:
            names |= constraint_time_vars(con)
    free = sorted(names - set(partial))
    best = None
    for combo in itertools.product(range(horizon + 1), repeat=len(free)):
        b = {**partial, **dict(zip(free, combo))}
        if not all(enum_holds(con, b) for con in constraints):
            continue
        ok = True
        for te in earlier.condition_times():
            for tl in later.condition_times():
                if not op(_value(te, b), _value(tl, b)):
                    ok = False
                    break
            if not ok:
                break
        if not ok:
            continue
        key = tuple(b[v] for v in sorted(b))
        if best is None or key < best[0]:
            best = (key, b)
    return None if best is None else {k: v for k, v in sorted(best[1].items())}


# ---------------------------------------------------------------------------
# Naive condition evaluation (full grounding + standalone membership)
# ---------------------------------------------------------------------------

def _ground_truth(f, facts, t, domains, horizon, b) -> bool:
    if isinstance(f, Atom):
        if f.pred == "=":
            return _arg(f.args[0], b) == _arg(f.args[1], b)
        if f.pred == "!=":
            return _arg(f.args[0], b) != _arg(f.args[1], b)
        if f.time is not None:
            when = f.time.shift if f.time.var is None else b[f.time.var] + f.time.shift
            if when != t:
                return False
        return (f.pred, tuple(_arg(a, b) for a in f.args)) in facts
    if isinstance(f, Lit):
        return f.value
    if isinstance(f, Not):
        return not _ground_truth(f.body, facts, t, domains, horizon, b)
    if isinstance(f, And):
        return all(_ground_truth(p, facts, t, domains, horizon, b) for p in f.parts)
    if isinstance(f, Or):
        return any(_ground_truth(p, facts, t, domains, horizon, b) for p in f.parts)
    if isinstance(f, Implies):
        return (not _ground_truth(f.lhs, facts, t, domains, horizon, b)
                or _ground_truth(f.rhs, facts, t, domains, horizon, b))
    if isinstance(f, Quant):
        dom = ([str(i) for i in range(horizon + 1)] if f.sort == "time"
               else domains[f.sort])
        vals = (_ground_truth(f.body, facts, t, domains, horizon, {**b, f.var: v})
                for v in dom)
        return all(vals) if f.q == "forall" else any(vals)
    raise AssertionError(f"unexpected node {f!r}")


def _arg(a, b):
    return b[a.name] if isinstance(a, Var) else a.name


def naive_condition_solutions(cond: Condition, frame, partial, fw, horizon):
    """All satisfying total bindings by enumerating every sort assignment."""
    from kelps.syntax import infer_object_sorts

    b = dict(partial)
    for te in cond.times:
        if te.var is None:
            if te.shift != frame.t:
                return []
        elif te.var in b:
            if b[te.var] + te.shift != frame.t:
                return []
        else:
            if frame.t - te.shift < 0:
                return []
            b[te.var] = frame.t - te.shift
    sorts = infer_object_sorts([cond.formula], fw)
    names = sorted((free_object_vars(cond.formula)
                    | formula_time_vars(cond.formula)) - set(b))
    domains = {s: list(fw.domain(s)) for s in fw.sorts}
    domains["any"] = list(fw.universe())
    arg_domains = []
    for n in names:
        s = sorts.get(n)
        if s is None:
            arg_domains.append([frame.t])
        elif s == "time":
            arg_domains.append([str(i) for i in range(horizon + 1)])
        else:
            arg_domains.append(domains.get(s, list(fw.domain(s))))
    out = []
    for combo in itertools.product(*arg_domains):
        full = {**b, **dict(zip(names, combo))}
        if _ground_truth(cond.formula, frame.facts, frame.t, domains, horizon,
                         full):
            out.append(full)
    uniq = {tuple(sorted(x.items())): x for x in out}
    return [uniq[k] for k in sorted(uniq)]


# ---------------------------------------------------------------------------
# Random constraint sets
# ---------------------------------------------------------------------------

def random_constraints(rng: random.Random, max_vars: int = 4,
                       horizon: int = 8) -> list:
    names = [f"T{i}" for i in range(rng.randint(1, max_vars))]

    def operand():
        if rng.random() < 0.25:
            return TimeExpr(None, rng.randint(0, horizon))
        return TimeExpr(rng.choice(names), rng.choice((-1, 0, 0, 1, 2, 3)))

    out = []
    for _ in range(rng.randint(1, 4)):
        if len(names) >= 3 and rng.random() < 0.25:
            a, b, c = rng.sample(names, 3)
            out.append(FnCon(rng.choice(("max", "min")),
                             TimeExpr(a), TimeExpr(b), TimeExpr(c)))
        else:
            out.append(Cmp(operand(), rng.choice(("<", "<=", "=")), operand()))
    return out


def random_time_complexes(rng: random.Random, horizon: int = 8):
    """A pair (earlier, later) of constraint-bearing complexes for
    sequencing tests; conditions are dummy event atoms with time vars."""

    def side(prefix: str, k: int) -> Complex:
        conds = []
        for i in range(k):
            te = TimeExpr(f"{prefix}{i}", rng.choice((0, 0, 1)))
            conds.append(Condition(Atom("e", (), te), (te,)))
        return Complex(tuple(conds), ())

    earlier = side("E", rng.randint(0, 2))
    later = side("L", rng.randint(0, 2))
    cons = []
    names = [te.var for cx in (earlier, later) for te in cx.condition_times()]
    for _ in range(rng.randint(0, 2)):
        if len(names) >= 2:
            a, b = rng.sample(names, 2)
            cons.append(Cmp(TimeExpr(a), rng.choice(("<", "<=")), TimeExpr(b)))
        elif names:
            cons.append(Cmp(TimeExpr(names[0]), "<=",
                            TimeExpr(None, rng.randint(0, horizon))))
    return Complex(earlier.conditions, tuple(cons)), later


# ---------------------------------------------------------------------------
# Random tiny frameworks
# ---------------------------------------------------------------------------

def random_framework_source(rng: random.Random) -> str:
    """Tiny well-formed framework text drawn from reactive-safe templates."""
    n_const = rng.randint(1, 2)
    constants = ["a", "b"][:n_const]
    fluents = [("f", rng.randint(0, 1)), ("g", 0)][: rng.randint(1, 2)]
    n_act = rng.randint(1, 2)
    actions = [("act1", rng.randint(0, 1)), ("act2", 0)][:n_act]
    ext = ("e", rng.choice((0, 0, 1)))

    def decl(pairs):
        return ", ".join(f"{n}/{a}" if a == 0 or rng.random() < 0.5
                         else f"{n}(obj)" for n, a in pairs)

    lines = [f"sorts {{ obj: {{{', '.join(constants)}}} }}"]
    lines.append(f"fluents {{ {decl(fluents)} }}")
    lines.append(f"actions {{ {decl(actions)} }}")
    lines.append(f"events {{ {decl([ext])} }}")

    init = [f"{n}({rng.choice(constants)})" if a else n
            for n, a in fluents if rng.random() < 0.5]
    if init:
        lines.append(f"initial {{ {', '.join(init)} }}")

    def atom(name, arity, var, time):
        if arity:
            return f"{name}({var}, {time})"
        return f"{name}({time})"

    causal = []
    for n, a in fluents:
        trigger_name, trigger_a = rng.choice(actions + [ext])
        left = (f"{trigger_name}(C)" if trigger_a else trigger_name)
        if rng.random() < 0.2 and len(actions) + 1 >= 2:
            other_name, other_a = rng.choice([x for x in actions + [ext]
                                              if x[0] != trigger_name])
            second = (f"{other_name}({rng.choice(constants)})" if other_a
                      else other_name)
            first = (f"{trigger_name}({rng.choice(constants)})" if trigger_a
                     else trigger_name)
            left = f"{{{first}, {second}}}"
            trigger_a = 0
        right = f"{n}(C)" if a else n
        if a and not trigger_a:
            right = f"{n}({rng.choice(constants)})"
        causal.append((rng.choice(("initiates", "terminates")),
                       f"{left} ~> {right}"))
    for section in ("initiates", "terminates"):
        entries = [e for s, e in causal if s == section]
        if entries:
            lines.append(f"{section} {{ {', '.join(entries)} }}")

    # Rules: trigger on the external event or a fluent, oblige actions with
    # small deadlines.  Action arguments come from the antecedent, keeping
    # everything range restricted.
    rules = []
    for _ in range(rng.randint(1, 2)):
        ante_parts = []
        var = "X"
        fluent_only = rng.random() < 0.25
        if fluent_only:
            fl_name, fl_a = rng.choice(fluents)
            if fl_a:
                ante_parts.append(atom(fl_name, 1, rng.choice(constants), "T"))
            else:
                part = f"{fl_name}(T)"
                if rng.random() < 0.3:
                    part = "~" + part
                ante_parts.append(part)
        elif ext[1]:
            ante_parts.append(atom(ext[0], 1, var, "T"))
        else:
            ante_parts.append(f"{ext[0]}(T)")
        use_var = not fluent_only and bool(ext[1])
        fl_name, fl_a = rng.choice(fluents)
        if not fluent_only and rng.random() < 0.5:
            if fl_a:
                ante_parts.append(atom(fl_name, 1, var if use_var else
                                       rng.choice(constants), "T"))
            else:
                part = f"{fl_name}(T)"
                if rng.random() < 0.3:
                    part = "~" + part
                ante_parts.append(part)
        disjuncts = []
        for _ in range(rng.randint(1, 2)):
            act_name, act_a = rng.choice(actions)
            if act_a:
                arg = var if use_var else rng.choice(constants)
                head = f"{act_name}({arg}, "
            else:
                head = f"{act_name}("
            if rng.random() < 0.5:
                disjuncts.append(f"{head}T+{rng.randint(1, 2)})")
            else:
                t2 = "T2"
                k = rng.randint(1, 3)
                disjuncts.append(f"{head}{t2}) & T < {t2} & {t2} <= T+{k}")
        rules.append(f"{' & '.join(ante_parts)} -> {' | '.join(disjuncts)}")
    lines.append("rules {\n  " + ",\n  ".join(rules) + "\n}")

    if len(actions) >= 2 and rng.random() < 0.4:
        a1 = atom(actions[0][0], actions[0][1], rng.choice(constants), "T")
        a2 = atom(actions[1][0], actions[1][1], rng.choice(constants), "T")
        lines.append(f"preconditions {{ {a1} & {a2} -> false }}")
    return "\n".join(lines) + "\n"


def random_instance(seed: int):
    """A validated tiny framework plus an event stream and horizon."""
    from kelps import parse_framework, validate_framework

    rng = random.Random(seed)
    for _ in range(50):
        src = random_framework_source(rng)
        fw = parse_framework(src)
        if not validate_framework(fw).ok:
            continue
        if len(fw.action_alphabet()) > 3:
            continue
        horizon = rng.randint(3, 4)
        externals = sorted(
            ga for name in fw.predicates
            if fw.predicates[name].kind == "external"
            for ga in fw.ground_atoms_of(name))
        ext = {}
        for t in range(1, horizon):
            if rng.random() < 0.6:
                ext[t] = frozenset(rng.sample(externals, 1))
        if not ext:
            ext[1] = frozenset(rng.sample(externals, 1))
        return fw, ext, horizon
    raise AssertionError(f"seed {seed}: no valid framework after 50 tries")
