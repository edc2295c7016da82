"""Concrete text format for frameworks and external-event streams.

A framework file is a sequence of brace-delimited sections:

    sorts         { customer: {bob, alice}, item: {book} }
    fluents       { reliable(customer), payment-due(customer, item) }
    actions       { dispatch(customer, item), ... }
    events        { orders(customer, item) }          # external events
    aux           { isa/2 }                           # time-independent
    initial       { reliable(bob) }
    aux-facts     { isa(book, thing) }
    initiates     { send-invoice(C, Item) ~> payment-due(C, Item) }
    terminates    { {go-inside} ~> outdoors }
    preconditions { dispatch(C1, I, T) & dispatch(C2, I, T) & C1 != C2 -> false }
    rules         { orders(C, I, T1) & reliable(C, T1) ->
                      dispatch(C, I, T2) & T1 < T2 | send-apology(C, I, T4) }

Predicates declare either a sorted signature ``p(sort, ...)`` or a bare
arity ``p/n`` (arguments then range over the union of all declared
constants).  Fluent and event atoms written in rules carry one extra
final argument, the timestamp; atoms in ``initial``/``initiates``/
``terminates`` are unstamped.  Variables start with an upper-case letter
(or are introduced by a quantifier); ``#`` starts a line comment; hyphens
are part of names when followed by a letter, so ``cry-wolf`` is one
symbol while ``T-1`` is an offset.

Comparisons are classified after parsing: a comparison with a literal,
an offset, or a timestamp variable on either side is a temporal
constraint; ``=``/``!=`` between object terms become built-in auxiliary
conditions.  Temporal constraints may only appear as top-level conjuncts.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

from .model import parse_ground_atom
from .syntax import (
    ACTION,
    ANY_SORT,
    AUX,
    EVENT_KINDS,
    EXTERNAL,
    FLUENT,
    NEQ,
    EQ,
    TIME_SORT,
    And,
    Atom,
    CausalTheory,
    Cmp,
    Complex,
    Condition,
    Const,
    FnCon,
    Formula,
    Framework,
    GroundAtom,
    Implies,
    KelpsError,
    Lit,
    Not,
    Or,
    PostEntry,
    PreSentence,
    PredDecl,
    Quant,
    Rule,
    TimeExpr,
    Var,
    infer_object_sorts,
    make_condition,
)


class ParseError(KelpsError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"line {line}, column {col}: {message}" if line else message)
        self.line = line
        self.col = col


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

IDENT, NUMBER, SYM, EOF = "ident", "number", "sym", "eof"

_SYMBOLS = ("~>", "->", "=>", "<=", ">=", "!=", "<", ">", "=", "~", "&", "|",
            "{", "}", "(", ")", ",", ":", ".", "+", "-", "/")


@dataclass(frozen=True)
class Token:
    kind: str
    value: object
    line: int
    col: int


def tokenize(text: str) -> list:
    tokens = []
    line, col, i, n = 1, 1, 0, len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c.isspace():
            i += 1
            col += 1
            continue
        if c == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c.isalpha() or c == "_":
            start = i
            i += 1
            while i < n:
                ch = text[i]
                if ch.isalnum() or ch == "_":
                    i += 1
                elif ch == "-" and i + 1 < n and text[i + 1].isalpha():
                    i += 2
                else:
                    break
            tokens.append(Token(IDENT, text[start:i], line, col))
            col += i - start
            continue
        if c.isdigit():
            start = i
            while i < n and text[i].isdigit():
                i += 1
            tokens.append(Token(NUMBER, int(text[start:i]), line, col))
            col += i - start
            continue
        for sym in _SYMBOLS:
            if text.startswith(sym, i):
                tokens.append(Token(SYM, sym, line, col))
                i += len(sym)
                col += len(sym)
                break
        else:
            raise ParseError(f"unexpected character {c!r}", line, col)
    tokens.append(Token(EOF, None, line, col))
    return tokens


# ---------------------------------------------------------------------------
# Raw comparison operands (classified after parsing)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RawOperand:
    kind: str            # "num" | "var" | "const" | "offset"
    name: Optional[str] = None
    value: int = 0


@dataclass(frozen=True)
class RawCmp:
    lhs: RawOperand
    op: str
    rhs: RawOperand
    line: int
    col: int


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_SECTIONS = ("sorts", "fluents", "actions", "events", "aux", "initial",
             "aux-facts", "initiates", "terminates", "preconditions", "rules")

_KIND_SECTIONS = {"fluents": FLUENT, "actions": ACTION, "events": EXTERNAL,
                  "aux": AUX}


class _Parser:
    def __init__(self, tokens: list):
        self.tokens = tokens
        self.pos = 0

    # -- token plumbing ----------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != EOF:
            self.pos += 1
        return tok

    def at_sym(self, *values: str) -> bool:
        t = self.peek()
        return t.kind == SYM and t.value in values

    def expect_sym(self, value: str) -> Token:
        t = self.next()
        if t.kind != SYM or t.value != value:
            raise ParseError(f"expected {value!r}, found {self._show(t)}",
                             t.line, t.col)
        return t

    def expect_ident(self, what: str = "name") -> Token:
        t = self.next()
        if t.kind != IDENT:
            raise ParseError(f"expected {what}, found {self._show(t)}",
                             t.line, t.col)
        return t

    @staticmethod
    def _show(t: Token) -> str:
        if t.kind == EOF:
            return "end of input"
        return repr(t.value)


def _is_var_name(name: str, scope: frozenset) -> bool:
    return name in scope or name[0].isupper()


class FrameworkParser(_Parser):
    """Parses a full framework; declarations are processed before bodies."""

    def __init__(self, text: str):
        super().__init__(tokenize(text))
        self.sorts: dict = {}
        self.predicates: dict = {}
        self.initial: set = set()
        self.aux_facts: set = set()
        self.initiates: list = []
        self.terminates: list = []
        self.pre: list = []
        self.rules: list = []

    def parse(self) -> Framework:
        slices = self._split_sections()
        order = ["sorts", "fluents", "actions", "events", "aux", "initial",
                 "aux-facts", "initiates", "terminates", "preconditions",
                 "rules"]
        for name in order:
            for body in slices.get(name, []):
                sub = _SectionParser(body, self)
                sub.parse_section(name)
        return Framework(
            sorts=self.sorts,
            predicates=self.predicates,
            rules=tuple(self.rules),
            aux=frozenset(self.aux_facts),
            causal=CausalTheory(tuple(self.initiates), tuple(self.terminates),
                                tuple(self.pre)),
            initial=frozenset(self.initial),
        )

    def _split_sections(self) -> dict:
        slices: dict = {}
        while self.peek().kind != EOF:
            head = self.expect_ident("section name")
            if head.value not in _SECTIONS:
                raise ParseError(f"unknown section {head.value!r}",
                                 head.line, head.col)
            self.expect_sym("{")
            depth = 1
            body = []
            while depth:
                t = self.next()
                if t.kind == EOF:
                    raise ParseError(f"unterminated section {head.value!r}",
                                     head.line, head.col)
                if t.kind == SYM and t.value == "{":
                    depth += 1
                elif t.kind == SYM and t.value == "}":
                    depth -= 1
                    if depth == 0:
                        break
                body.append(t)
            body.append(Token(EOF, None, t.line, t.col))
            slices.setdefault(head.value, []).append(body)
        return slices


class _SectionParser(_Parser):
    def __init__(self, tokens: list, fwp: FrameworkParser):
        super().__init__(tokens)
        self.fwp = fwp

    # -- section dispatch --------------------------------------------------

    def parse_section(self, name: str) -> None:
        if name == "sorts":
            self._comma_list(self._sort_decl)
        elif name in _KIND_SECTIONS:
            self._comma_list(lambda: self._pred_decl(_KIND_SECTIONS[name]))
        elif name == "initial":
            self._comma_list(lambda: self.fwp.initial.add(self._ground_atom()))
        elif name == "aux-facts":
            self._comma_list(lambda: self.fwp.aux_facts.add(self._ground_atom()))
        elif name == "initiates":
            self._comma_list(lambda: self._post_entry(self.fwp.initiates))
        elif name == "terminates":
            self._comma_list(lambda: self._post_entry(self.fwp.terminates))
        elif name == "preconditions":
            self._comma_list(self._pre_sentence)
        elif name == "rules":
            self._comma_list(self._rule)

    def _comma_list(self, item) -> None:
        if self.peek().kind == EOF:
            return
        item()
        while self.at_sym(","):
            self.next()
            if self.peek().kind == EOF:
                break  # trailing comma
            item()
        t = self.peek()
        if t.kind != EOF:
            raise ParseError(f"expected ',' or end of section, found "
                             f"{self._show(t)}", t.line, t.col)

    # -- declarations ------------------------------------------------------

    def _sort_decl(self) -> None:
        name = self.expect_ident("sort name")
        if name.value in (TIME_SORT, ANY_SORT):
            raise ParseError(f"sort name {name.value!r} is reserved",
                             name.line, name.col)
        if name.value in self.fwp.sorts:
            raise ParseError(f"duplicate sort {name.value!r}", name.line, name.col)
        self.expect_sym(":")
        self.expect_sym("{")
        constants: list = []
        while not self.at_sym("}"):
            c = self.expect_ident("constant")
            if _is_var_name(c.value, frozenset()):
                raise ParseError(f"sort constants must be lower-case, got "
                                 f"{c.value!r}", c.line, c.col)
            if c.value not in constants:
                constants.append(c.value)
            if self.at_sym(","):
                self.next()
        self.expect_sym("}")
        self.fwp.sorts[name.value] = tuple(constants)

    def _pred_decl(self, kind: str) -> None:
        name = self.expect_ident("predicate name")
        if name.value in self.fwp.predicates:
            raise ParseError(f"duplicate predicate {name.value!r}",
                             name.line, name.col)
        if self.at_sym("/"):
            self.next()
            t = self.next()
            if t.kind != NUMBER:
                raise ParseError("expected arity after '/'", t.line, t.col)
            arg_sorts = (ANY_SORT,) * t.value
        elif self.at_sym("("):
            self.next()
            sorts = []
            while not self.at_sym(")"):
                s = self.expect_ident("sort name")
                if s.value != TIME_SORT and s.value not in self.fwp.sorts:
                    raise ParseError(f"unknown sort {s.value!r}", s.line, s.col)
                sorts.append(s.value)
                if self.at_sym(","):
                    self.next()
            self.expect_sym(")")
            arg_sorts = tuple(sorts)
        else:
            arg_sorts = ()
        self.fwp.predicates[name.value] = PredDecl(name.value, kind, arg_sorts)

    # -- atoms -------------------------------------------------------------

    def _decl_for(self, tok: Token) -> PredDecl:
        decl = self.fwp.predicates.get(tok.value)
        if decl is None:
            raise ParseError(f"unknown predicate {tok.value!r}", tok.line, tok.col)
        return decl

    def _ground_atom(self) -> GroundAtom:
        tok = self.expect_ident("atom")
        decl = self._decl_for(tok)
        args = []
        if self.at_sym("("):
            self.next()
            while not self.at_sym(")"):
                t = self.next()
                if t.kind == NUMBER:
                    args.append(str(t.value))
                elif t.kind == IDENT and not _is_var_name(t.value, frozenset()):
                    args.append(t.value)
                else:
                    raise ParseError(f"expected a constant, found {self._show(t)}",
                                     t.line, t.col)
                if self.at_sym(","):
                    self.next()
            self.expect_sym(")")
        if len(args) != decl.arity:
            raise ParseError(
                f"{tok.value} expects {decl.arity} argument(s), got {len(args)}",
                tok.line, tok.col)
        return (tok.value, tuple(args))

    def _pattern_atom(self, allowed_kinds: tuple, what: str) -> Atom:
        """An unstamped atom that may contain variables (post entries)."""
        tok = self.expect_ident("atom")
        decl = self._decl_for(tok)
        if decl.kind not in allowed_kinds:
            raise ParseError(f"{tok.value} is a {decl.kind} predicate; "
                             f"expected {what}", tok.line, tok.col)
        args: list = []
        if self.at_sym("("):
            self.next()
            while not self.at_sym(")"):
                t = self.next()
                if t.kind == NUMBER:
                    args.append(Const(str(t.value)))
                elif t.kind == IDENT:
                    if _is_var_name(t.value, frozenset()):
                        args.append(Var(t.value))
                    else:
                        args.append(Const(t.value))
                else:
                    raise ParseError(f"bad argument {self._show(t)}", t.line, t.col)
                if self.at_sym(","):
                    self.next()
            self.expect_sym(")")
        if len(args) != decl.arity:
            raise ParseError(
                f"{tok.value} expects {decl.arity} argument(s), got {len(args)}",
                tok.line, tok.col)
        return Atom(tok.value, tuple(args))

    # -- causal theory -----------------------------------------------------

    def _post_entry(self, into: list) -> None:
        key_atoms: list = []
        if self.at_sym("{"):
            self.next()
            while not self.at_sym("}"):
                key_atoms.append(self._pattern_atom(EVENT_KINDS, "an event"))
                if self.at_sym(","):
                    self.next()
            self.expect_sym("}")
        else:
            key_atoms.append(self._pattern_atom(EVENT_KINDS, "an event"))
        tok = self.expect_sym("~>")
        effect = self._pattern_atom((FLUENT,), "a fluent")
        if not key_atoms:
            raise ParseError("post entry needs at least one event", tok.line, tok.col)
        into.extend(self._expand_post(key_atoms, effect))

    def _expand_post(self, key_atoms: list, effect: Atom) -> list:
        """Ground the variable shorthand over the variables' sorts."""
        fw_view = Framework(self.fwp.sorts, self.fwp.predicates, (),
                            frozenset(), CausalTheory(), frozenset())
        sorts = infer_object_sorts(key_atoms + [effect], fw_view)
        names = sorted({a.name for atom in key_atoms + [effect]
                        for a in atom.args if isinstance(a, Var)})
        domains = [fw_view.domain(sorts.get(n, ANY_SORT)) for n in names]
        entries = []
        for combo in itertools.product(*domains):
            b = dict(zip(names, combo))
            key = frozenset(_ground_pattern(a, b) for a in key_atoms)
            entries.append(PostEntry(key, _ground_pattern(effect, b)))
        return entries

    def _pre_sentence(self) -> None:
        formula = self._formula()
        arrow = self.expect_sym("->")
        tail = self.next()
        if tail.kind != IDENT or tail.value != "false":
            raise ParseError("precondition sentence must end in '-> false'",
                             arrow.line, arrow.col)
        name = f"pre{len(self.fwp.pre) + 1}"
        cls = _Classifier([formula], self.fwp, arrow)
        body = cls.build_complex(formula)
        tvars = {te.var for c in body.conditions for te in c.times
                 if te.var is not None}
        for con in body.constraints:
            from .syntax import constraint_time_vars
            tvars |= constraint_time_vars(con)
        if len(tvars) != 1:
            raise ParseError(
                f"precondition body must use exactly one time variable, found "
                f"{sorted(tvars) or 'none'}", arrow.line, arrow.col)
        self.fwp.pre.append(PreSentence(name, body, tvars.pop()))

    # -- rules ---------------------------------------------------------------

    def _rule(self) -> None:
        start = self.peek()
        antecedent = self._formula()
        self.expect_sym("->")
        disjuncts = [self._and_formula()]
        while self.at_sym("|"):
            self.next()
            disjuncts.append(self._and_formula())
        name = f"r{len(self.fwp.rules) + 1}"
        cls = _Classifier([antecedent, *disjuncts], self.fwp, start)
        ante_cx = cls.build_complex(antecedent)
        cons = tuple(cls.build_complex(d) for d in disjuncts)
        for d in cons:
            if d.is_empty:
                raise ParseError("empty consequent disjunct", start.line, start.col)
        self.fwp.rules.append(Rule(name, ante_cx, cons))

    # -- formulas ------------------------------------------------------------

    def _formula(self, scope: frozenset = frozenset()):
        return self._or_formula(scope)

    def _or_formula(self, scope: frozenset):
        parts = [self._and_formula(scope)]
        while self.at_sym("|"):
            self.next()
            parts.append(self._and_formula(scope))
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def _and_formula(self, scope: frozenset = frozenset()):
        parts = [self._unary(scope)]
        while self.at_sym("&"):
            self.next()
            parts.append(self._unary(scope))
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def _unary(self, scope: frozenset):
        t = self.peek()
        if t.kind == SYM and t.value == "~":
            self.next()
            return Not(self._unary(scope))
        if t.kind == SYM and t.value == "(":
            self.next()
            inner = self._implies_formula(scope)
            self.expect_sym(")")
            return inner
        if t.kind == IDENT and t.value in ("forall", "exists"):
            self.next()
            var = self.expect_ident("variable")
            self.expect_sym(":")
            sort = self.expect_ident("sort")
            if sort.value != TIME_SORT and sort.value not in self.fwp.sorts:
                raise ParseError(f"unknown sort {sort.value!r}", sort.line, sort.col)
            self.expect_sym(".")
            body = self._unary(scope | {var.value})
            return Quant(t.value, var.value, sort.value, body)
        if t.kind == IDENT and t.value == "true":
            self.next()
            return Lit(True)
        if t.kind == IDENT and t.value == "false":
            self.next()
            return Lit(False)
        if t.kind == IDENT and t.value in ("max", "min"):
            return self._fncon(scope)
        if t.kind == NUMBER:
            lhs = self._raw_operand(scope)
            return self._comparison(lhs, scope)
        if t.kind == IDENT:
            return self._atom_or_comparison(scope)
        raise ParseError(f"expected a formula, found {self._show(t)}",
                         t.line, t.col)

    def _implies_formula(self, scope: frozenset):
        lhs = self._or_formula(scope)
        if self.at_sym("=>"):
            self.next()
            rhs = self._implies_formula(scope)
            return Implies(lhs, rhs)
        return lhs

    def _fncon(self, scope: frozenset) -> "_RawFn":
        # max/min are parsed as functional constraints directly.
        head = self.next()
        self.expect_sym("(")
        a = self._time_expr(scope)
        self.expect_sym(",")
        b = self._time_expr(scope)
        self.expect_sym(",")
        out = self._time_expr(scope)
        self.expect_sym(")")
        return _RawFn(head.value, a, b, out, head.line, head.col)

    def _time_expr(self, scope: frozenset) -> TimeExpr:
        t = self.next()
        if t.kind == NUMBER:
            return TimeExpr(None, t.value)
        if t.kind == IDENT and _is_var_name(t.value, scope):
            shift = 0
            if self.at_sym("+", "-"):
                sign = 1 if self.next().value == "+" else -1
                num = self.next()
                if num.kind != NUMBER:
                    raise ParseError("expected a number in time offset",
                                     num.line, num.col)
                shift = sign * num.value
            return TimeExpr(t.value, shift)
        raise ParseError(f"expected a time expression, found {self._show(t)}",
                         t.line, t.col)

    def _raw_operand(self, scope: frozenset) -> RawOperand:
        t = self.next()
        if t.kind == NUMBER:
            return RawOperand("num", value=t.value)
        if t.kind == IDENT:
            if _is_var_name(t.value, scope):
                if self.at_sym("+", "-"):
                    sign = 1 if self.next().value == "+" else -1
                    num = self.next()
                    if num.kind != NUMBER:
                        raise ParseError("expected a number in time offset",
                                         num.line, num.col)
                    return RawOperand("offset", t.value, sign * num.value)
                return RawOperand("var", t.value)
            return RawOperand("const", t.value)
        raise ParseError(f"expected a term, found {self._show(t)}", t.line, t.col)

    _CMP_OPS = ("<", "<=", "=", "!=", ">", ">=")

    def _comparison(self, lhs: RawOperand, scope: frozenset) -> RawCmp:
        t = self.next()
        if t.kind != SYM or t.value not in self._CMP_OPS:
            raise ParseError(f"expected a comparison operator, found "
                             f"{self._show(t)}", t.line, t.col)
        rhs = self._raw_operand(scope)
        op = t.value
        if op in (">", ">="):
            lhs, rhs, op = rhs, lhs, "<" if op == ">" else "<="
        return RawCmp(lhs, op, rhs, t.line, t.col)

    def _atom_or_comparison(self, scope: frozenset):
        tok = self.next()
        if self.at_sym("("):
            return self._stamped_atom(tok, scope)
        if self.at_sym(*self._CMP_OPS) or self.at_sym("+", "-"):
            if _is_var_name(tok.value, scope):
                if self.at_sym("+", "-"):
                    sign = 1 if self.next().value == "+" else -1
                    num = self.next()
                    if num.kind != NUMBER:
                        raise ParseError("expected a number in time offset",
                                         num.line, num.col)
                    lhs = RawOperand("offset", tok.value, sign * num.value)
                else:
                    lhs = RawOperand("var", tok.value)
            else:
                lhs = RawOperand("const", tok.value)
            return self._comparison(lhs, scope)
        # Bare 0-ary atom.
        decl = self._decl_for(tok)
        if decl.kind == AUX:
            if decl.arity:
                raise ParseError(f"{tok.value} expects {decl.arity} argument(s)",
                                 tok.line, tok.col)
            return Atom(tok.value, ())
        raise ParseError(f"{decl.kind} atom {tok.value} needs a timestamp",
                         tok.line, tok.col)

    def _stamped_atom(self, tok: Token, scope: frozenset) -> Atom:
        decl = self._decl_for(tok)
        self.expect_sym("(")
        raw: list = []
        while not self.at_sym(")"):
            raw.append(self._term_or_time(scope))
            if self.at_sym(","):
                self.next()
        close = self.expect_sym(")")
        if decl.kind == AUX:
            want = decl.arity
            if len(raw) != want:
                raise ParseError(f"{tok.value} expects {want} argument(s), got "
                                 f"{len(raw)}", tok.line, tok.col)
            return Atom(tok.value, tuple(self._as_object(x, tok, i, decl)
                                         for i, x in enumerate(raw)))
        want = decl.arity + 1
        if len(raw) != want:
            raise ParseError(
                f"{tok.value} expects {want} argument(s) (including the "
                f"timestamp), got {len(raw)}", tok.line, tok.col)
        time = self._as_time(raw[-1], close)
        args = tuple(self._as_object(x, tok, i, decl)
                     for i, x in enumerate(raw[:-1]))
        return Atom(tok.value, args, time)

    def _term_or_time(self, scope: frozenset):
        t = self.next()
        if t.kind == NUMBER:
            return TimeExpr(None, t.value)
        if t.kind != IDENT:
            raise ParseError(f"bad argument {self._show(t)}", t.line, t.col)
        if _is_var_name(t.value, scope) and self.at_sym("+", "-"):
            sign = 1 if self.next().value == "+" else -1
            num = self.next()
            if num.kind != NUMBER:
                raise ParseError("expected a number in time offset",
                                 num.line, num.col)
            return TimeExpr(t.value, sign * num.value)
        if _is_var_name(t.value, scope):
            return ("var", t.value)
        return ("const", t.value)

    def _as_object(self, x, tok: Token, pos: int, decl: PredDecl):
        if isinstance(x, TimeExpr):
            if x.var is None and pos < decl.arity and decl.arg_sorts[pos] == TIME_SORT:
                return Const(str(x.shift))  # reference-time literal
            raise ParseError(
                f"time expression in object position {pos} of {tok.value}",
                tok.line, tok.col)
        kind, name = x
        return Var(name) if kind == "var" else Const(name)

    def _as_time(self, x, near: Token) -> TimeExpr:
        if isinstance(x, TimeExpr):
            return x
        kind, name = x
        if kind == "var":
            return TimeExpr(name, 0)
        raise ParseError(f"constant {name!r} in timestamp position",
                         near.line, near.col)


@dataclass(frozen=True)
class _RawFn:
    fn: str
    a: TimeExpr
    b: TimeExpr
    out: TimeExpr
    line: int
    col: int


def _ground_pattern(atom: Atom, b: dict) -> GroundAtom:
    args = []
    for a in atom.args:
        if isinstance(a, Var):
            args.append(b[a.name])
        else:
            args.append(a.name)
    return (atom.pred, tuple(args))


# ---------------------------------------------------------------------------
# Comparison classification and complex building
# ---------------------------------------------------------------------------

class _Classifier:
    """Resolves raw comparisons to constraints or object conditions.

    Time-sortedness propagates from timestamp positions and max/min
    operands across comparisons until a fixpoint; whatever still touches
    no time-sorted operand must be an object (dis)equation.
    """

    def __init__(self, formulas: list, fwp: FrameworkParser, near: Token):
        self.fwp = fwp
        self.near = near
        self.time_vars: set = set()
        self.object_vars: set = set()
        for f in formulas:
            self._collect(f, frozenset())
        self._classify_fixpoint(formulas)

    def _collect(self, f, qvars: frozenset) -> None:
        if isinstance(f, Atom):
            if f.time is not None and f.time.var is not None:
                self.time_vars.add(f.time.var)
            for a in f.args:
                if isinstance(a, Var) and a.name not in qvars:
                    self.object_vars.add(a.name)
        elif isinstance(f, _RawFn):
            for te in (f.a, f.b, f.out):
                if te.var is not None:
                    self.time_vars.add(te.var)
        elif isinstance(f, RawCmp):
            pass
        elif isinstance(f, Not):
            self._collect(f.body, qvars)
        elif isinstance(f, (And, Or)):
            for p in f.parts:
                self._collect(p, qvars)
        elif isinstance(f, Implies):
            self._collect(f.lhs, qvars)
            self._collect(f.rhs, qvars)
        elif isinstance(f, Quant):
            self._collect(f.body, qvars | {f.var})

    def _cmps(self, f) -> list:
        if isinstance(f, RawCmp):
            return [f]
        if isinstance(f, Not):
            return self._cmps(f.body)
        if isinstance(f, (And, Or)):
            return [c for p in f.parts for c in self._cmps(p)]
        if isinstance(f, Implies):
            return self._cmps(f.lhs) + self._cmps(f.rhs)
        if isinstance(f, Quant):
            return self._cmps(f.body)
        return []

    def _classify_fixpoint(self, formulas: list) -> None:
        cmps = [c for f in formulas for c in self._cmps(f)]
        changed = True
        while changed:
            changed = False
            for c in cmps:
                if self._is_temporal(c):
                    for side in (c.lhs, c.rhs):
                        if side.kind == "var" and side.name not in self.time_vars:
                            self.time_vars.add(side.name)
                            changed = True

    def _is_temporal(self, c: RawCmp) -> bool:
        for side in (c.lhs, c.rhs):
            if side.kind in ("num", "offset"):
                return True
            if side.kind == "var" and side.name in self.time_vars:
                return True
        return False

    def _operand_to_time(self, o: RawOperand, c: RawCmp) -> TimeExpr:
        if o.kind == "num":
            return TimeExpr(None, o.value)
        if o.kind == "offset":
            return TimeExpr(o.name, o.value)
        if o.kind == "var":
            return TimeExpr(o.name, 0)
        raise ParseError(f"constant {o.name!r} in a temporal comparison",
                         c.line, c.col)

    def _operand_to_term(self, o: RawOperand, c: RawCmp):
        if o.kind == "var":
            return Var(o.name)
        if o.kind == "const":
            return Const(o.name)
        raise ParseError("mixed time/object comparison", c.line, c.col)

    def resolve_cmp(self, c: RawCmp):
        """A RawCmp becomes either a Cmp constraint or a builtin atom."""
        if self._is_temporal(c):
            if c.op == NEQ:
                raise ParseError("'!=' is not a temporal constraint", c.line, c.col)
            return Cmp(self._operand_to_time(c.lhs, c),
                       c.op, self._operand_to_time(c.rhs, c))
        if c.op not in (EQ, NEQ):
            raise ParseError(f"comparison {c.op!r} needs time-sorted operands",
                             c.line, c.col)
        for side in (c.lhs, c.rhs):
            if side.kind == "var" and side.name not in self.object_vars:
                raise ParseError(
                    f"cannot classify comparison: variable {side.name} occurs "
                    f"only in comparisons", c.line, c.col)
        return Atom(c.op, (self._operand_to_term(c.lhs, c),
                           self._operand_to_term(c.rhs, c)))

    def _rebuild(self, f) -> Formula:
        """Replace nested RawCmp nodes; nested temporal constraints are errors."""
        if isinstance(f, RawCmp):
            out = self.resolve_cmp(f)
            if isinstance(out, Cmp):
                raise ParseError("temporal constraint nested inside a condition",
                                 f.line, f.col)
            return out
        if isinstance(f, _RawFn):
            raise ParseError(f"{f.fn} constraint nested inside a condition",
                             f.line, f.col)
        if isinstance(f, Atom) or isinstance(f, Lit):
            return f
        if isinstance(f, Not):
            return Not(self._rebuild(f.body))
        if isinstance(f, And):
            return And(tuple(self._rebuild(p) for p in f.parts))
        if isinstance(f, Or):
            return Or(tuple(self._rebuild(p) for p in f.parts))
        if isinstance(f, Implies):
            return Implies(self._rebuild(f.lhs), self._rebuild(f.rhs))
        if isinstance(f, Quant):
            return Quant(f.q, f.var, f.sort, self._rebuild(f.body))
        raise ParseError(f"unexpected formula node {f!r}",
                         self.near.line, self.near.col)

    def build_complex(self, formula) -> Complex:
        """Flatten top-level conjuncts into conditions and constraints."""
        conjuncts = formula.parts if isinstance(formula, And) else (formula,)
        conditions: list = []
        constraints: list = []
        for part in conjuncts:
            if isinstance(part, Lit) and part.value:
                continue
            if isinstance(part, Lit):
                raise ParseError("'false' cannot be a conjunct",
                                 self.near.line, self.near.col)
            if isinstance(part, _RawFn):
                constraints.append(FnCon(part.fn, part.a, part.b, part.out))
                continue
            if isinstance(part, RawCmp):
                out = self.resolve_cmp(part)
                if isinstance(out, Cmp):
                    constraints.append(out)
                else:
                    conditions.append(make_condition(out))
                continue
            conditions.append(make_condition(self._rebuild(part)))
        return Complex(tuple(conditions), tuple(constraints))


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------

def parse_framework(text: str) -> Framework:
    """Parse framework source text into a loaded framework.

    Raises :class:`ParseError` with position information on malformed
    input, unknown names, or arity mismatches.  Post-entry variable
    shorthand is expanded to ground instances here.
    """
    return FrameworkParser(text).parse()


def load_framework(path) -> Framework:
    with open(path, encoding="utf-8") as fh:
        return parse_framework(fh.read())


def parse_events(text: str, fw: Framework) -> dict:
    """Parse an external-event stream: lines ``<time>: atom[, atom]*``.

    Times must be strictly increasing and at least 1; every atom must be
    a declared external event, written without its timestamp.
    """
    out: dict = {}
    last = 0
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.split("#", 1)[0].strip()
        if not line:
            continue
        head, sep, rest = line.partition(":")
        if not sep:
            raise ParseError("expected '<time>: <events>'", lineno, 1)
        try:
            t = int(head.strip())
        except ValueError:
            raise ParseError(f"bad time {head.strip()!r}", lineno, 1) from None
        if t <= last:
            raise ParseError(f"times must be strictly increasing (got {t} "
                             f"after {last})", lineno, 1)
        last = t
        atoms = set()
        for chunk in _split_atoms(rest):
            try:
                ga = parse_ground_atom(chunk)
            except KelpsError as e:
                raise ParseError(str(e), lineno, 1) from None
            decl = fw.predicates.get(ga[0])
            if decl is None:
                raise ParseError(f"unknown predicate {ga[0]!r}", lineno, 1)
            if decl.kind != EXTERNAL:
                raise ParseError(f"{ga[0]} is not an external event", lineno, 1)
            if len(ga[1]) != decl.arity:
                raise ParseError(f"{ga[0]} expects {decl.arity} argument(s)",
                                 lineno, 1)
            atoms.add(ga)
        if atoms:
            out[t] = frozenset(atoms)
    return out


def load_events(path, fw: Framework) -> dict:
    with open(path, encoding="utf-8") as fh:
        return parse_events(fh.read(), fw)


def _split_atoms(s: str) -> list:
    """Split on commas outside parentheses."""
    parts, depth, cur = [], 0, []
    for ch in s:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if cur and "".join(cur).strip():
        parts.append("".join(cur))
    return [p.strip() for p in parts if p.strip()]
