"""The observe-react cycle: destructive runs over a framework.

Cycle ``i`` works on the current state S_i, the events ev_i that produced
it, a set of residual rules R_i and a goal forest G_i:

  1. Antecedent evaluation (exhaustive).  Every admissible way of
     evaluating part of a residual antecedent against the current frame
     spawns a further residual rule; a fully evaluated antecedent opens a
     new goal tree whose children are the satisfiable consequent
     disjuncts.
  2. Goal clause evaluation (a choice).  Selected clauses are reduced by
     their now-true parts, adding children; a clause reduced to nothing
     adds ``true`` and marks its tree achieved.
  3. Candidate actions (a choice).  Bare action atoms of selected clauses
     are stamped with time ``i+1``; each selection carries along every
     bare action the stamping grounds to that time.
  4. Update (a choice).  A precondition-consistent subset of the
     candidates is committed together with the incoming external events,
     and the state advances destructively.

Choices are reified as :class:`Strategy` objects so that runs replay
bit-for-bit; :func:`explore` drives the same machinery through every
choice instead.  Because goal forests only ever grow within a cycle and
candidate subsets are filtered in step 4, branching on the step-4 subset
with maximal steps 2/3 reaches every action sequence any choice sequence
could produce.
"""

from __future__ import annotations

import itertools
import json
import random
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from . import temporal
from .model import (
    Frame,
    Trace,
    conjunction_solutions,
    constraint_closure,
    eval_condition,
)
from .state import (
    SUBSET,
    EventSet,
    check_preconditions,
    succ,
)
from .syntax import (
    ACTION,
    Atom,
    Binding,
    BUILTIN_OBJECT_PREDS,
    Cmp,
    Complex,
    Condition,
    Framework,
    GroundAtom,
    KelpsError,
    Rule,
    TimeExpr,
    format_ground_atom,
    ground_of,
    subst_complex,
    subst_condition,
    subst_constraint,
    subst_time,
    time_bound,
)


class EngineError(KelpsError):
    pass


def _canon_binding(b: Binding) -> tuple:
    return tuple(sorted(b.items()))


def _binding_str(b) -> str:
    items = b if isinstance(b, tuple) else sorted(b.items())
    return ",".join(f"{k}={v}" for k, v in items)


# ---------------------------------------------------------------------------
# Residual rules and goal forests
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ResidualRule:
    """A partially evaluated rule, traceable back to its source.

    ``binding`` accumulates every substitution applied so far, ``consumed``
    are the source-antecedent condition indices already evaluated, and
    ``origin`` maps the remainder's conditions back to source indices.
    """

    source: Rule
    binding: tuple
    consumed: frozenset
    remainder: Complex
    consequents: tuple
    origin: tuple
    born: int

    @property
    def key(self) -> tuple:
        return (self.source.name, self.binding, self.consumed)


@dataclass
class GoalNode:
    nid: int
    clause: Complex
    binding: tuple           # accumulated over the source rule's variables
    disjunct: int
    consumed: frozenset      # consumed condition indices of the disjunct
    origin: tuple            # clause condition index -> disjunct condition index
    children: list = field(default_factory=list)
    is_true: bool = False
    dead: bool = False
    applied: set = field(default_factory=set)

    def live(self) -> bool:
        return not self.is_true and not self.dead

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()

    def leaves(self):
        if not self.children:
            yield self
        for child in self.children:
            yield from child.leaves()


@dataclass
class GoalTree:
    tid: int
    source: Rule
    binding: tuple           # grounding of the antecedent that opened the tree
    opened_at: int
    children: list = field(default_factory=list)
    achieved_at: Optional[int] = None
    closed: bool = False     # set by the step-2 dedup optimization

    def nodes(self):
        for child in self.children:
            yield from child.walk()

    def live_nodes(self):
        return [n for n in self.nodes() if n.live()]

    def first_open_leaf(self) -> Optional[GoalNode]:
        for child in self.children:
            for leaf in child.leaves():
                if leaf.live():
                    return leaf
        return None

    @property
    def failed(self) -> bool:
        return (self.achieved_at is None
                and all(not n.live() for n in self.nodes()))


# ---------------------------------------------------------------------------
# Reductions and stampings
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Reduction:
    """One admissible ``current < later`` evaluation of a complex's conditions."""

    mask: tuple       # evaluated condition indices (within the complex)
    theta: tuple      # canonical binding of exactly the current part's variables
    later: Complex
    later_origin: tuple


def admissible_reductions(cx: Complex, frame: Frame, fw: Framework,
                          bound: int) -> list:
    """Every admissible way to evaluate part of ``cx`` at this frame now.

    A choice of conditions is admissible when they are jointly true here
    with their timestamps at the frame time, every constraint their
    binding grounds holds (those constraints travel with the evaluated
    part), and the remainder can still be scheduled strictly later.
    """
    out = []
    n = len(cx.conditions)
    for mask in range(1, 1 << n):
        idxs = tuple(j for j in range(n) if mask >> j & 1)
        conds = [cx.conditions[j] for j in idxs]
        for theta in conjunction_solutions(conds, frame, {}, fw, horizon=bound):
            ok, ext, _ground, open_cons = constraint_closure(cx.constraints, theta)
            if not ok:
                continue
            later_idx = tuple(j for j in range(n) if not mask >> j & 1)
            later = Complex(
                tuple(subst_condition(cx.conditions[j], ext) for j in later_idx),
                tuple(subst_constraint(c, ext) for c in open_cons),
            )
            seq = tuple(Cmp(TimeExpr(None, frame.t), "<", te)
                        for te in later.condition_times())
            if not temporal.satisfiable(later.constraints + seq, {}, bound):
                continue
            out.append(Reduction(idxs, _canon_binding(ext), later, later_idx))
    return out


@dataclass(frozen=True)
class Stamping:
    """A step-3 selection: bare actions of a clause stamped with time t+1."""

    tau: tuple               # canonical binding of the stamped timestamp vars
    actions: frozenset       # ground action atoms (unstamped)
    stamped: tuple           # clause condition indices carrying those actions


def _bare_action_indices(clause: Complex, fw: Framework) -> list:
    out = []
    for j, cond in enumerate(clause.conditions):
        f = cond.formula
        if (isinstance(f, Atom) and f.pred not in BUILTIN_OBJECT_PREDS
                and f.pred in fw.predicates
                and fw.predicates[f.pred].kind == ACTION):
            out.append(j)
    return out


def stamp_options(clause: Complex, t1: int, fw: Framework, bound: int) -> list:
    """Every way to stamp bare actions of a clause with time ``t1``.

    Each option's action set is closed: it contains every bare action the
    chosen time binding grounds to ``t1``, per the all-in reading of
    candidate selection.  Options whose remainder cannot follow at or
    after ``t1`` are dropped.
    """
    bare = _bare_action_indices(clause, fw)
    options: dict = {}
    for r in range(1, len(bare) + 1):
        for chosen in itertools.combinations(bare, r):
            tau: Binding = {}
            ok = True
            for j in chosen:
                te = clause.conditions[j].time
                if te is None:
                    ok = False
                    break
                if te.var is None:
                    if te.shift != t1:
                        ok = False
                        break
                elif te.var in tau:
                    if tau[te.var] + te.shift != t1:
                        ok = False
                        break
                else:
                    v = t1 - te.shift
                    if v < 0:
                        ok = False
                        break
                    tau[te.var] = v
            if not ok:
                continue
            key = _canon_binding(tau)
            if key in options:
                continue
            option = _close_stamping(clause, tau, t1, fw, bound)
            if option is not None:
                options[key] = option
    return [options[k] for k in sorted(options)]


def _close_stamping(clause: Complex, tau: Binding, t1: int, fw: Framework,
                    bound: int) -> Optional[Stamping]:
    bare = _bare_action_indices(clause, fw)
    stamped, atoms = [], []
    for j in bare:
        cond = clause.conditions[j]
        te = subst_time(cond.time, tau) if cond.time is not None else None
        if te is None or not te.is_ground or te.value() != t1:
            continue
        atom = cond.formula
        grounded = subst_complex(Complex((cond,), ()), tau).conditions[0].formula
        try:
            ga = ground_of(grounded)
        except KelpsError:
            continue  # object variables still open: not a ground candidate
        stamped.append(j)
        atoms.append(ga)
    if not stamped:
        return None
    ok, ext, _ground, open_cons = constraint_closure(clause.constraints, tau)
    if not ok:
        return None
    rest_times = [subst_time(cond.time, ext)
                  for j, cond in enumerate(clause.conditions)
                  if j not in stamped and cond.time is not None]
    seq = tuple(Cmp(TimeExpr(None, t1), "<=", te) for te in rest_times)
    if not temporal.satisfiable(tuple(open_cons) + seq, {}, bound):
        return None
    return Stamping(_canon_binding(ext), frozenset(atoms), tuple(stamped))


# ---------------------------------------------------------------------------
# Choice options as the strategies see them
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Step2Option:
    tree: GoalTree
    node: GoalNode
    reduction: Reduction

    @property
    def key(self) -> str:
        r = self.reduction
        return (f"2:{self.tree.tid}:{self.node.nid}:"
                f"{','.join(map(str, r.mask))}:{_binding_str(r.theta)}")


@dataclass(frozen=True)
class Step3Option:
    tree: GoalTree
    node: GoalNode
    stamping: Stamping

    @property
    def key(self) -> str:
        s = self.stamping
        acts = ";".join(format_ground_atom(a) for a in sorted(s.actions))
        return f"3:{self.tree.tid}:{self.node.nid}:{_binding_str(s.tau)}:{acts}"


class Strategy:
    """Choice policy for steps 2, 3 and 4.  Subclasses must be deterministic
    functions of (cycle, options) so that runs can be replayed."""

    def choose_step2(self, cycle: int, options: list) -> list:
        raise NotImplementedError

    def choose_step3(self, cycle: int, options: list) -> list:
        raise NotImplementedError

    def choose_step4(self, cycle: int, ext: frozenset, candidates: tuple,
                     violations: Callable) -> Optional[frozenset]:
        raise NotImplementedError


def _passing_subsets(candidates: tuple, violations: Callable) -> list:
    """All violation-free subsets, largest first, lexicographic tie-break."""
    n = len(candidates)
    subsets = []
    for mask in range(1 << n):
        subset = frozenset(candidates[j] for j in range(n) if mask >> j & 1)
        subsets.append(subset)
    subsets.sort(key=lambda s: (-len(s), tuple(sorted(s))))
    return [s for s in subsets if not violations(s)]


def _best_passing(candidates: tuple, violations: Callable) -> Optional[frozenset]:
    full = frozenset(candidates)
    if not violations(full):
        return full
    if len(candidates) <= 12:
        passing = _passing_subsets(candidates, violations)
        return passing[0] if passing else None
    # Too many candidates to enumerate: greedy maximal under canonical order.
    acc: set = set()
    for c in sorted(candidates):
        if not violations(frozenset(acc | {c})):
            acc.add(c)
    acc = frozenset(acc)
    return acc if not violations(acc) else None


class DeterministicStrategy(Strategy):
    """Depth-first, first-disjunct policy.

    Per open tree, work happens on the first live leaf in traversal order:
    all of its reductions apply in step 2 and its largest stamping is
    selected in step 3.  Achieved trees are left alone, so alternative
    disjuncts only run when the preferred one has died.  Step 4 commits
    the maximal precondition-consistent candidate subset.
    """

    def _active_nodes(self, options: list) -> set:
        active = set()
        trees = {opt.tree.tid: opt.tree for opt in options}
        for tree in trees.values():
            if tree.achieved_at is not None or tree.closed:
                continue
            leaf = tree.first_open_leaf()
            if leaf is not None:
                active.add((tree.tid, leaf.nid))
        return active

    def choose_step2(self, cycle: int, options: list) -> list:
        active = self._active_nodes(options)
        return [o for o in options if (o.tree.tid, o.node.nid) in active]

    def choose_step3(self, cycle: int, options: list) -> list:
        active = self._active_nodes(options)
        best: dict = {}
        for o in options:
            spot = (o.tree.tid, o.node.nid)
            if spot not in active:
                continue
            cur = best.get(o.tree.tid)
            rank = (len(o.stamping.actions), [a for a in sorted(o.stamping.actions)])
            if cur is None or rank > cur[0]:
                best[o.tree.tid] = (rank, o)
        return [best[t][1] for t in sorted(best)]

    def choose_step4(self, cycle, ext, candidates, violations):
        return _best_passing(candidates, violations)


class RandomStrategy(Strategy):
    """Seeded random choices: any outcome it produces must still be reactive."""

    def __init__(self, seed: int):
        self.seed = seed
        self.rng = random.Random(seed)

    def choose_step2(self, cycle: int, options: list) -> list:
        return [o for o in options if self.rng.random() < 0.5]

    def choose_step3(self, cycle: int, options: list) -> list:
        return [o for o in options if self.rng.random() < 0.5]

    def choose_step4(self, cycle, ext, candidates, violations):
        wanted = frozenset(c for c in candidates if self.rng.random() < 0.5)
        if not violations(wanted):
            return wanted
        passing = _passing_subsets(candidates, violations) if len(candidates) <= 12 else []
        if passing:
            return self.rng.choice(sorted(passing, key=lambda s: tuple(sorted(s))))
        return _best_passing(candidates, violations)


class ScriptedStrategy(Strategy):
    """Replays a recorded choice list; any divergence is an error."""

    def __init__(self, script: dict):
        self.cycles = script.get("cycles", [])

    def _cycle(self, cycle: int) -> dict:
        if cycle >= len(self.cycles):
            raise EngineError(f"script has no entry for cycle {cycle}")
        return self.cycles[cycle]

    def _pick(self, cycle: int, options: list, field_name: str) -> list:
        wanted = list(self._cycle(cycle).get(field_name, []))
        by_key = {o.key: o for o in options}
        chosen = []
        for key in wanted:
            if key not in by_key:
                raise EngineError(
                    f"cycle {cycle}: scripted choice {key!r} is not available")
            chosen.append(by_key[key])
        return chosen

    def choose_step2(self, cycle: int, options: list) -> list:
        return self._pick(cycle, options, "step2")

    def choose_step3(self, cycle: int, options: list) -> list:
        return self._pick(cycle, options, "step3")

    def choose_step4(self, cycle, ext, candidates, violations):
        wanted = frozenset(parse_acts(self._cycle(cycle).get("step4", [])))
        if not wanted <= frozenset(candidates):
            raise EngineError(f"cycle {cycle}: scripted actions are not candidates")
        if violations(wanted):
            raise EngineError(f"cycle {cycle}: scripted actions violate preconditions")
        return wanted


def parse_acts(items: list) -> frozenset:
    from .model import parse_ground_atom
    return frozenset(parse_ground_atom(s) for s in items)


def make_strategy(spec: str) -> Strategy:
    """Build a strategy from its command-line spelling."""
    if spec == "det":
        return DeterministicStrategy()
    if spec.startswith("rand:"):
        return RandomStrategy(int(spec.split(":", 1)[1]))
    if spec.startswith("script:"):
        path = spec.split(":", 1)[1]
        with open(path, encoding="utf-8") as fh:
            return ScriptedStrategy(json.load(fh))
    raise EngineError(f"unknown strategy {spec!r}")


# ---------------------------------------------------------------------------
# The engine
# ---------------------------------------------------------------------------

class Engine:
    """One run's mutable cycle state; use :func:`run` for the packaged loop."""

    def __init__(self, fw: Framework, horizon: int,
                 strategy: Optional[Strategy] = None,
                 match_mode: str = SUBSET, prune: bool = True,
                 dedup_step2: bool = False):
        if horizon < 1:
            raise EngineError("horizon must be at least 1")
        self.fw = fw
        self.horizon = horizon
        self.bound = time_bound(fw, horizon)
        self.strategy = strategy or DeterministicStrategy()
        self.match_mode = match_mode
        self.prune = prune
        self.dedup_step2 = dedup_step2

        self.time = 0
        self.state = fw.initial
        self.events = EventSet()
        self.rules: list = []
        self.trees: list = []
        self.halted: Optional[dict] = None

        self._residual_keys: set = set()
        self._tree_keys: set = set()
        self._nid = itertools.count()
        self._states = [fw.initial]
        self._ext = [frozenset()]
        self._acts = [frozenset()]
        self.records: list = []

        for rule in fw.rules:
            ante = rule.antecedent
            if not ante.conditions:
                # A constraint-only antecedent is ground by well-formedness;
                # true constraints make the rule unconditionally obliging.
                if ante.constraints and not temporal.eval_ground_constraints(
                        ante.constraints, {}):
                    continue
                self._open_tree(rule, {}, rule.consequents, at=0)
            else:
                self._add_residual(ResidualRule(
                    source=rule, binding=(), consumed=frozenset(),
                    remainder=ante, consequents=rule.consequents,
                    origin=tuple(range(len(ante.conditions))), born=0))

    # -- shared plumbing ---------------------------------------------------

    def current_frame(self) -> Frame:
        return Frame(self.time, self.fw.aux | self.state | self.events.all)

    def partial_trace(self) -> Trace:
        return Trace(self.fw.aux, tuple(self._states), tuple(self._ext),
                     tuple(self._acts),
                     pre_violation=(self.halted["time"], self.halted["violations"])
                     if self.halted else None)

    def _add_residual(self, res: ResidualRule) -> bool:
        if res.key in self._residual_keys:
            return False
        self._residual_keys.add(res.key)
        self.rules.append(res)
        return True

    def _open_tree(self, source: Rule, binding: Binding, consequents: tuple,
                   at: int) -> None:
        """Start a goal tree: instantiated consequent at the root, each
        disjunct with satisfiable constraints as a child clause."""
        key = (source.name, _canon_binding(binding))
        if key in self._tree_keys:
            return
        self._tree_keys.add(key)
        tree = GoalTree(tid=len(self.trees), source=source,
                        binding=_canon_binding(binding), opened_at=at)
        for d_idx, inst in enumerate(consequents):
            if temporal.satisfiable(inst.constraints, {}, self.bound):
                tree.children.append(GoalNode(
                    nid=next(self._nid), clause=inst,
                    binding=_canon_binding(binding), disjunct=d_idx,
                    consumed=frozenset(),
                    origin=tuple(range(len(inst.conditions)))))
        self.trees.append(tree)

    # -- pruning -----------------------------------------------------------

    def _alive(self, cx: Complex) -> bool:
        """Whether the complex can still be scheduled at or after now."""
        seq = tuple(Cmp(TimeExpr(None, self.time), "<=", te)
                    for te in cx.condition_times())
        return temporal.satisfiable(cx.constraints + seq, {}, self.bound)

    def _prune(self) -> None:
        kept = []
        for res in self.rules:
            if self._alive(res.remainder):
                kept.append(res)
            else:
                self._residual_keys.discard(res.key)
        self.rules = kept
        for tree in self.trees:
            for node in tree.nodes():
                if node.live() and not self._alive(node.clause):
                    node.dead = True

    # -- step 1 ------------------------------------------------------------

    def _step1(self) -> None:
        frame = self.current_frame()
        queue = list(self.rules)
        while queue:
            res = queue.pop(0)
            for red in admissible_reductions(res.remainder, frame, self.fw,
                                             self.bound):
                theta = dict(red.theta)
                binding = dict(res.binding)
                binding.update(theta)
                consumed = res.consumed | {res.origin[j] for j in red.mask}
                consequents = tuple(subst_complex(d, theta)
                                    for d in res.consequents)
                if red.later.is_empty:
                    self._open_tree(res.source, binding, consequents,
                                    at=self.time)
                else:
                    child = ResidualRule(
                        source=res.source, binding=_canon_binding(binding),
                        consumed=consumed, remainder=red.later,
                        consequents=consequents,
                        origin=tuple(res.origin[j] for j in red.later_origin),
                        born=self.time)
                    if self._add_residual(child):
                        queue.append(child)

    # -- step 2 ------------------------------------------------------------

    def _step2_options(self) -> list:
        frame = self.current_frame()
        options = []
        for tree in self.trees:
            if tree.closed:
                continue
            for node in list(tree.nodes()):
                if not node.live():
                    continue
                for red in admissible_reductions(node.clause, frame, self.fw,
                                                 self.bound):
                    if (red.mask, red.theta) in node.applied:
                        continue
                    options.append(Step2Option(tree, node, red))
        options.sort(key=lambda o: o.key)
        return options

    def _apply_step2(self, chosen: list) -> list:
        applied = []
        for opt in sorted(chosen, key=lambda o: o.key):
            node, red = opt.node, opt.reduction
            if (red.mask, red.theta) in node.applied:
                continue
            node.applied.add((red.mask, red.theta))
            binding = dict(node.binding)
            binding.update(dict(red.theta))
            child = GoalNode(
                nid=next(self._nid), clause=red.later,
                binding=_canon_binding(binding), disjunct=node.disjunct,
                consumed=node.consumed | {node.origin[j] for j in red.mask},
                origin=tuple(node.origin[j] for j in red.later_origin))
            if red.later.is_empty:
                child.is_true = True
                if opt.tree.achieved_at is None:
                    opt.tree.achieved_at = self.time
                if self.dedup_step2:
                    opt.tree.closed = True
            node.children.append(child)
            applied.append(opt.key)
        return applied

    # -- step 3 ------------------------------------------------------------

    def _step3_options(self) -> list:
        t1 = self.time + 1
        options = []
        for tree in self.trees:
            if tree.closed:
                continue
            for node in list(tree.nodes()):
                if not node.live():
                    continue
                for stamping in stamp_options(node.clause, t1, self.fw,
                                              self.bound):
                    options.append(Step3Option(tree, node, stamping))
        options.sort(key=lambda o: o.key)
        return options

    # -- step 4 ------------------------------------------------------------

    def _violations_fn(self, ext: frozenset) -> Callable:
        frame = self.current_frame()

        def violations(acts: frozenset) -> list:
            return check_preconditions(frame, ext | acts, self.fw)

        return violations

    def _commit(self, ext: frozenset, acts: frozenset) -> None:
        ev = EventSet(ext, acts)
        self.state = succ(self.state, ev.all, self.fw.causal, self.match_mode)
        self.events = ev
        self.time += 1
        self._states.append(self.state)
        self._ext.append(ext)
        self._acts.append(acts)

    # -- the cycle ----------------------------------------------------------

    def step(self, ext_events: frozenset = frozenset()) -> dict:
        """Run one full cycle, consuming the external events for time+1."""
        if self.halted:
            raise EngineError("engine has halted on a precondition violation")
        if self.time >= self.horizon:
            raise EngineError("horizon reached")
        if self.prune:
            self._prune()
        self._step1()
        chosen2 = self.strategy.choose_step2(self.time, self._step2_options())
        applied2 = self._apply_step2(chosen2)
        chosen3 = self.strategy.choose_step3(self.time, self._step3_options())
        candidates = tuple(sorted({a for o in chosen3
                                   for a in o.stamping.actions}))
        violations = self._violations_fn(ext_events)
        acts = self.strategy.choose_step4(self.time, ext_events, candidates,
                                          violations)
        if acts is None:
            diag = [str(v) for v in violations(frozenset())]
            self.halted = {"time": self.time + 1, "violations": diag}
            acts = frozenset()
        record = {
            "step2": applied2,
            "step3": [o.key for o in sorted(chosen3, key=lambda o: o.key)],
            "step4": [format_ground_atom(a) for a in sorted(acts)],
        }
        self.records.append(record)
        self._commit(ext_events, acts)
        return record

    def final_evaluation(self) -> None:
        """Steps 1-2 at the horizon, so late antecedents still open trees and
        just-satisfied clauses still count as achieved.  No events move."""
        if self.prune:
            self._prune()
        self._step1()
        self._apply_step2(self._step2_options())

    # -- cloning (for exploration) ------------------------------------------

    def clone(self) -> "Engine":
        twin = object.__new__(Engine)
        twin.fw = self.fw
        twin.horizon = self.horizon
        twin.bound = self.bound
        twin.strategy = self.strategy
        twin.match_mode = self.match_mode
        twin.prune = self.prune
        twin.dedup_step2 = self.dedup_step2
        twin.time = self.time
        twin.state = self.state
        twin.events = self.events
        twin.rules = list(self.rules)
        twin.halted = None
        twin._residual_keys = set(self._residual_keys)
        twin._tree_keys = set(self._tree_keys)
        twin._nid = itertools.count(next(self._nid))
        twin._states = list(self._states)
        twin._ext = list(self._ext)
        twin._acts = list(self._acts)
        twin.records = [dict(r) for r in self.records]
        twin.trees = [self._clone_tree(t) for t in self.trees]
        return twin

    @staticmethod
    def _clone_tree(tree: GoalTree) -> GoalTree:
        def clone_node(n: GoalNode) -> GoalNode:
            c = GoalNode(nid=n.nid, clause=n.clause, binding=n.binding,
                         disjunct=n.disjunct, consumed=n.consumed,
                         origin=n.origin, is_true=n.is_true, dead=n.dead,
                         applied=set(n.applied))
            c.children = [clone_node(k) for k in n.children]
            return c

        t = GoalTree(tid=tree.tid, source=tree.source, binding=tree.binding,
                     opened_at=tree.opened_at,
                     achieved_at=tree.achieved_at, closed=tree.closed)
        t.children = [clone_node(c) for c in tree.children]
        return t


# ---------------------------------------------------------------------------
# Packaged runs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TreeReport:
    tid: int
    rule: str
    binding: tuple
    opened_at: int
    achieved_at: Optional[int]
    failed: bool

    def as_dict(self) -> dict:
        return {
            "tree": self.tid,
            "rule": self.rule,
            "binding": dict(self.binding),
            "opened_at": self.opened_at,
            "achieved_at": self.achieved_at,
            "failed": self.failed,
        }


@dataclass
class RunResult:
    trace: Trace
    trees: list
    script: dict
    halted: Optional[dict]

    @property
    def all_opened_achieved(self) -> bool:
        return all(t.achieved_at is not None for t in self.trees)

    def goal_report(self) -> dict:
        return {
            "trees": [t.as_dict() for t in self.trees],
            "all_achieved": self.all_opened_achieved,
            "halted": self.halted,
        }


def run(fw: Framework, ext_trace: dict, horizon: int,
        strategy: Optional[Strategy] = None, match_mode: str = SUBSET,
        prune: bool = True, dedup_step2: bool = False) -> RunResult:
    """Execute cycles 0..horizon-1 and a final evaluation pass.

    ``ext_trace`` maps times to external event sets.  The result carries
    the produced trace, the per-tree achievement report, and a script that
    replays the exact choices taken.
    """
    eng = Engine(fw, horizon, strategy=strategy, match_mode=match_mode,
                 prune=prune, dedup_step2=dedup_step2)
    for i in range(horizon):
        eng.step(ext_trace.get(i + 1, frozenset()))
        if eng.halted:
            break
    if not eng.halted:
        eng.final_evaluation()
    trees = [TreeReport(t.tid, t.source.name, t.binding, t.opened_at,
                        t.achieved_at, t.failed) for t in eng.trees]
    script = {"horizon": horizon, "cycles": eng.records}
    return RunResult(eng.partial_trace(), trees, script, eng.halted)


# ---------------------------------------------------------------------------
# Exhaustive exploration
# ---------------------------------------------------------------------------

@dataclass
class ExploreResult:
    traces: list
    halted: list
    complete: bool
    explored: int

    def acts_keys(self) -> set:
        return {t.acts_key() for t in self.traces}


def explore(fw: Framework, ext_trace: dict, horizon: int,
            match_mode: str = SUBSET, max_branches: int = 100000,
            workers: int = 1) -> ExploreResult:
    """Every trace reachable under some choice in steps 2, 3 and 4.

    Steps 2 and 3 take every admissible option (goal forests only grow, so
    smaller choices can never enable an action a larger choice disables),
    and the real branching, the step-4 candidate subset, is enumerated
    exhaustively.  Traces are deduplicated by action content.
    """
    if workers > 1:
        return _explore_parallel(fw, ext_trace, horizon, match_mode,
                                 max_branches, workers)
    base = Engine(fw, horizon, strategy=DeterministicStrategy(),
                  match_mode=match_mode, prune=False, dedup_step2=False)
    return _explore_from(base, fw, ext_trace, horizon, match_mode, max_branches)


def _explore_from(base: Engine, fw: Framework, ext_trace: dict, horizon: int,
                  match_mode: str, max_branches: int) -> ExploreResult:
    traces: dict = {}
    halted: list = []
    counter = {"n": 0, "complete": True}

    def dfs(eng: Engine) -> None:
        if eng.time == horizon:
            trace = eng.partial_trace()
            traces.setdefault(trace.acts_key(), trace)
            return
        if counter["n"] >= max_branches:
            counter["complete"] = False
            return
        counter["n"] += 1
        if eng.prune:
            eng._prune()
        eng._step1()
        eng._apply_step2(eng._step2_options())
        candidates = tuple(sorted({a for o in eng._step3_options()
                                   for a in o.stamping.actions}))
        ext = ext_trace.get(eng.time + 1, frozenset())
        frame = eng.current_frame()

        def violations(acts: frozenset) -> list:
            return check_preconditions(frame, ext | acts, eng.fw)

        passing = [
            frozenset(candidates[j] for j in range(len(candidates))
                      if m >> j & 1)
            for m in range(1 << len(candidates))
        ]
        passing = [s for s in dict.fromkeys(passing) if not violations(s)]
        if not passing:
            eng.halted = {"time": eng.time + 1,
                          "violations": [str(v) for v in violations(frozenset())]}
            eng._commit(ext, frozenset())
            halted.append(eng.partial_trace())
            return
        for acts in sorted(passing, key=lambda s: tuple(sorted(s))):
            branch = eng.clone() if len(passing) > 1 else eng
            branch._commit(ext, acts)
            dfs(branch)

    dfs(base)
    ordered = [traces[k] for k in sorted(traces)]
    return ExploreResult(ordered, halted, counter["complete"], counter["n"])


def _explore_parallel(fw: Framework, ext_trace: dict, horizon: int,
                      match_mode: str, max_branches: int,
                      workers: int) -> ExploreResult:
    """Fan the first cycle's branches out over a process pool."""
    import concurrent.futures

    base = Engine(fw, horizon, strategy=DeterministicStrategy(),
                  match_mode=match_mode, prune=False, dedup_step2=False)
    base._step1()
    base._apply_step2(base._step2_options())
    candidates = tuple(sorted({a for o in base._step3_options()
                               for a in o.stamping.actions}))
    ext = ext_trace.get(1, frozenset())
    frame = base.current_frame()
    passing = []
    for m in range(1 << len(candidates)):
        s = frozenset(candidates[j] for j in range(len(candidates)) if m >> j & 1)
        if s not in passing and not check_preconditions(frame, ext | s, fw):
            passing.append(s)
    if not passing:
        return explore(fw, ext_trace, horizon, match_mode, max_branches, workers=1)
    jobs = [tuple(sorted(s)) for s in passing]
    per_branch = max(max_branches // max(len(jobs), 1), 1)
    results = []
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_explore_branch, fw, ext_trace, horizon,
                               match_mode, per_branch, job) for job in jobs]
        for fut in futures:
            results.append(fut.result())
    traces: dict = {}
    halted: list = []
    complete = True
    explored = 0
    for res in results:
        for t in res.traces:
            traces.setdefault(t.acts_key(), t)
        halted.extend(res.halted)
        complete = complete and res.complete
        explored += res.explored
    ordered = [traces[k] for k in sorted(traces)]
    return ExploreResult(ordered, halted, complete, explored)


def _explore_branch(fw: Framework, ext_trace: dict, horizon: int,
                    match_mode: str, max_branches: int,
                    first_acts: tuple) -> ExploreResult:
    eng = Engine(fw, horizon, strategy=DeterministicStrategy(),
                 match_mode=match_mode, prune=False, dedup_step2=False)
    eng._step1()
    eng._apply_step2(eng._step2_options())
    eng._commit(ext_trace.get(1, frozenset()), frozenset(first_acts))
    return _explore_from(eng, fw, ext_trace, horizon, match_mode, max_branches)
