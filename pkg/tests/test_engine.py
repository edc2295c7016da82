import json

import pytest

from kelps import parse_framework, trace_to_jsonl
from kelps.engine import (
    DeterministicStrategy,
    Engine,
    EngineError,
    RandomStrategy,
    ScriptedStrategy,
    Strategy,
    explore,
    run,
)
from kelps.model import complex_true
from kelps.syntax import Complex, ground_atom, subst_complex, time_bound
from kelps.temporal import admits_sequencing

from .conftest import framework, events


CRY = ground_atom("cry-wolf")
SEE = ground_atom("see-wolf")


class ChooseNothing(Strategy):
    def choose_step2(self, cycle, options):
        return []

    def choose_step3(self, cycle, options):
        return []

    def choose_step4(self, cycle, ext, candidates, violations):
        return frozenset()


REPEAT_SRC = """
events  { see-wolf/0, help-arrives/0 }
actions { cry-wolf/0 }
rules {
  see-wolf(T) -> cry-wolf(T+1),
  cry-wolf(T) & ~help-arrives(T+1) -> cry-wolf(T+2)
}
"""


class TestInit:
    def test_rules_without_empty_antecedent_stay_rules(self):
        fw = framework("wolf")
        eng = Engine(fw, 5)
        assert len(eng.rules) == 1
        assert eng.trees == []

    def test_true_rule_opens_tree(self):
        fw = parse_framework("""
            actions { act/0 }
            rules { true -> act(T) & T <= 2 }
        """)
        eng = Engine(fw, 5)
        assert eng.rules == []
        assert len(eng.trees) == 1
        assert len(eng.trees[0].children) == 1

    def test_unsatisfiable_disjunct_omitted(self):
        fw = parse_framework("""
            actions { act/0 }
            rules { true -> act(T) & T < 0 | act(T) & T <= 2 }
        """)
        eng = Engine(fw, 5)
        (tree,) = eng.trees
        assert [n.disjunct for n in tree.children] == [1]

    def test_horizon_must_be_positive(self):
        with pytest.raises(EngineError):
            Engine(framework("wolf"), 0)


class TestStep1:
    def test_partial_antecedent_spawns_residual(self):
        fw = parse_framework(REPEAT_SRC)
        eng = Engine(fw, 8, strategy=ChooseNothing(), prune=False)
        eng.step(frozenset({SEE}))  # cycle 0
        eng.step()                  # cycle 1, nothing happens
        assert all(not r.consumed for r in eng.rules)
        # Inject a cry-wolf occurrence and watch the repeat rule residualize:
        # cry-wolf fires at 4, so cycle 4 leaves ~help-arrives(5) pending.
        eng2 = Engine(fw, 8, prune=False)
        for i in range(5):
            eng2.step(frozenset({SEE}) if i + 1 == 3 else frozenset())
        residuals = [r for r in eng2.rules if r.consumed]
        assert residuals, "expected a partially evaluated repeat rule"
        rem = residuals[0].remainder
        assert str(rem.conditions[0].time) == "5"

    def test_completed_antecedent_opens_tree(self):
        fw = framework("wolf")
        eng = Engine(fw, 5)
        for i in range(4):
            eng.step(frozenset({SEE}) if i + 1 == 3 else frozenset())
        assert len(eng.trees) == 1
        tree = eng.trees[0]
        assert tree.opened_at == 3
        assert dict(tree.binding) == {"T": 3}

    def test_no_match_changes_nothing(self):
        fw = framework("wolf")
        eng = Engine(fw, 5)
        eng.step()
        assert eng.trees == []
        assert len(eng.rules) == 1


class TestStep2:
    def test_negative_condition_reduces_when_event_absent(self):
        fw = parse_framework("""
            events  { help-arrives/0 }
            actions { cry-wolf/0 }
            rules { true -> ~help-arrives(2) & cry-wolf(3) }
        """)
        eng = Engine(fw, 5, strategy=DeterministicStrategy())
        eng.step()
        eng.step()  # cycle 1: nothing reducible yet
        eng.step()  # cycle 2: ~help-arrives(2) is true, child cry-wolf(3)
        (tree,) = eng.trees
        leaves = [n for n in tree.nodes() if not n.children]
        clauses = [n.clause for n in leaves if not n.is_true]
        assert any(len(c.conditions) == 1
                   and c.conditions[0].formula.pred == "cry-wolf"
                   for c in clauses)

    def test_achievement_marks_tree(self):
        fw = framework("wolf")
        res = run(fw, events("wolf", fw), 5)
        (tree,) = res.trees
        assert tree.achieved_at == 4

    def test_choosing_nothing_leaves_goals_alone(self):
        fw = framework("wolf")
        res = run(fw, events("wolf", fw), 5, strategy=ChooseNothing())
        (tree,) = res.trees
        assert tree.achieved_at is None
        assert all(not t.acts[i] for i in range(1, 6) for t in (res.trace,))


class TestStep3:
    def test_variable_timestamp_stamped_to_next_time(self):
        fw = parse_framework("""
            actions { act/0 }
            rules { true -> act(T) }
        """)

        seen = {}

        class Recorder(DeterministicStrategy):
            def choose_step3(self, cycle, options):
                chosen = super().choose_step3(cycle, options)
                seen[cycle] = [o.stamping for o in options]
                return chosen

        eng = Engine(fw, 3, strategy=Recorder())
        eng.step()
        assert seen[0][0].actions == frozenset({ground_atom("act")})
        assert eng.partial_trace().acts[1] == frozenset({ground_atom("act")})

    def test_all_ground_bare_actions_stamped_together(self, orders=None):
        fw = framework("orders")
        res = run(fw, events("orders", fw), 6)
        assert res.trace.acts[2] == frozenset({
            ground_atom("dispatch", "bob", "book"),
            ground_atom("send-invoice", "bob", "book"),
        })

    def test_empty_forest_no_candidates(self):
        fw = framework("wolf")
        eng = Engine(fw, 3)
        rec = eng.step()
        assert rec["step3"] == []
        assert rec["step4"] == []


class TestStep4:
    def test_pure_frame_step(self):
        fw = framework("wolf_state")
        res = run(fw, {}, 3)
        assert [set(s) for s in res.trace.states] == [aset for aset in
                                                      [{ground_atom("outdoors")}] * 4]

    def test_contention_never_double_dispatches(self):
        fw = framework("orders_contention")
        res = run(fw, events("orders_contention", fw), 6)
        for t in range(1, 7):
            dispatches = {a for a in res.trace.acts[t] if a[0] == "dispatch"}
            items = [a[1][1] for a in dispatches]
            assert len(items) == len(set(items))

    def test_halt_when_external_events_poison_preconditions(self):
        fw = parse_framework("""
            events  { leave-house/0 }
            actions { wave/0 }
            preconditions { leave-house(T) & ~wave(T) -> false }
        """)
        res = run(fw, {2: frozenset({ground_atom("leave-house")})}, 4)
        assert res.halted is not None
        assert res.halted["time"] == 2
        assert res.trace.horizon == 2  # committed the external event, then stopped
        assert res.trace.pre_violation is not None


class TestRun:
    def test_empty_framework_is_frame_steps(self):
        fw = framework("empty")
        res = run(fw, {}, 3)
        assert res.trace.horizon == 3
        assert all(not res.trace.events_at(i) for i in range(1, 4))

    def test_goal_report_shape(self):
        fw = framework("orders")
        res = run(fw, events("orders", fw), 6)
        report = res.goal_report()
        assert report["all_achieved"]
        assert report["trees"][0]["binding"] == {"C": "bob", "Item": "book",
                                                 "T1": 1}

    def test_late_antecedent_still_opens_tree(self):
        # The event lands at the horizon: the final evaluation pass must
        # still open (and fail to achieve) the obligation's tree.
        fw = framework("wolf")
        res = run(fw, {5: frozenset({SEE})}, 5)
        (tree,) = res.trees
        assert tree.opened_at == 5
        assert tree.achieved_at is None


class TestExplore:
    def test_wolf_action_sets(self):
        fw = framework("wolf")
        res = explore(fw, events("wolf", fw), 5)
        assert res.complete
        keys = {tuple(sorted(t.acts[4])) for t in res.traces}
        assert keys == {(), ((("cry-wolf", ())),)} or len(res.traces) == 2

    def test_no_unmotivated_actions(self):
        fw = framework("wolf_state")
        res = explore(fw, events("wolf_state", fw), 5)
        assert all(ground_atom("go-inside") not in t.acts[i]
                   for t in res.traces for i in range(1, 6))

    def test_no_rules_single_trace(self):
        fw = framework("empty")
        res = explore(fw, {}, 3)
        assert len(res.traces) == 1

    def test_cap_flags_incomplete(self):
        fw = framework("wolf")
        res = explore(fw, events("wolf", fw), 5, max_branches=1)
        assert not res.complete

    def test_prefix_actions_shared_across_branches(self):
        fw = parse_framework(REPEAT_SRC)
        res = explore(fw, {1: frozenset({SEE})}, 4)
        # Every branch that contains cry-wolf@2 extends the same committed
        # prefix: no branch rewrites its past.
        with_cry = [t for t in res.traces if CRY in t.acts[2]]
        assert with_cry
        for t in with_cry:
            assert not t.acts[1]

    def test_workers_match_sequential(self):
        fw = parse_framework(REPEAT_SRC)
        ext = {1: frozenset({SEE})}
        seq = explore(fw, ext, 4, workers=1)
        par = explore(fw, ext, 4, workers=2)
        assert seq.acts_keys() == par.acts_keys()


class TestLemmaShapes:
    def _run_engine(self, horizon=8):
        fw = parse_framework(REPEAT_SRC)
        eng = Engine(fw, horizon, prune=False)
        for i in range(horizon):
            eng.step(frozenset({SEE}) if i + 1 == 3 else frozenset())
            self._check_lemma1(eng)
            self._check_lemma2(eng)
        return eng

    def _check_lemma1(self, eng):
        trace = eng.partial_trace()
        for res in eng.rules:
            if not res.consumed:
                continue
            binding = dict(res.binding)
            ear = subst_complex(
                Complex(tuple(res.source.antecedent.conditions[j]
                              for j in sorted(res.consumed)), ()),
                binding)
            assert complex_true(ear, trace, {}, eng.fw)
            assert admits_sequencing(ear, res.remainder, strict=True,
                                     partial={}, horizon=eng.bound) is not None

    def _check_lemma2(self, eng):
        trace = eng.partial_trace()
        for tree in eng.trees:
            src = tree.source
            for node in tree.nodes():
                if node.is_true:
                    continue
                binding = dict(node.binding)
                disjunct = src.consequents[node.disjunct]
                earlier = subst_complex(
                    Complex(tuple(src.antecedent.conditions)
                            + tuple(disjunct.conditions[j]
                                    for j in sorted(node.consumed)), ()),
                    binding)
                assert complex_true(earlier, trace, {}, eng.fw)
                assert admits_sequencing(earlier, node.clause, strict=True,
                                         partial={}, horizon=eng.bound) is not None

    def test_every_residual_and_clause_traces_back(self):
        eng = self._run_engine()
        assert any(r.consumed for r in eng.rules)
        assert eng.trees


class TestDeterminism:
    def test_identical_runs_identical_bytes(self):
        fw = framework("orders_contention")
        ext = events("orders_contention", fw)
        a = run(fw, ext, 6, strategy=RandomStrategy(42))
        b = run(fw, ext, 6, strategy=RandomStrategy(42))
        assert trace_to_jsonl(a.trace) == trace_to_jsonl(b.trace)
        assert a.script == b.script

    def test_script_replay_reproduces_random_run(self):
        fw = parse_framework(REPEAT_SRC)
        ext = {3: frozenset({SEE})}
        original = run(fw, ext, 7, strategy=RandomStrategy(7))
        replay = run(fw, ext, 7,
                     strategy=ScriptedStrategy(json.loads(json.dumps(original.script))))
        assert trace_to_jsonl(replay.trace) == trace_to_jsonl(original.trace)

    def test_script_divergence_detected(self):
        fw = framework("wolf")
        ext = events("wolf", fw)
        script = run(fw, ext, 5).script
        script["cycles"][3]["step3"] = ["3:0:99:bogus:cry-wolf"]
        with pytest.raises(EngineError):
            run(fw, ext, 5, strategy=ScriptedStrategy(script))


class TestPruning:
    def test_dead_clauses_marked(self):
        fw = parse_framework("""
            events  { e/0 }
            actions { act/0 }
            rules { true -> act(T) & T <= 2 }
        """)
        eng = Engine(fw, 6, strategy=ChooseNothing(), prune=True)
        for _ in range(4):
            eng.step()
        (tree,) = eng.trees
        assert tree.failed

    def test_pruning_does_not_change_the_trace(self):
        fw = parse_framework(REPEAT_SRC)
        ext = {3: frozenset({SEE})}
        pruned = run(fw, ext, 8, prune=True)
        unpruned = run(fw, ext, 8, prune=False)
        assert trace_to_jsonl(pruned.trace) == trace_to_jsonl(unpruned.trace)
