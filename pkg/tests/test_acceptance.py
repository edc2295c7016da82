"""Acceptance suite: one test per criterion, each printing a verdict line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines and timings.
"""

import contextlib
import itertools
import json
import random
import time

import pytest

from kelps import (
    check_frame_axioms,
    check_reactive,
    enumerate_reactive_oracle,
    explore,
    run,
    trace_to_jsonl,
)
from kelps.cli import main as cli_main
from kelps.engine import DeterministicStrategy, RandomStrategy
from kelps.model import Trace, complex_true, formula_true
from kelps.syntax import (
    Atom,
    Cmp,
    Complex,
    Const,
    TimeExpr,
    ground_atom,
    make_condition,
)
from kelps.temporal import admits_sequencing, satisfiable

from .conftest import FIXTURES, framework, events, trace_fixture
from .oracles import (
    enum_satisfiable,
    enum_sequencing,
    random_constraints,
    random_instance,
    random_time_complexes,
)


@contextlib.contextmanager
def criterion(number: int, description: str, budget: float = None):
    t0 = time.monotonic()
    try:
        yield
    except BaseException:
        print(f"\nACCEPTANCE criterion {number}: FAIL — {description}")
        raise
    dt = time.monotonic() - t0
    if budget is not None:
        assert dt < budget, f"criterion {number} exceeded {budget}s ({dt:.2f}s)"
    print(f"\nACCEPTANCE criterion {number}: PASS — {description} ({dt:.2f}s)")


@pytest.fixture(scope="module")
def tiny_instances():
    return [random_instance(seed) for seed in range(100)]


@pytest.fixture(scope="module")
def produced_traces(tiny_instances):
    """Traces from fixture runs and randomized runs, for criteria 6 and 7."""
    produced = []
    for name, horizon in (("wolf", 5), ("wolf_state", 5), ("orders", 6),
                          ("orders_contention", 6), ("empty", 3)):
        fw = framework(name)
        res = run(fw, events(name, fw), horizon)
        produced.append((fw, res))
    for i, (fw, ext, horizon) in enumerate(tiny_instances):
        for strategy in (DeterministicStrategy(), RandomStrategy(977 * i + 5)):
            res = run(fw, ext, horizon, strategy=strategy)
            if not res.halted:
                produced.append((fw, res))
    return produced


def test_criterion_1_stateless_wolf_reproduction():
    with criterion(1, "stateless wolf run: exactly cry-wolf@4, reactive model",
                   budget=1.0):
        fw = framework("wolf")
        res = run(fw, events("wolf", fw), 5)
        acts = {t: res.trace.acts[t] for t in range(1, 6) if res.trace.acts[t]}
        assert acts == {4: frozenset({ground_atom("cry-wolf")})}
        report = check_reactive(res.trace, fw)
        assert report.reactive_interpretation
        assert report.reactive_model


def test_criterion_2_stateful_wolf_and_preventative():
    with criterion(2, "stateful wolf run + preventative trace verdicts",
                   budget=1.0):
        fw = framework("wolf_state")
        res = run(fw, events("wolf_state", fw), 5)
        outdoors = ground_atom("outdoors")
        assert all(outdoors in res.trace.states[i] for i in range(6))
        acts = {t: res.trace.acts[t] for t in range(1, 6) if res.trace.acts[t]}
        assert acts == {4: frozenset({ground_atom("cry-wolf")})}

        preventative = trace_fixture("wolf_state_preventative", fw)
        report = check_reactive(preventative, fw)
        assert all(v.holds for v in report.rule_verdicts)  # rules-mode passes
        assert not report.reactive_interpretation
        assert report.unsupported == [(ground_atom("go-inside"), 1)]


def test_criterion_3_order_handling_scenario():
    with criterion(3, "order run: plan executed within deadline, exclusive "
                      "dispatch under contention", budget=1.0):
        fw = framework("orders")
        res = run(fw, events("orders", fw), 6)
        trace = res.trace
        dispatch_times = [t for t in range(1, 7)
                          if ground_atom("dispatch", "bob", "book") in trace.acts[t]]
        invoice_times = [t for t in range(1, 7)
                         if ground_atom("send-invoice", "bob", "book") in trace.acts[t]]
        assert len(dispatch_times) == 1 and len(invoice_times) == 1
        t2, t3 = dispatch_times[0], invoice_times[0]
        assert 1 < t2 <= t3 <= 4
        assert not any(a[0] == "send-apology" for t in range(1, 7)
                       for a in trace.acts[t])
        due = ground_atom("payment-due", "bob", "book")
        assert all(due in trace.states[t] for t in range(t3, 7))
        assert all(due not in trace.states[t] for t in range(0, t3))
        report = check_reactive(trace, fw)
        assert report.reactive_model

        contention_fw = framework("orders_contention")
        cres = run(contention_fw, events("orders_contention", contention_fw), 6)
        creport = check_reactive(cres.trace, contention_fw)
        assert creport.pre_ok
        assert creport.reactive_interpretation
        for t in range(1, 7):
            dispatched = [a for a in cres.trace.acts[t] if a[0] == "dispatch"]
            items = [a[1][1] for a in dispatched]
            assert len(items) == len(set(items)), "concurrent same-item dispatch"


def test_criterion_4_generated_traces_are_reactive(tiny_instances):
    with criterion(4, "every engine trace over 100 random frameworks and "
                      "random strategies is a reactive interpretation",
                   budget=120.0):
        checked = 0
        for i, (fw, ext, horizon) in enumerate(tiny_instances):
            strategies = [DeterministicStrategy(),
                          RandomStrategy(31 * i + 1),
                          RandomStrategy(31 * i + 2)]
            for strategy in strategies:
                res = run(fw, ext, horizon, strategy=strategy)
                if res.halted:
                    continue
                report = check_reactive(res.trace, fw)
                assert report.reactive_interpretation, (i, res.trace)
                checked += 1
        assert checked >= 250


def test_criterion_5_exploration_equals_oracle(tiny_instances):
    with criterion(5, "explore-set equals reactive-interpretation set on 100 "
                      "random frameworks", budget=300.0):
        for i, (fw, ext, horizon) in enumerate(tiny_instances):
            exp = explore(fw, ext, horizon, max_branches=50000)
            orc = enumerate_reactive_oracle(fw, ext, horizon,
                                            max_assignments=200000)
            assert exp.complete and orc.complete, i
            assert exp.acts_keys() == orc.acts_keys(), i


def test_criterion_6_conditional_soundness(produced_traces):
    with criterion(6, "runs with all goal trees achieved make every rule "
                      "true with no precondition violation"):
        checked = 0
        for fw, res in produced_traces:
            if not res.all_opened_achieved:
                continue
            report = check_reactive(res.trace, fw)
            assert all(v.holds for v in report.rule_verdicts), res.trace
            assert report.pre_ok
            checked += 1
        assert checked >= 50


def test_criterion_7_frame_axioms(produced_traces):
    with criterion(7, "frame axioms hold on every produced trace and a "
                      "corrupted trace is flagged"):
        for fw, res in produced_traces:
            assert check_frame_axioms(res.trace, fw).ok
        fw = framework("wolf_state")
        good = run(fw, events("wolf_state", fw), 5).trace
        corrupted = Trace(good.aux,
                          good.states[:3] + (frozenset(),) + good.states[4:],
                          good.ext, good.acts)
        assert not check_frame_axioms(corrupted, fw).ok


def test_criterion_8_locality():
    with criterion(8, "1000 random ground complexes: full-trace truth equals "
                      "prefix truth; single-time equals single-frame"):
        fw_wolf = framework("wolf_state")
        traces = [trace_fixture("wolf_state_preventative", fw_wolf),
                  run(fw_wolf, events("wolf_state", fw_wolf), 5).trace]
        fw_orders = framework("orders")
        otrace = run(fw_orders, events("orders", fw_orders), 6).trace
        pools = [
            (fw_wolf, traces[0], ["outdoors", "see-wolf", "go-inside",
                                  "cry-wolf", "go-outside"], [()]),
            (fw_wolf, traces[1], ["outdoors", "see-wolf", "cry-wolf"], [()]),
            (fw_orders, otrace,
             ["reliable", "payment-due", "orders", "dispatch", "send-invoice",
              "send-apology"],
             [("bob",), ("bob", "book"), ("c1", "book")]),
        ]
        rng = random.Random(17)
        for case in range(1000):
            fw, trace, preds, argpool = pools[case % len(pools)]
            picks = []
            for _ in range(rng.randint(1, 3)):
                pred = rng.choice(preds)
                arity = fw.predicates[pred].arity
                args = rng.choice([a for a in argpool if len(a) == arity] or [()])
                picks.append((pred, args, rng.randint(0, trace.horizon)))
            conds = tuple(
                make_condition(Atom(p, tuple(Const(s) for s in args),
                                    TimeExpr(None, t)))
                for p, args, t in picks)
            constraints = ()
            if rng.random() < 0.3:
                a, b = sorted(rng.sample(range(trace.horizon + 1), 2))
                constraints = (Cmp(TimeExpr(None, a), "<", TimeExpr(None, b)),)
            cx = Complex(conds, constraints)
            latest = max(t for _, _, t in picks)
            full = complex_true(cx, trace, {}, fw)
            pref = complex_true(cx, trace.prefix(latest), {}, fw)
            assert full == pref, (case, cx)
            if len({t for _, _, t in picks}) == 1:
                frame = trace.frame(latest)
                single = all(formula_true(c.formula, frame, {}, fw)
                             for c in conds)
                single = single and all(
                    satisfiable([c], {}, trace.horizon) for c in constraints)
                assert full == single, (case, cx)


def test_criterion_9_temporal_solver_oracle():
    with criterion(9, "solver and sequencing agree with exhaustive "
                      "enumeration on constraint sets up to 4 variables"):
        rng = random.Random(101)
        for i in range(500):
            cs = random_constraints(rng, max_vars=4, horizon=8)
            assert satisfiable(cs, {}, 8) == enum_satisfiable(cs, {}, 8), i
        for i in range(400):
            earlier, later = random_time_complexes(rng, horizon=8)
            strict = rng.random() < 0.5
            got = admits_sequencing(earlier, later, strict, {}, 8)
            want = enum_sequencing(earlier, later, strict, {}, 8)
            assert got == want, (i, earlier, later, strict)


def test_criterion_10_replay_determinism(tmp_path):
    with criterion(10, "fixed seed and scripted strategy replay to "
                       "byte-identical trace files"):
        a, b, c = (tmp_path / n for n in ("a.jsonl", "b.jsonl", "c.jsonl"))
        script = tmp_path / "script.json"
        base = ["run", str(FIXTURES / "orders_contention.kelps"),
                str(FIXTURES / "orders_contention.events"),
                "--horizon", "6", "--strategy", "rand:42"]
        assert cli_main(base + ["--out", str(a), "--script-out", str(script)]) == 0
        assert cli_main(base + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        replay = ["run", str(FIXTURES / "orders_contention.kelps"),
                  str(FIXTURES / "orders_contention.events"),
                  "--horizon", "6", "--strategy", f"script:{script}",
                  "--out", str(c)]
        assert cli_main(replay) == 0
        assert c.read_bytes() == a.read_bytes()
