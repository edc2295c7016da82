import itertools
import random

import pytest

from kelps import parse_framework
from kelps.model import Frame
from kelps.state import EXACT, SUBSET, EventSet, check_preconditions, entry_fires, succ
from kelps.syntax import ground_atom

from .conftest import framework


@pytest.fixture(scope="module")
def wolf_state_fw():
    return framework("wolf_state")


OUTDOORS = ground_atom("outdoors")
GO_INSIDE = ground_atom("go-inside")
GO_OUTSIDE = ground_atom("go-outside")
SEE_WOLF = ground_atom("see-wolf")


class TestSucc:
    def test_termination(self, wolf_state_fw):
        got = succ(frozenset({OUTDOORS}), frozenset({GO_INSIDE}),
                   wolf_state_fw.causal)
        assert got == frozenset()

    def test_persistence(self, wolf_state_fw):
        got = succ(frozenset({OUTDOORS}), frozenset({SEE_WOLF}),
                   wolf_state_fw.causal)
        assert got == frozenset({OUTDOORS})

    def test_initiation(self, wolf_state_fw):
        got = succ(frozenset(), frozenset({GO_OUTSIDE}), wolf_state_fw.causal)
        assert got == frozenset({OUTDOORS})

    def test_empty_events_identity(self, wolf_state_fw):
        s = frozenset({OUTDOORS})
        for mode in (SUBSET, EXACT):
            assert succ(s, frozenset(), wolf_state_fw.causal, mode) == s

    def test_subset_vs_exact(self, wolf_state_fw):
        ev = frozenset({GO_INSIDE, SEE_WOLF})
        assert succ(frozenset({OUTDOORS}), ev, wolf_state_fw.causal,
                    SUBSET) == frozenset()
        # The literal reading: the singleton key does not equal the pair.
        assert succ(frozenset({OUTDOORS}), ev, wolf_state_fw.causal,
                    EXACT) == frozenset({OUTDOORS})

    def test_removal_then_addition(self):
        fw = parse_framework("""
            fluents { p/0 }
            actions { a/0 }
            initiates  { a ~> p }
            terminates { a ~> p }
        """)
        # A fluent both terminated and initiated ends up present.
        assert succ(frozenset({("p", ())}), frozenset({("a", ())}),
                    fw.causal) == frozenset({("p", ())})
        assert succ(frozenset(), frozenset({("a", ())}),
                    fw.causal) == frozenset({("p", ())})


class TestEmergentFrameProperty:
    def test_both_conjuncts_hold_over_random_transitions(self, wolf_state_fw):
        rng = random.Random(5)
        causal = wolf_state_fw.causal
        atoms = [OUTDOORS]
        events = [GO_INSIDE, GO_OUTSIDE, SEE_WOLF]
        for _ in range(300):
            s = frozenset(a for a in atoms if rng.random() < 0.5)
            ev = frozenset(e for e in events if rng.random() < 0.5)
            nxt = succ(s, ev, causal)
            initiated = {e.fluent for e in causal.initiates
                         if entry_fires(e.key, ev)}
            terminated = {e.fluent for e in causal.terminates
                          if entry_fires(e.key, ev)}
            for p in atoms:
                if p in initiated:
                    assert p in nxt
                if p in s and p not in terminated:
                    assert p in nxt


DISPATCH_FW = """
sorts { customer: {c1, c2}, item: {book} }
fluents { reliable(customer) }
events { orders(customer, item) }
actions { dispatch(customer, item) }
preconditions {
  dispatch(C1, Item, T) & dispatch(C2, Item, T) & C1 != C2 -> false
}
"""

COOCCUR_FW = """
actions { leave-house/0, take-keys/0 }
preconditions { leave-house(T) & ~take-keys(T) -> false }
"""


class TestPreconditions:
    def test_distinct_customer_dispatch_violation(self):
        fw = parse_framework(DISPATCH_FW)
        prev = Frame(0, fw.aux)
        ev = frozenset({ground_atom("dispatch", "c1", "book"),
                        ground_atom("dispatch", "c2", "book")})
        violations = check_preconditions(prev, ev, fw)
        assert violations
        assert all(v.sentence == "pre1" for v in violations)

    def test_single_dispatch_ok(self):
        fw = parse_framework(DISPATCH_FW)
        prev = Frame(0, fw.aux)
        ev = frozenset({ground_atom("dispatch", "c1", "book")})
        assert check_preconditions(prev, ev, fw) == []

    def test_cooccurrence_requirement(self):
        fw = parse_framework(COOCCUR_FW)
        prev = Frame(0, fw.aux)
        assert check_preconditions(prev, frozenset({ground_atom("leave-house")}), fw)
        assert check_preconditions(
            prev,
            frozenset({ground_atom("leave-house"), ground_atom("take-keys")}),
            fw) == []

    def test_empty_events_never_violate(self):
        for src in (DISPATCH_FW, COOCCUR_FW):
            fw = parse_framework(src)
            prev = Frame(3, fw.aux | frozenset({ground_atom("take-keys")}))
            assert check_preconditions(prev, frozenset(), fw) == []

    def test_state_condition_at_previous_time(self):
        fw = parse_framework("""
            sorts { item: {book} }
            fluents { in-stock(item) }
            actions { dispatch(item) }
            preconditions { ~in-stock(Item, T-1) & dispatch(Item, T) -> false }
        """)
        ev = frozenset({ground_atom("dispatch", "book")})
        empty_stock = Frame(2, fw.aux)
        assert check_preconditions(empty_stock, ev, fw)
        stocked = Frame(2, fw.aux | frozenset({ground_atom("in-stock", "book")}))
        assert check_preconditions(stocked, ev, fw) == []


class TestEventSet:
    def test_partition(self):
        ev = EventSet(frozenset({SEE_WOLF}), frozenset({GO_INSIDE}))
        assert ev.all == {SEE_WOLF, GO_INSIDE}
        assert bool(ev)
        assert not EventSet()
