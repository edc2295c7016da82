from pathlib import Path

import pytest

from kelps import load_events, load_framework, trace_from_jsonl

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


def framework(name: str):
    return load_framework(FIXTURES / f"{name}.kelps")


def events(name: str, fw):
    return load_events(FIXTURES / f"{name}.events", fw)


def trace_fixture(name: str, fw):
    return trace_from_jsonl((FIXTURES / f"{name}.trace").read_text(), fw)


@pytest.fixture(scope="session")
def wolf():
    fw = framework("wolf")
    return fw, events("wolf", fw)


@pytest.fixture(scope="session")
def wolf_state():
    fw = framework("wolf_state")
    return fw, events("wolf_state", fw)


@pytest.fixture(scope="session")
def orders():
    fw = framework("orders")
    return fw, events("orders", fw)


@pytest.fixture(scope="session")
def orders_contention():
    fw = framework("orders_contention")
    return fw, events("orders_contention", fw)


@pytest.fixture(scope="session")
def empty():
    fw = framework("empty")
    return fw, events("empty", fw)
