import sys
from pathlib import Path

import pytest

from pricescope.chain.address import ZERO_ADDRESS, Address
from pricescope.chain.invocations import UserInvocation
from pricescope.chain.trace import load_trace
from pricescope.chain.transfers import TransferAction, classify
from pricescope.graph import UserControlledSet, build_graph

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"
GOLDEN = Path(__file__).resolve().parent / "golden"
sys.path.insert(0, str(ROOT / "scripts"))


def A(n: int) -> Address:
    """Deterministic test address 0x...n (never the zero address for n > 0)."""
    return Address("0x" + format(0x1000 + n, "040x"))


NULL = ZERO_ADDRESS
UCA = A(1)  # the user-controlled account in synthetic graphs


def tr(sender, receiver, token, value=1, seq=0, call_path=()):
    return TransferAction(sender, receiver, token, value, classify(sender, receiver), seq, tuple(call_path))


def graph_of(transfers, uc=(UCA,), invocation=0):
    transfers = [
        TransferAction(t.sender, t.receiver, t.token, t.value, t.kind, i, t.call_path, t.frame_ids)
        for i, t in enumerate(transfers)
    ]
    inv = UserInvocation(invocation, (), tuple(transfers))
    return build_graph(inv, UserControlledSet(frozenset(uc)))


def fixture(name: str):
    return load_trace(FIXTURES / name)


@pytest.fixture
def fig4_trace():
    return fixture("fig4.json")


@pytest.fixture
def uwulend_trace():
    return fixture("uwulend.json")


# Acceptance results, filled by test_acceptance.py and echoed at the end of the run.
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
